#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vio/geometry/se3.hpp"

namespace vio {

enum class VariableKind { Pose, Euclidean };

/// One optimization variable. Poses retract on the right, vectors additively.
struct Variable {
  VariableKind kind{VariableKind::Euclidean};
  SE3d pose;
  Eigen::VectorXd value;
  bool fixed{false};
  bool eliminate{false};  // landmark-style block removed by Schur complement

  int dim() const { return kind == VariableKind::Pose ? 6 : static_cast<int>(value.size()); }

  void retract(const Eigen::Ref<const Eigen::VectorXd>& delta) {
    if (kind == VariableKind::Pose) {
      pose = pose.retract(delta.head<6>());
    } else {
      value += delta;
    }
  }
};

using VariableId = int;
using ResidualId = int;

/// Residual callback: fills `residual` and, when `jacobians` is non-null, one
/// (residual_dim x variable dim) tangent-space Jacobian per referenced variable.
class CostFunction {
 public:
  virtual ~CostFunction() = default;
  virtual int residual_dim() const = 0;
  virtual void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& residual,
                        std::vector<Eigen::MatrixXd>* jacobians) const = 0;
};

/// Adapts a lambda into a CostFunction.
class LambdaCost final : public CostFunction {
 public:
  using Fn = std::function<void(std::span<const Variable* const>, Eigen::VectorXd&, std::vector<Eigen::MatrixXd>*)>;

  LambdaCost(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int residual_dim() const override { return dim_; }
  void evaluate(std::span<const Variable* const> vars, Eigen::VectorXd& residual,
                std::vector<Eigen::MatrixXd>* jacobians) const override {
    fn_(vars, residual, jacobians);
  }

 private:
  int dim_;
  Fn fn_;
};

struct ResidualBlock {
  std::shared_ptr<const CostFunction> cost;
  std::vector<VariableId> variables;
  Eigen::MatrixXd information;
  bool robust{false};  // eligible for the optional Huber loss
};

/**
 * Nonlinear least-squares problem: sum of r^T * Omega * r over residual blocks.
 *
 * Every residual block may reference at most one eliminated variable, which
 * keeps the landmark block of the normal equations block-diagonal.
 */
class Problem {
 public:
  VariableId add_pose(const SE3d& pose, bool fixed = false);
  VariableId add_vector(const Eigen::VectorXd& value, bool eliminate = false, bool fixed = false);

  ResidualId add_residual(std::shared_ptr<const CostFunction> cost, std::vector<VariableId> variables,
                          Eigen::MatrixXd information, bool robust = false);

  void set_fixed(VariableId id, bool fixed) { variables_.at(id).fixed = fixed; }
  void set_information(ResidualId id, Eigen::MatrixXd information);

  Variable& variable(VariableId id) { return variables_.at(id); }
  const Variable& variable(VariableId id) const { return variables_.at(id); }
  std::vector<Variable>& variables() { return variables_; }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<ResidualBlock>& residuals() const { return residuals_; }

  std::size_t num_free_variables() const;

 private:
  std::vector<Variable> variables_;
  std::vector<ResidualBlock> residuals_;
};

/// Sum of r^T Omega r over all residual blocks (Huber-robustified when huber_delta > 0).
double evaluate_cost(const Problem& problem, double huber_delta = 0.0);

}  // namespace vio
