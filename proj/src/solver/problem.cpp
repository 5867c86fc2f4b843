#include "vio/solver/problem.hpp"

#include <cmath>

#include "vio/common/error.hpp"

namespace vio {

VariableId Problem::add_pose(const SE3d& pose, bool fixed) {
  Variable v;
  v.kind = VariableKind::Pose;
  v.pose = pose;
  v.fixed = fixed;
  variables_.push_back(std::move(v));
  return static_cast<VariableId>(variables_.size() - 1);
}

VariableId Problem::add_vector(const Eigen::VectorXd& value, bool eliminate, bool fixed) {
  Variable v;
  v.kind = VariableKind::Euclidean;
  v.value = value;
  v.eliminate = eliminate;
  v.fixed = fixed;
  variables_.push_back(std::move(v));
  return static_cast<VariableId>(variables_.size() - 1);
}

ResidualId Problem::add_residual(std::shared_ptr<const CostFunction> cost, std::vector<VariableId> variables,
                                 Eigen::MatrixXd information, bool robust) {
  const int dim = cost->residual_dim();
  if (information.rows() != dim || information.cols() != dim) {
    throw Error(ErrorCode::NumericalFailure, "information matrix size does not match residual dimension");
  }
  int eliminated = 0;
  for (VariableId id : variables) {
    if (id < 0 || static_cast<std::size_t>(id) >= variables_.size()) {
      throw Error(ErrorCode::NumericalFailure, "residual references an unknown variable");
    }
    eliminated += variables_[id].eliminate ? 1 : 0;
  }
  if (eliminated > 1) {
    throw Error(ErrorCode::NumericalFailure, "residual references more than one eliminated variable");
  }
  residuals_.push_back({std::move(cost), std::move(variables), std::move(information), robust});
  return static_cast<ResidualId>(residuals_.size() - 1);
}

void Problem::set_information(ResidualId id, Eigen::MatrixXd information) {
  ResidualBlock& block = residuals_.at(id);
  if (information.rows() != block.information.rows() || information.cols() != block.information.cols()) {
    throw Error(ErrorCode::NumericalFailure, "information matrix size mismatch");
  }
  block.information = std::move(information);
}

std::size_t Problem::num_free_variables() const {
  std::size_t n = 0;
  for (const Variable& v : variables_) n += v.fixed ? 0 : 1;
  return n;
}

double evaluate_cost(const Problem& problem, double huber_delta) {
  double cost = 0.0;
  std::vector<const Variable*> vars;
  Eigen::VectorXd r;
  for (const ResidualBlock& block : problem.residuals()) {
    vars.clear();
    for (VariableId id : block.variables) vars.push_back(&problem.variable(id));
    r.resize(block.cost->residual_dim());
    block.cost->evaluate(vars, r, nullptr);
    const double s = r.dot(block.information * r);
    if (block.robust && huber_delta > 0 && s > huber_delta * huber_delta) {
      cost += 2.0 * huber_delta * std::sqrt(s) - huber_delta * huber_delta;
    } else {
      cost += s;
    }
  }
  return cost;
}

}  // namespace vio
