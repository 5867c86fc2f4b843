#include "vio/solver/levenberg_marquardt.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "vio/common/error.hpp"

namespace vio {
namespace {

struct Coupling {
  VariableId var;
  Eigen::MatrixXd block;  // camera dim x landmark dim
};

struct LandmarkSystem {
  VariableId var{-1};
  Eigen::MatrixXd H;
  Eigen::VectorXd b;
  std::vector<Coupling> couplings;
  Eigen::MatrixXd H_inv;  // inverse of the damped block
};

/// Normal equations J^T W J dx = -J^T W r split into camera and landmark parts.
class NormalEquations {
 public:
  explicit NormalEquations(const Problem& problem) : problem_(problem) {
    const auto& vars = problem.variables();
    offset_.assign(vars.size(), -1);
    landmark_.assign(vars.size(), -1);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i].fixed) continue;
      if (vars[i].eliminate) {
        landmark_[i] = static_cast<int>(landmarks_.size());
        LandmarkSystem lm;
        lm.var = static_cast<VariableId>(i);
        landmarks_.push_back(std::move(lm));
      } else {
        offset_[i] = reduced_dim_;
        reduced_dim_ += vars[i].dim();
      }
    }
    const auto& residuals = problem.residuals();
    jacobians_.resize(residuals.size());
    for (std::size_t r = 0; r < residuals.size(); ++r) {
      jacobians_[r].resize(residuals[r].variables.size());
    }
  }

  int reduced_dim() const { return reduced_dim_; }
  std::size_t num_landmarks() const { return landmarks_.size(); }

  /// Evaluates all residuals with Jacobians and accumulates the system. Returns the cost.
  double build(double huber_delta) {
    H_.setZero(reduced_dim_, reduced_dim_);
    b_.setZero(reduced_dim_);
    for (LandmarkSystem& lm : landmarks_) {
      const int d = problem_.variable(lm.var).dim();
      lm.H.setZero(d, d);
      lm.b.setZero(d);
      lm.couplings.clear();
    }

    double cost = 0.0;
    std::vector<const Variable*> vars;
    Eigen::VectorXd r;
    const auto& residuals = problem_.residuals();
    for (std::size_t ri = 0; ri < residuals.size(); ++ri) {
      const ResidualBlock& block = residuals[ri];
      vars.clear();
      for (VariableId id : block.variables) vars.push_back(&problem_.variable(id));
      r.resize(block.cost->residual_dim());
      std::vector<Eigen::MatrixXd>& J = jacobians_[ri];
      block.cost->evaluate(vars, r, &J);

      const double s = r.dot(block.information * r);
      double weight = 1.0;
      if (block.robust && huber_delta > 0 && s > huber_delta * huber_delta) {
        weight = huber_delta / std::sqrt(s);
        cost += 2.0 * huber_delta * std::sqrt(s) - huber_delta * huber_delta;
      } else {
        cost += s;
      }
      const Eigen::MatrixXd W = weight * block.information;
      const Eigen::VectorXd g = W * r;

      int lm_slot = -1;
      int lm_index = -1;
      for (std::size_t k = 0; k < block.variables.size(); ++k) {
        const int li = landmark_[block.variables[k]];
        if (li >= 0) {
          lm_slot = static_cast<int>(k);
          lm_index = li;
        }
      }
      Eigen::MatrixXd WJ_l;
      if (lm_index >= 0) {
        LandmarkSystem& lm = landmarks_[lm_index];
        WJ_l = W * J[lm_slot];
        lm.H.noalias() += J[lm_slot].transpose() * WJ_l;
        lm.b.noalias() -= J[lm_slot].transpose() * g;
      }

      for (std::size_t a = 0; a < block.variables.size(); ++a) {
        const int oa = offset_[block.variables[a]];
        if (oa < 0) continue;
        const Eigen::MatrixXd JtW = J[a].transpose() * W;
        b_.segment(oa, J[a].cols()).noalias() -= J[a].transpose() * g;
        for (std::size_t c = 0; c < block.variables.size(); ++c) {
          const int oc = offset_[block.variables[c]];
          if (oc < 0) continue;
          H_.block(oa, oc, J[a].cols(), J[c].cols()).noalias() += JtW * J[c];
        }
        if (lm_index >= 0) {
          add_coupling(landmarks_[lm_index], block.variables[a], J[a].transpose() * WJ_l);
        }
      }
    }
    if (!std::isfinite(cost)) {
      throw Error(ErrorCode::NumericalFailure, "non-finite cost");
    }
    return cost;
  }

  /**
   * Damps with lambda * diag(H), eliminates landmarks, and solves. Returns false
   * when a factorization fails. `predicted` receives the model cost decrease.
   */
  bool solve_step(double lambda, Eigen::VectorXd& delta, double& predicted) {
    Eigen::MatrixXd S = H_;
    Eigen::VectorXd rhs = b_;
    Eigen::VectorXd damping_c = H_.diagonal().cwiseMax(kMinDiagonal) * lambda;
    S.diagonal() += damping_c;

    std::vector<Eigen::VectorXd> damping_l(landmarks_.size());
    for (std::size_t li = 0; li < landmarks_.size(); ++li) {
      LandmarkSystem& lm = landmarks_[li];
      damping_l[li] = lm.H.diagonal().cwiseMax(kMinDiagonal) * lambda;
      Eigen::MatrixXd Hl = lm.H;
      Hl.diagonal() += damping_l[li];
      Eigen::LLT<Eigen::MatrixXd> llt(Hl);
      if (llt.info() != Eigen::Success) return false;
      lm.H_inv = llt.solve(Eigen::MatrixXd::Identity(Hl.rows(), Hl.cols()));
      schur_update(lm, S, rhs);
    }

    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd dc = llt.solve(rhs);
    if (!dc.allFinite()) return false;

    delta.setZero(problem_.variables().size() > 0 ? total_dim() : 0);
    delta.head(reduced_dim_) = dc;
    predicted = dc.dot(b_ + damping_c.cwiseProduct(dc));

    int off = reduced_dim_;
    for (std::size_t li = 0; li < landmarks_.size(); ++li) {
      const LandmarkSystem& lm = landmarks_[li];
      Eigen::VectorXd bl = lm.b;
      for (const Coupling& c : lm.couplings) {
        bl.noalias() -= c.block.transpose() * dc.segment(offset_[c.var], c.block.rows());
      }
      const Eigen::VectorXd dl = lm.H_inv * bl;
      delta.segment(off, dl.size()) = dl;
      predicted += dl.dot(lm.b + damping_l[li].cwiseProduct(dl));
      off += static_cast<int>(dl.size());
    }
    return delta.allFinite();
  }

  /// Rank test of the undamped system with Jacobi scaling.
  bool is_singular(double threshold) {
    Eigen::MatrixXd S = H_;
    Eigen::VectorXd rhs = b_;
    for (LandmarkSystem& lm : landmarks_) {
      const Eigen::VectorXd d = lm.H.diagonal();
      if ((d.array() <= 0).any()) return true;
      const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd scaled = s.asDiagonal() * lm.H * s.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < threshold * eig.eigenvalues().maxCoeff()) return true;
      lm.H_inv = lm.H.inverse();
      schur_update(lm, S, rhs);
    }
    if (reduced_dim_ == 0) return false;
    const Eigen::VectorXd d = S.diagonal();
    if ((d.array() <= 0).any()) return true;
    const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd scaled = s.asDiagonal() * S * s.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    const Eigen::VectorXd pivots = ldlt.vectorD().cwiseAbs();
    return ldlt.info() != Eigen::Success || pivots.minCoeff() < threshold * pivots.maxCoeff();
  }

  /// Applies a full delta (reduced block first, then landmarks in order).
  void apply(Problem& problem, const Eigen::VectorXd& delta) const {
    auto& vars = problem.variables();
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (offset_[i] >= 0) vars[i].retract(delta.segment(offset_[i], vars[i].dim()));
    }
    int off = reduced_dim_;
    for (const LandmarkSystem& lm : landmarks_) {
      Variable& v = vars[lm.var];
      v.retract(delta.segment(off, v.dim()));
      off += v.dim();
    }
  }

  int total_dim() const {
    int n = reduced_dim_;
    for (const LandmarkSystem& lm : landmarks_) n += problem_.variable(lm.var).dim();
    return n;
  }

 private:
  static constexpr double kMinDiagonal = 1e-9;

  static void add_coupling(LandmarkSystem& lm, VariableId var, const Eigen::MatrixXd& block) {
    for (Coupling& c : lm.couplings) {
      if (c.var == var) {
        c.block += block;
        return;
      }
    }
    lm.couplings.push_back({var, block});
  }

  void schur_update(const LandmarkSystem& lm, Eigen::MatrixXd& S, Eigen::VectorXd& rhs) const {
    for (const Coupling& ca : lm.couplings) {
      const int oa = offset_[ca.var];
      const Eigen::MatrixXd tmp = ca.block * lm.H_inv;
      rhs.segment(oa, ca.block.rows()).noalias() -= tmp * lm.b;
      for (const Coupling& cb : lm.couplings) {
        const int ob = offset_[cb.var];
        S.block(oa, ob, ca.block.rows(), cb.block.rows()).noalias() -= tmp * cb.block.transpose();
      }
    }
  }

  const Problem& problem_;
  std::vector<int> offset_;
  std::vector<int> landmark_;
  int reduced_dim_{0};
  std::vector<LandmarkSystem> landmarks_;
  std::vector<std::vector<Eigen::MatrixXd>> jacobians_;
  Eigen::MatrixXd H_;
  Eigen::VectorXd b_;
};

}  // namespace

SolveReport solve(Problem& problem, const SolveOptions& options) {
  if (problem.num_free_variables() == 0) {
    throw Error(ErrorCode::SingularNormalEquations, "problem has no free variables");
  }
  NormalEquations system(problem);
  SolveReport report;

  double cost = system.build(options.huber_delta);
  report.initial_cost = cost;
  report.final_cost = cost;
  if (options.check_singularity && system.is_singular(options.singular_threshold)) {
    throw Error(ErrorCode::SingularNormalEquations, "normal equations are rank deficient; fix the gauge");
  }
  if (cost <= 0.0) {
    report.termination = Termination::Converged;
    return report;
  }

  double lambda = options.initial_lambda;
  bool need_build = false;
  Eigen::VectorXd delta;
  report.termination = Termination::MaxIterations;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (need_build) {
      cost = system.build(options.huber_delta);
      need_build = false;
    }
    report.iterations = iter + 1;

    double predicted = 0.0;
    const bool ok = system.solve_step(lambda, delta, predicted);
    if (!ok) {
      lambda *= options.lambda_up;
      report.cost_trace.push_back(cost);
      continue;
    }

    const std::vector<Variable> backup = problem.variables();
    system.apply(problem, delta);
    double new_cost = 0.0;
    bool evaluated = true;
    try {
      new_cost = evaluate_cost(problem, options.huber_delta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BehindCamera && e.code() != ErrorCode::AngleNearPi) throw;
      evaluated = false;
    }

    if (evaluated && std::isfinite(new_cost) && new_cost < cost) {
      const double rel_decrease = (cost - new_cost) / cost;
      const double gain_ratio = predicted > 0 ? (cost - new_cost) / predicted : 0.0;
      cost = new_cost;
      report.cost_trace.push_back(cost);
      need_build = true;
      if (gain_ratio > 0.75) {
        lambda = std::max(lambda * options.lambda_down, 1e-12);
      } else if (gain_ratio < 0.25) {
        lambda *= options.lambda_up;
      }
      if (rel_decrease < options.tolerance || cost == 0.0) {
        report.termination = Termination::Converged;
        break;
      }
    } else {
      problem.variables() = backup;
      report.cost_trace.push_back(cost);
      // The local model promises nothing measurable: we are at the minimum.
      if (evaluated && predicted >= 0 && predicted < options.tolerance * cost) {
        report.termination = Termination::Converged;
        break;
      }
      lambda *= options.lambda_up;
      if (lambda > 1e12) {
        report.termination = Termination::Stalled;
        break;
      }
    }
  }
  report.final_cost = cost;
  return report;
}

}  // namespace vio
