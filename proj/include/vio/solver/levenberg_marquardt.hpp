#pragma once

#include <string_view>
#include <vector>

#include "vio/solver/problem.hpp"

namespace vio {

struct SolveOptions {
  int max_iterations{20};
  double tolerance{1e-8};        // relative cost decrease that counts as converged
  double initial_lambda{1e-4};
  double lambda_up{10.0};
  double lambda_down{0.5};
  double huber_delta{0.0};       // 0 disables the robust loss
  bool check_singularity{true};  // rank test of the undamped reduced system
  double singular_threshold{1e-12};
};

enum class Termination { Converged, MaxIterations, Stalled };

constexpr std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Converged: return "converged";
    case Termination::MaxIterations: return "max-iter";
    case Termination::Stalled: return "stalled";
  }
  return "unknown";
}

struct SolveReport {
  double initial_cost{0};
  double final_cost{0};
  int iterations{0};
  Termination termination{Termination::Converged};
  std::vector<double> cost_trace;  // cost after every iteration, accepted or not
};

/**
 * Levenberg-Marquardt over manifold variables.
 *
 * Eliminated (landmark) variables are removed with a Schur complement and the
 * reduced system is solved with a dense Cholesky factorization. Variables are
 * updated in place; rejected steps leave them untouched.
 *
 * Throws SingularNormalEquations when the undamped reduced system is rank
 * deficient (missing gauge fix) and NumericalFailure on non-finite costs.
 */
SolveReport solve(Problem& problem, const SolveOptions& options = {});

}  // namespace vio
