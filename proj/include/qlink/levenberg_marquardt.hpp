#pragma once

#include <Eigen/Dense>
#include <functional>

namespace qlink {

struct LmSettings {
  double initial_damping = 1e-3;
  double damping_factor = 10.0;  // multiply on rejection, divide on acceptance
  int max_iterations = 200;
  double relative_tolerance = 1e-9;  // on the cost decrease of an accepted step
};

struct LmOutcome {
  Eigen::VectorXd params;
  double cost = 0.0;  // sum of squared residuals
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd normal_matrix;  // J^T J at the solution
};

/// Fills residuals r(p) (already weighted) and, when requested, the Jacobian.
using ResidualFunction = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;
/// Optional feasibility test; infeasible trial points count as rejected steps.
using FeasibleFunction = std::function<bool(const Eigen::VectorXd& p)>;

/// Levenberg-Marquardt with Marquardt diagonal scaling.
LmOutcome levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd start,
                              const LmSettings& settings = {}, const FeasibleFunction& feasible = {});

}  // namespace qlink
