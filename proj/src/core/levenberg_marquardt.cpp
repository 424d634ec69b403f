#include "qlink/levenberg_marquardt.hpp"

#include <cmath>
#include <limits>

namespace qlink {

LmOutcome levenberg_marquardt(const ResidualFunction& residuals, Eigen::VectorXd start,
                              const LmSettings& settings, const FeasibleFunction& feasible) {
  LmOutcome out;
  out.params = std::move(start);
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  residuals(out.params, r, &jac);
  out.cost = r.squaredNorm();
  if (!std::isfinite(out.cost)) return out;

  double damping = settings.initial_damping;
  Eigen::VectorXd trial_r;
  for (out.iterations = 0; out.iterations < settings.max_iterations;) {
    ++out.iterations;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (out.cost == 0.0 || grad.lpNorm<Eigen::Infinity>() == 0.0) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double d = jtj(i, i) > 0.0 ? jtj(i, i) : 1.0;
        a(i, i) += damping * d;
      }
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      const Eigen::VectorXd trial = out.params + step;
      bool ok = step.allFinite() && (!feasible || feasible(trial));
      double trial_cost = std::numeric_limits<double>::infinity();
      if (ok) {
        residuals(trial, trial_r, nullptr);
        trial_cost = trial_r.squaredNorm();
        ok = std::isfinite(trial_cost) && trial_cost <= out.cost;
      }
      if (ok) {
        const double decrease = out.cost - trial_cost;
        out.params = trial;
        const double previous = out.cost;
        out.cost = trial_cost;
        damping /= settings.damping_factor;
        accepted = true;
        residuals(out.params, r, &jac);
        if (decrease <= settings.relative_tolerance * previous) out.converged = true;
      } else {
        damping *= settings.damping_factor;
        // No descent at any damping: stationary to working precision.
        if (damping > 1e20) {
          out.converged = true;
          break;
        }
      }
    }
    if (out.converged) break;
  }
  out.normal_matrix = jac.transpose() * jac;
  return out;
}

}  // namespace qlink
