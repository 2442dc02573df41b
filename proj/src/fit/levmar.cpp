#include "qgprobe/fit/levmar.hpp"

#include <cmath>
#include <limits>

#include "qgprobe/error.hpp"

namespace qgprobe::fit {

namespace {

void numeric_jacobian(const LeastSquaresProblem& prob, const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
  const Eigen::Index n = p.size();
  jac.resize(prob.n_residuals, n);
  Eigen::VectorXd plus(prob.n_residuals), minus(prob.n_residuals);
  Eigen::VectorXd q = p;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 1e-6 * (std::abs(p(j)) + 1e-6);
    q(j) = p(j) + h;
    prob.residuals(q, plus);
    q(j) = p(j) - h;
    prob.residuals(q, minus);
    q(j) = p(j);
    jac.col(j) = (plus - minus) / (2.0 * h);
  }
}

}  // namespace

Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jac, double residual_variance) {
  // Columns are equilibrated first; parameters can differ by many decades in scale.
  Eigen::VectorXd d = jac.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) > 0.0 ? 1.0 / d(i) : 0.0;
  const Eigen::MatrixXd js = jac * d.asDiagonal();
  const Eigen::MatrixXd jtj = js.transpose() * js;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jtj, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = (s.size() > 0 ? s(0) : 0.0) * 1e-14;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  const Eigen::MatrixXd cs = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  return residual_variance * d.asDiagonal() * cs * d.asDiagonal();
}

LmResult levenberg_marquardt(const LeastSquaresProblem& prob, Eigen::VectorXd x, const LmOptions& opt) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = prob.n_residuals;
  if (m < n) throw Error(ErrorCode::InsufficientData, "fewer residuals than parameters");

  auto jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
    if (prob.jacobian) prob.jacobian(p, jac);
    else numeric_jacobian(prob, p, jac);
  };

  Eigen::VectorXd r(m), r_trial(m);
  Eigen::MatrixXd jac(m, n);
  prob.residuals(x, r);
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw Error(ErrorCode::FitDiverged, "non-finite residuals at the initial guess");

  LmResult out;
  double lambda = opt.initial_lambda;
  jacobian(x, jac);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.cwiseAbs().maxCoeff() == 0.0) {
      out.converged = true;
      out.stop_reason = "zero gradient";
      break;
    }
    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::MatrixXd a = jtj;
      const double floor = 1e-12 * jtj.diagonal().maxCoeff();
      for (Eigen::Index j = 0; j < n; ++j) a(j, j) += lambda * std::max(jtj(j, j), floor);
      const Eigen::VectorXd step = a.ldlt().solve(-grad);
      const Eigen::VectorXd x_trial = x + step;
      prob.residuals(x_trial, r_trial);
      const double trial_cost = r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double drop = (cost - trial_cost) / cost;
        bool small_step = true;
        for (Eigen::Index j = 0; j < n; ++j)
          if (std::abs(step(j)) > opt.step_tolerance * (std::abs(x(j)) + 1e-12)) small_step = false;
        x = x_trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-15);
        accepted = true;
        if (drop < opt.relative_cost_tolerance || small_step) {
          out.converged = true;
          out.stop_reason = small_step ? "step tolerance" : "cost tolerance";
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // no downhill step at any damping: x is a (numerical) minimum
      out.converged = true;
      out.stop_reason = "no further decrease";
      break;
    }
    jacobian(x, jac);
    if (out.converged) break;
  }
  if (!out.converged) out.stop_reason = "iteration limit";

  out.params = x;
  out.cost = cost;
  out.iterations = it;
  out.dof = m - n;
  out.residual_variance = out.dof > 0 ? cost / static_cast<double>(out.dof) : 0.0;
  out.covariance = covariance_from_jacobian(jac, out.residual_variance);
  if (!x.allFinite()) throw Error(ErrorCode::FitDiverged, "parameters became non-finite");
  return out;
}

LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs) {
  if (design.rows() < design.cols()) throw Error(ErrorCode::InsufficientData, "underdetermined linear fit");
  LinearFit out;
  out.params = design.colPivHouseholderQr().solve(rhs);
  out.cost = (design * out.params - rhs).squaredNorm();
  const Eigen::Index dof = design.rows() - design.cols();
  out.covariance = covariance_from_jacobian(design, dof > 0 ? out.cost / static_cast<double>(dof) : 0.0);
  return out;
}

}  // namespace qgprobe::fit
