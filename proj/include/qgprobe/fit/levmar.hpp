#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace qgprobe::fit {

/// Nonlinear least-squares problem min_p sum_i r_i(p)^2.
struct LeastSquaresProblem {
  Eigen::Index n_residuals = 0;
  std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)> residuals;
  /// Optional analytic Jacobian dr/dp; central differences are used when empty.
  std::function<void(const Eigen::VectorXd& p, Eigen::MatrixXd& jac)> jacobian;
};

struct LmOptions {
  int max_iterations = 400;
  double initial_lambda = 1e-3;
  /// Stop when an accepted step reduces the cost by less than this fraction.
  double relative_cost_tolerance = 1e-15;
  /// Stop when every |step_i| <= step_tolerance * (|p_i| + 1e-12).
  double step_tolerance = 1e-13;
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // sigma^2 (J^T J)^+ with sigma^2 = cost / dof
  double cost = 0.0;           // sum of squared residuals
  double residual_variance = 0.0;
  Eigen::Index dof = 0;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

LmResult levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd x0, const LmOptions& options = {});

/// sigma^2 (J^T J)^+ via SVD, zeroing singular directions.
Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jac, double residual_variance);

/// Solves min |A x - b|^2 and returns x with covariance sigma^2 (A^T A)^-1, sigma^2 from the residuals.
struct LinearFit {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double cost = 0.0;
};
LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs);

}  // namespace qgprobe::fit
