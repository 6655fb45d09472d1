// Small damped least-squares (Levenberg-Marquardt) driver with
// analytically supplied Jacobians.
#pragma once

#include <Eigen/Dense>

#include <functional>

namespace etrap {

struct LevMarResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;  // sigma^2 (J^T J)^-1 at the solution
    double rms_residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Minimize |r(p)|^2. `eval` fills the residual vector and the Jacobian
/// dr/dp for the given parameters.
inline LevMarResult levmar_fit(
    const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)>& eval,
    Eigen::VectorXd p0, int max_iterations = 200, double tolerance = 1e-14) {
    const auto n_params = p0.size();
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    eval(p0, r, jac);
    double chi2 = r.squaredNorm();
    double lambda = 1e-3;

    LevMarResult result;
    result.params = p0;
    for (int it = 0; it < max_iterations; ++it) {
        result.iterations = it + 1;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        Eigen::MatrixXd damped = jtj;
        for (Eigen::Index i = 0; i < n_params; ++i)
            damped(i, i) += lambda * (jtj(i, i) > 0.0 ? jtj(i, i) : 1.0);
        const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
        if (!step.allFinite()) break;

        const Eigen::VectorXd trial = result.params + step;
        Eigen::VectorXd r_trial;
        Eigen::MatrixXd jac_trial;
        eval(trial, r_trial, jac_trial);
        const double chi2_trial = r_trial.squaredNorm();
        if (chi2_trial <= chi2) {
            const double rel_drop = (chi2 - chi2_trial) / (chi2 + 1e-300);
            const double rel_step = step.norm() / (result.params.norm() + 1e-300);
            result.params = trial;
            r = r_trial;
            jac = jac_trial;
            chi2 = chi2_trial;
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel_drop < tolerance || rel_step < tolerance) {
                result.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }

    const auto n = static_cast<double>(r.size());
    const double dof = std::max(n - static_cast<double>(n_params), 1.0);
    const double sigma2 = chi2 / dof;
    // Parameters can differ by many orders of magnitude; normalize the
    // Jacobian columns before inverting so the covariance stays sane.
    Eigen::VectorXd scale(n_params);
    for (Eigen::Index i = 0; i < n_params; ++i) {
        const double norm = jac.col(i).norm();
        scale(i) = norm > 0.0 ? 1.0 / norm : 1.0;
    }
    const Eigen::MatrixXd jtj_scaled =
        scale.asDiagonal() * (jac.transpose() * jac) * scale.asDiagonal();
    const Eigen::MatrixXd inv_scaled =
        jtj_scaled.completeOrthogonalDecomposition().pseudoInverse();
    result.covariance =
        sigma2 * scale.asDiagonal() * inv_scaled * scale.asDiagonal();
    result.rms_residual = std::sqrt(chi2 / std::max(n, 1.0));
    return result;
}

}  // namespace etrap
