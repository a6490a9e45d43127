#include "spsqkd/curvefit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spsqkd::fit {

namespace {

double finite_diff_step(double value) {
    return 1e-6 * std::max(std::abs(value), 1.0);
}

Eigen::MatrixXd jacobian(const ResidualFn& fn, std::span<const double> params,
                         std::size_t m) {
    const std::size_t p = params.size();
    Eigen::MatrixXd jac(m, p);
    std::vector<double> theta(params.begin(), params.end());
    std::vector<double> r_plus(m), r_minus(m);
    for (std::size_t j = 0; j < p; ++j) {
        const double h = finite_diff_step(theta[j]);
        const double saved = theta[j];
        theta[j] = saved + h;
        fn(theta, r_plus);
        theta[j] = saved - h;
        fn(theta, r_minus);
        theta[j] = saved;
        for (std::size_t i = 0; i < m; ++i) {
            jac(i, j) = (r_plus[i] - r_minus[i]) / (2.0 * h);
        }
    }
    return jac;
}

}  // namespace

Result levenberg_marquardt(const ResidualFn& fn, std::size_t residual_count,
                           std::vector<double> initial, const Options& opts) {
    if (initial.empty()) throw std::invalid_argument("no parameters to fit");
    if (residual_count == 0) throw std::invalid_argument("no residuals to fit");

    const std::size_t m = residual_count;
    const std::size_t p = initial.size();

    std::vector<double> theta = std::move(initial);
    std::vector<double> resid(m), trial_resid(m);
    fn(theta, resid);
    double cost = Eigen::Map<const Eigen::VectorXd>(resid.data(), m).squaredNorm();
    if (!std::isfinite(cost)) {
        throw std::invalid_argument("residuals are not finite at the initial guess");
    }

    double lambda = opts.initial_damping;
    Result out;
    out.converged = false;

    int iter = 0;
    for (; iter < opts.max_iterations; ++iter) {
        const Eigen::MatrixXd jac = jacobian(fn, theta, m);
        const Eigen::Map<const Eigen::VectorXd> r(resid.data(), m);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;  // gradient of 0.5 sum r^2

        // Primary stop: the gradient has vanished relative to the residual.
        if (jtr.norm() <= 1e-7 * std::max(1.0, std::sqrt(cost))) {
            out.converged = true;
            break;
        }

        // Marquardt scaling keeps the damping meaningful across parameter
        // magnitudes; the floor guards parameters the data cannot see.
        const double diag_floor = 1e-12 * jtj.diagonal().maxCoeff() + 1e-300;
        bool accepted = false;
        bool tiny_step = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            const double lambda_used = lambda;
            Eigen::MatrixXd damped = jtj;
            for (std::size_t j = 0; j < p; ++j) {
                damped(j, j) += lambda_used * std::max(jtj(j, j), diag_floor);
            }
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }

            std::vector<double> trial(theta);
            for (std::size_t j = 0; j < p; ++j) trial[j] += step[j];
            fn(trial, trial_resid);
            const double trial_cost =
                Eigen::Map<const Eigen::VectorXd>(trial_resid.data(), m).squaredNorm();

            if (std::isfinite(trial_cost) && trial_cost < cost) {
                double rel_step = 0.0;
                for (std::size_t j = 0; j < p; ++j) {
                    rel_step = std::max(rel_step, std::abs(step[j]) /
                                                      std::max(std::abs(trial[j]), 1.0));
                }
                theta = std::move(trial);
                resid.swap(trial_resid);
                cost = trial_cost;
                accepted = true;
                lambda = std::max(lambda * 0.25, 1e-14);
                // An essentially undamped Gauss-Newton step that no longer
                // moves the parameters: polishing is done.
                tiny_step = rel_step < opts.step_tol && lambda_used <= 1e-10;
            } else {
                lambda *= 10.0;
            }
        }
        if (!accepted || tiny_step) {
            // No strictly better point at any damping level (or progress is at
            // roundoff scale): this is the numerical optimum.
            out.converged = true;
            ++iter;
            break;
        }
    }

    // Gradient polish: with stiff or nearly degenerate curvature the
    // attainable cost improvement falls below the cost's own ulp long before
    // the gradient vanishes, so cost-based acceptance saturates early. Take
    // damped Gauss-Newton steps accepted on gradient-norm decrease instead,
    // walking the damping up whenever a step overshoots.
    for (int polish = 0; polish < 10; ++polish) {
        const Eigen::MatrixXd jac = jacobian(fn, theta, m);
        const Eigen::Map<const Eigen::VectorXd> r(resid.data(), m);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        const double gnorm = jtr.norm();
        if (gnorm <= 1e-9 * std::sqrt(cost)) break;

        const double diag_floor = 1e-12 * jtj.diagonal().maxCoeff() + 1e-300;
        bool improved = false;
        for (double lp = 1e-12; lp <= 1.0 && !improved; lp *= 100.0) {
            Eigen::MatrixXd damped = jtj;
            for (std::size_t j = 0; j < p; ++j) {
                damped(j, j) += lp * std::max(jtj(j, j), diag_floor);
            }
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            if (!step.allFinite()) continue;

            std::vector<double> trial(theta);
            for (std::size_t j = 0; j < p; ++j) trial[j] += step[j];
            fn(trial, trial_resid);
            const double trial_cost =
                Eigen::Map<const Eigen::VectorXd>(trial_resid.data(), m).squaredNorm();
            if (!std::isfinite(trial_cost) || trial_cost > cost * (1.0 + 1e-9)) continue;

            const Eigen::MatrixXd jac_t = jacobian(fn, trial, m);
            const Eigen::VectorXd jtr_t =
                jac_t.transpose() * Eigen::Map<const Eigen::VectorXd>(trial_resid.data(), m);
            if (jtr_t.norm() >= 0.9 * gnorm) continue;

            theta = std::move(trial);
            resid.swap(trial_resid);
            cost = trial_cost;
            improved = true;
        }
        if (!improved) break;
    }

    out.params = theta;
    out.iterations = iter;
    out.residual_norm = std::sqrt(cost);

    if (m > p) {
        const Eigen::MatrixXd jac = jacobian(fn, theta, m);
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const double s2 = cost / static_cast<double>(m - p);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
        if (lu.isInvertible()) {
            const Eigen::MatrixXd cov = lu.inverse() * s2;
            out.covariance.resize(p * p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) out.covariance[i * p + j] = cov(i, j);
        }
    }
    return out;
}

}  // namespace spsqkd::fit
