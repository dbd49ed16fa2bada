#pragma once

// Small-dimension maximizer shared by the mixed-model fits: damped Newton
// with central finite-difference derivatives and an eigenvalue-modified
// Hessian. Intended for 2-4 parameters with a smooth objective.

#include <Eigen/Dense>

#include <cmath>
#include <functional>

namespace mfglm::detail {

struct MaximizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct MaximizeOptions {
    double tolerance = 1e-8;  // relative objective change
    int max_iterations = 200;
    double fd_step = 1e-4;
};

template <class F>
void fd_derivatives(F& f, const Eigen::VectorXd& x, double fx, double step, Eigen::VectorXd& grad,
                    Eigen::MatrixXd& hess) {
    const auto p = x.size();
    grad.resize(p);
    hess.resize(p, p);
    Eigen::VectorXd h(p);
    for (Eigen::Index k = 0; k < p; ++k) h[k] = step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd plus(p), minus(p);
    Eigen::VectorXd y = x;
    for (Eigen::Index k = 0; k < p; ++k) {
        y[k] = x[k] + h[k];
        plus[k] = f(y);
        y[k] = x[k] - h[k];
        minus[k] = f(y);
        y[k] = x[k];
        grad[k] = (plus[k] - minus[k]) / (2.0 * h[k]);
        hess(k, k) = (plus[k] - 2.0 * fx + minus[k]) / (h[k] * h[k]);
    }
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = a + 1; b < p; ++b) {
            y = x;
            y[a] += h[a];
            y[b] += h[b];
            const double fpp = f(y);
            y[b] = x[b] - h[b];
            const double fpm = f(y);
            y[a] = x[a] - h[a];
            const double fmm = f(y);
            y[b] = x[b] + h[b];
            const double fmp = f(y);
            hess(a, b) = hess(b, a) = (fpp - fpm - fmp + fmm) / (4.0 * h[a] * h[b]);
        }
    }
}

/// Maximizes f starting from x0.
template <class F>
MaximizeResult maximize(F&& f, Eigen::VectorXd x0, const MaximizeOptions& opt = {}) {
    MaximizeResult res;
    res.x = std::move(x0);
    res.value = f(res.x);
    if (!std::isfinite(res.value)) return res;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
    const auto p = res.x.size();
    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        fd_derivatives(f, res.x, res.value, opt.fd_step, grad, hess);
        // Newton direction on the negated Hessian with eigenvalues floored
        // to keep the direction ascending.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-0.5 * (hess + hess.transpose()));
        Eigen::VectorXd ev = eig.eigenvalues();
        const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index k = 0; k < p; ++k) ev[k] = std::max(std::abs(ev[k]), 1e-8 * top);
        const Eigen::MatrixXd& V = eig.eigenvectors();
        Eigen::VectorXd dir = V * (V.transpose() * grad).cwiseQuotient(ev);

        double t = 1.0;
        double trial_value = -INFINITY;
        Eigen::VectorXd trial;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
            trial = res.x + t * dir;
            trial_value = f(trial);
            if (std::isfinite(trial_value) && trial_value >= res.value) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            // No ascent along the Newton direction: at an optimum up to
            // finite-difference noise.
            res.converged = grad.cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + std::abs(res.value));
            return res;
        }
        const double change = trial_value - res.value;
        const double step = (trial - res.x).cwiseAbs().maxCoeff();
        res.x = trial;
        res.value = trial_value;
        if (change <= opt.tolerance * (1.0 + std::abs(res.value)) &&
            step <= std::sqrt(opt.tolerance) * (1.0 + res.x.cwiseAbs().maxCoeff())) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

}  // namespace mfglm::detail

namespace mfglm::detail {

/// Quasi-Newton (BFGS) maximizer for objectives with an analytic gradient:
/// fg(x, grad) returns f(x) and fills grad. The inverse Hessian is seeded
/// from a forward-difference Hessian of the gradient.
template <class FG>
MaximizeResult maximize_bfgs(FG&& fg, Eigen::VectorXd x0, const MaximizeOptions& opt = {}) {
    MaximizeResult res;
    res.x = std::move(x0);
    const auto p = res.x.size();
    Eigen::VectorXd g(p), g_new(p), g_tmp(p);
    res.value = fg(res.x, g);
    if (!std::isfinite(res.value) || !g.allFinite()) return res;

    auto seed_inverse = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& gx) {
        Eigen::MatrixXd H(p, p);
        Eigen::VectorXd y = x;
        for (Eigen::Index k = 0; k < p; ++k) {
            const double h = opt.fd_step * std::max(1.0, std::abs(x[k]));
            y[k] = x[k] + h;
            fg(y, g_tmp);
            y[k] = x[k];
            H.col(k) = (g_tmp - gx) / h;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-0.5 * (H + H.transpose()));
        Eigen::VectorXd ev = eig.eigenvalues();
        const double top = std::max(ev.cwiseAbs().maxCoeff(), 1e-12);
        for (Eigen::Index k = 0; k < p; ++k) ev[k] = std::max(std::abs(ev[k]), 1e-8 * top);
        const Eigen::MatrixXd& V = eig.eigenvectors();
        return Eigen::MatrixXd(V * ev.cwiseInverse().asDiagonal() * V.transpose());
    };

    Eigen::MatrixXd Hinv = seed_inverse(res.x, g);
    int since_seed = 0;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        Eigen::VectorXd dir = Hinv * g;
        double slope = g.dot(dir);
        if (!(slope > 0.0)) {
            Hinv = seed_inverse(res.x, g);
            since_seed = 0;
            dir = Hinv * g;
            slope = g.dot(dir);
        }
        if (slope <= 1e-4 * opt.tolerance * (1.0 + std::abs(res.value))) {
            res.converged = true;
            return res;
        }
        double t = 1.0;
        Eigen::VectorXd trial;
        double trial_value = -INFINITY;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, t *= 0.5) {
            trial = res.x + t * dir;
            trial_value = fg(trial, g_new);
            if (std::isfinite(trial_value) && trial_value >= res.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (since_seed > 0) {
                Hinv = seed_inverse(res.x, g);
                since_seed = 0;
                continue;
            }
            res.converged = g.cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + std::abs(res.value));
            return res;
        }
        const Eigen::VectorXd s = trial - res.x;
        const Eigen::VectorXd y = g - g_new;  // gradient change of -f
        const double change = trial_value - res.value;
        res.x = trial;
        res.value = trial_value;
        g = g_new;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double r = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(p, p);
            Hinv = (I - r * s * y.transpose()) * Hinv * (I - r * y * s.transpose()) + r * s * s.transpose();
        }
        ++since_seed;
        const double decrement = g.dot(Hinv * g);
        if (change <= opt.tolerance * (1.0 + std::abs(res.value)) &&
            decrement <= 2.0 * opt.tolerance * (1.0 + std::abs(res.value))) {
            res.converged = true;
            return res;
        }
    }
    return res;
}

}  // namespace mfglm::detail
