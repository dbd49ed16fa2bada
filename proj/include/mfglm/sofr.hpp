#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfglm/core.hpp"
#include "mfglm/mem.hpp"

namespace mfglm::sofr {

/// B-spline basis on [0, 1] with an open-uniform (clamped) knot vector,
/// evaluated on a grid.
struct SplineBasis {
    int degree = 3;
    int size = 0;                 // K_n
    std::vector<double> knots;    // full knot vector, degree + 1 copies at each end
    Matrix evaluation;            // T x K_n

    std::vector<double> interior_knots() const;
};

SplineBasis build_basis(const FunctionalGrid& grid, int K_n = 15, int degree = 3);

/// Value of every basis function at one t in [0, 1].
Vector evaluate_basis(const SplineBasis& basis, double t);

/// (i, k) = integral of Xhat_i(t) b_k(t) dt by the trapezoidal rule.
Matrix functional_design(const Matrix& Xhat, const SplineBasis& basis, const FunctionalGrid& grid);

struct LogisticOptions {
    double score_tolerance = 1e-8;
    double deviance_tolerance = 1e-10;  // relative change
    int max_iterations = 100;
    double separation_bound = 30.0;
};

/// Logistic fit of Y on [1, Z, design]; coefficients are stored in that order.
struct LogisticFit {
    Vector coef;
    Matrix vcov;
    std::vector<std::string> names;
    double loglik = 0.0;
    double deviance = 0.0;
    bool converged = false;
    bool separated = false;
    int iterations = 0;
    /// Log-likelihood after each accepted iteration (index 0 is the start).
    std::vector<double> loglik_path;
};

LogisticFit fit_logistic(const Matrix& design, const Matrix& Z, const Vector& Y,
                         const std::optional<Vector>& weights = std::nullopt, const LogisticOptions& options = {},
                         const std::vector<std::string>& z_names = {});

/// Weighted Bernoulli log-likelihood of [1, Z, design] coef.
double logistic_loglik(const Matrix& design, const Matrix& Z, const Vector& Y, const std::optional<Vector>& weights,
                       const Vector& coef);

/// Score vector of logistic_loglik.
Vector logistic_score(const Matrix& design, const Matrix& Z, const Vector& Y, const std::optional<Vector>& weights,
                      const Vector& coef);

/// Stage-two fit for one reconstruction.
struct SofrFit {
    mem::Method method = mem::Method::Oracle;
    SplineBasis basis;
    Vector omega;       // K_n spline coefficients
    double intercept = 0.0;
    Vector alpha;       // coefficients of the error-free covariates
    Vector beta_curve;  // basis.evaluation * omega
    Matrix vcov;        // over (intercept, alpha, omega)
    std::vector<std::string> names;
    int omega_rank = 0;  // identifiable dimension of omega; below K_n for low-rank curves
    bool converged = false;
    bool separated = false;
    int iterations = 0;
    double loglik = 0.0;

    /// Point-wise standard error of beta_hat(t) from vcov.
    Vector beta_se() const;
};

SofrFit estimate(const mem::ReconstructedCovariate& reconstruction, const Matrix& Z, const Vector& Y,
                 const FunctionalGrid& grid, int K_n = 15, const std::optional<Vector>& weights = std::nullopt,
                 const std::vector<std::string>& z_names = {}, int degree = 3);

}  // namespace mfglm::sofr
