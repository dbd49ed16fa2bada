#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mfglm/core.hpp"
#include "mfglm/sample.hpp"

namespace mfglm::glmm {

enum class Family {
    Poisson,   // log link, the measurement model for counts
    Gaussian,  // identity link, used to check shrinkage behaviour
};

/// How the window model codes its per-slot random effects.
enum class WindowCoding {
    /// r0 plus one deviation per slot, all deviations sharing one variance
    /// (the nested subject / subject-by-slot model).
    Nested,
    /// Slot 1 absorbed into r0; deviations only for slots 2..D.
    Reference,
};

struct FitOptions {
    Family family = Family::Poisson;
    WindowCoding coding = WindowCoding::Nested;
    /// Adaptive Gauss-Hermite nodes for the scalar random-intercept model;
    /// 1 means plain Laplace.
    int quadrature_nodes = 7;
    double tolerance = 1e-8;  // relative change of the objective
    int max_iterations = 200;
    double variance_floor = 1e-10;
    /// Rate used for mu when every count is zero: mu = log(degenerate_rate).
    double degenerate_rate = 1e-8;
};

/// Result of one point (D = 1) or window (D >= 2) mixed model.
struct GlmmFit {
    Family family = Family::Poisson;
    int window_size = 1;
    WindowCoding coding = WindowCoding::Nested;
    double mu_hat = 0.0;
    /// Variance of the random intercept, then (D > 1) the shared variance of
    /// the slot deviations; Gaussian fits append the residual variance.
    std::vector<double> var_components;
    /// Column 0 holds r0_i. Nested windows add D columns, one per slot;
    /// reference-coded windows add D - 1 columns for slots 2..D.
    Matrix rand_effects;
    bool converged = false;
    bool degenerate = false;
    int iterations = 0;
    double loglik = 0.0;

    double tau_intercept() const { return std::sqrt(var_components.at(0)); }
    int subjects() const { return static_cast<int>(rand_effects.rows()); }
};

/// Random-intercept model log E[W_ij] = mu + r_i, r_i ~ N(0, tau^2), fitted
/// on an n x J matrix of counts (NaN = missing). Laplace start, refined by
/// adaptive Gauss-Hermite quadrature. r_i are posterior modes.
GlmmFit fit_pointwise(const Matrix& counts, const std::optional<Vector>& weights = std::nullopt,
                      const FitOptions& options = {});

/// Window model log E[W_ijd] = mu + r0_i + r_d,i on an n x J x D array of
/// counts; the slot effects share one variance. With reference coding slot 1
/// has no r_d. Laplace approximation.
GlmmFit fit_window(const SurrogateArray& counts, const std::optional<Vector>& weights = std::nullopt,
                   const FitOptions& options = {});

/// mu + r0_i + r_slot,i (when the slot has an effect), i.e. X_hat at that slot.
double predict_x(const GlmmFit& fit, int subject, int slot = 0);

/// Laplace / AGHQ marginal log-likelihood of the window model at the given
/// parameters (mu, tau0[, tau1]), up to the count-factorial constant.
/// Exposed for optimality checks.
double marginal_loglik(const SurrogateArray& counts, const std::optional<Vector>& weights,
                       const Vector& params, int quadrature_nodes,
                       WindowCoding coding = WindowCoding::Nested);

/// Gauss-Hermite rule for weight exp(-x^2): (nodes, weights).
std::pair<Vector, Vector> gauss_hermite(int nodes);

namespace detail {
/// fit_window without the D >= 2 contract; with D = 1 it is the same code
/// path fit_pointwise takes.
GlmmFit fit_window_any(const SurrogateArray& counts, const std::optional<Vector>& weights,
                       const FitOptions& options);

/// Laplace objective with its analytic gradient, for derivative checks.
double laplace_loglik_with_gradient(const SurrogateArray& counts, const std::optional<Vector>& weights,
                                    const Vector& params, Vector& gradient,
                                    WindowCoding coding = WindowCoding::Nested);
}  // namespace detail

}  // namespace mfglm::glmm
