#pragma once

#include "mfglm/core.hpp"
#include "mfglm/mem.hpp"
#include "mfglm/sample.hpp"

namespace mfglm::pace {

/// Smoothed mean, covariance eigensystem and white-noise variance of a set
/// of curves observed on a common grid.
struct FpcaModel {
    Vector grid;            // T time points
    Vector mean_curve;      // T
    Matrix eigenfunctions;  // T x K, orthonormal under the grid quadrature weights
    Vector eigenvalues;     // K, non-increasing
    double noise_var = 0.0;
    double fve_target = 0.99;
    double mean_bandwidth = 0.0;
    double cov_bandwidth = 0.0;

    int components() const { return static_cast<int>(eigenvalues.size()); }
};

struct FpcaOptions {
    double fve_target = 0.99;
    /// Candidate bandwidths as fractions of the grid range; GCV picks one
    /// for the mean and one for the covariance surface.
    std::vector<double> bandwidth_fractions{0.05, 0.1, 0.2};
};

/// curves is n x T with NaN for missing entries; needs n >= 5.
FpcaModel fit_fpca(const Matrix& curves, const FunctionalGrid& grid, const FpcaOptions& options = {});

struct Scores {
    Vector xi;
    bool ridged = false;  // Sigma_W needed the 1e-8 trace/T ridge
};

/// Conditional-expectation scores Lambda Phi' Sigma_W^{-1} (w - mu) over the
/// observed entries of w, with Sigma_W = Phi Lambda Phi' + sigma^2 I.
Scores pace_scores(const FpcaModel& model, const Vector& curve);

/// mu + Phi xi for every row of curves.
Matrix pace_predict(const FpcaModel& model, const Matrix& curves);

/// Per-subject replicate mean of log(W + 1), the PACE input scale.
Matrix log_mean_curves(const SurrogateArray& W);

mem::ReconstructedCovariate pace_reconstruct(const SurrogateArray& W, const FunctionalGrid& grid,
                                             const FpcaOptions& options = {});

namespace detail {
/// Local-linear smoother with a Gaussian kernel on a grid; NaN in y is
/// skipped. Returns fitted values at every grid point and the GCV score.
std::pair<Vector, double> local_linear(const Vector& x, const Vector& y, double bandwidth);
}  // namespace detail

}  // namespace mfglm::pace
