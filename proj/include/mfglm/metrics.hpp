#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfglm/core.hpp"

namespace mfglm::metrics {

/// Grid average of the squared point-wise bias of the replicate mean;
/// curves is R x n_grid.
double abias2(const Matrix& curves, const Vector& truth);

/// (1/R) sum_r (1/n_grid) sum_l (beta_r(t_l) - beta_bar(t_l))^2.
double avar(const Matrix& curves);

/// abias2 + avar, computed as exactly that sum.
double aimse(const Matrix& curves, const Vector& truth);

/// Monte Carlo standard error of abias2, by the delta method on the
/// replicate mean (0 when R < 2).
double abias2_se(const Matrix& curves, const Vector& truth);

/// Spread of one reconstruction: variance across subjects (divisor n) at
/// each grid point, averaged over the grid.
double covariate_spread(const Matrix& Xhat);

/// Mean of covariate_spread over replicate reconstructions.
double covariate_avar(const std::vector<Matrix>& reconstructions);

/// Spearman rank correlation (average ranks for ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct ScenarioEcho {
    int n = 0, T = 0, J = 0, D = 0, R = 0, K_n = 0;
    double sigma_x = 0.0, rho_x = 0.0;
    std::uint64_t seed = 0;
};

struct MetricRow {
    std::string estimator;
    double abias2 = 0.0;
    double avar = 0.0;
    double aimse = 0.0;
    double cov_avar = 0.0;
    double abias2_se = 0.0;
    int replicates = 0;  // replicates that entered the metrics
    int failures = 0;    // replicates excluded after a failed fit
};

struct MetricReport {
    ScenarioEcho scenario;
    std::vector<MetricRow> rows;

    const MetricRow& row(const std::string& estimator) const;
};

/// Row for one estimator from its replicate beta curves and per-replicate
/// covariate spreads.
MetricRow summarize(const std::string& estimator, const Matrix& curves, const Vector& truth,
                    const std::vector<double>& spreads, int failures = 0);

}  // namespace mfglm::metrics
