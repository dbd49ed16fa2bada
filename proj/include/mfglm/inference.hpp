#pragma once

#include <cstdint>
#include <vector>

#include "mfglm/pipeline.hpp"

namespace mfglm::inference {

/// Point-wise band for beta(t) plus intervals for the scalar coefficients.
struct Bands {
    Vector lower, upper;          // per grid point
    Vector coef_lower, coef_upper;  // per scalar term (intercept, then Z)
    double level = 0.95;
};

struct BootstrapOptions {
    int B = 1000;
    double level = 0.95;
    std::uint64_t seed = 1;
    int threads = 1;
    int max_redraws = 10;
    double max_failure_rate = 0.05;
};

struct BootstrapResult {
    Bands bands;
    Matrix curves;        // successful resamples x T
    Matrix coefficients;  // successful resamples x (1 + p)
    /// Subject indices drawn for each resample (the accepted draw, or the
    /// last attempt when the resample failed).
    std::vector<std::vector<int>> indices;
    std::vector<bool> failed;
    int redraws = 0;
    int failures = 0;
};

/// Cluster bootstrap: resample subjects with replacement and rerun both
/// stages on each resample. Percentile intervals at (1 - level) / 2 and
/// 1 - (1 - level) / 2.
BootstrapResult bootstrap(const MultiLevelSample& sample, mem::Method method, const pipeline::Options& options,
                          const BootstrapOptions& boot);

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double p);

}  // namespace mfglm::inference
