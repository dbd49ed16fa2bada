#pragma once

#include <string>
#include <vector>

#include "mfglm/metrics.hpp"
#include "mfglm/pipeline.hpp"
#include "mfglm/simulate.hpp"

namespace mfglm::benchmark {

struct BenchmarkOptions {
    simulate::ScenarioConfig scenario;  // D here drives MP_MEM
    std::vector<mem::Method> methods = mem::all_methods();
    pipeline::Options pipeline;         // its D is overwritten by scenario.D
    int threads = 1;                    // replicate-level workers
    double max_failure_rate = 0.05;
};

/// Per-estimator outputs kept alongside the metrics.
struct EstimatorRun {
    mem::Method method = mem::Method::Oracle;
    Matrix curves;               // successful replicates x T
    Matrix scalars;              // successful replicates x (1 + p): intercept, alpha
    std::vector<double> spreads;  // covariate_spread per successful replicate
    std::vector<int> failed;      // replicate indices that were excluded
};

struct BenchmarkResult {
    metrics::MetricReport report;
    std::vector<EstimatorRun> runs;  // same order as report.rows
    std::vector<std::string> log;    // one line per failed fit
    bool failure_limit_exceeded = false;

    const EstimatorRun& run(mem::Method method) const;
};

/// Monte Carlo study of one scenario. Every estimator in a replicate sees
/// the same simulated data set, which depends on the seed and replicate
/// index only, so results do not depend on D (except MP_MEM) or on the
/// number of threads.
BenchmarkResult run(const BenchmarkOptions& options);

metrics::ScenarioEcho echo(const BenchmarkOptions& options);

}  // namespace mfglm::benchmark
