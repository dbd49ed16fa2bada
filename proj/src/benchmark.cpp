#include "mfglm/benchmark.hpp"

#include <limits>
#include <optional>

#include "mfglm/parallel.hpp"

namespace mfglm::benchmark {

const EstimatorRun& BenchmarkResult::run(mem::Method method) const {
    for (const auto& r : runs)
        if (r.method == method) return r;
    throw InvalidArgument("benchmark result has no run for " + std::string(mem::to_string(method)));
}

metrics::ScenarioEcho echo(const BenchmarkOptions& options) {
    const auto& s = options.scenario;
    metrics::ScenarioEcho e;
    e.n = s.n;
    e.T = s.T;
    e.J = s.J;
    e.D = s.D;
    e.R = s.R;
    e.K_n = options.pipeline.K_n;
    e.sigma_x = s.sigma_x;
    e.rho_x = s.rho_x;
    e.seed = s.seed;
    return e;
}

namespace {

struct Outcome {
    std::optional<sofr::SofrFit> fit;
    double spread = 0.0;
    std::string error;
};

}  // namespace

BenchmarkResult run(const BenchmarkOptions& options) {
    options.scenario.validate();
    if (options.methods.empty()) throw InvalidArgument("benchmark: no estimators requested");
    const int R = options.scenario.R;
    const int M = static_cast<int>(options.methods.size());

    pipeline::Options pipe = options.pipeline;
    pipe.D = options.scenario.D;
    pipe.reconstruct.threads = 1;

    // outcomes[r * M + m]
    std::vector<Outcome> outcomes(static_cast<std::size_t>(R) * static_cast<std::size_t>(M));
    parallel_for(R, options.threads, [&](int r) {
        const auto data = simulate::make_dataset(options.scenario, r);
        const auto sample = data.to_sample();
        for (int m = 0; m < M; ++m) {
            auto& out = outcomes[static_cast<std::size_t>(r * M + m)];
            try {
                const auto rc = pipeline::reconstruct(sample, options.methods[static_cast<std::size_t>(m)], pipe);
                out.spread = metrics::covariate_spread(rc.values);
                out.fit = sofr::estimate(rc, sample.Z, sample.Y, sample.grid, pipe.K_n, sample.weights,
                                         sample.covariate_names, pipe.degree);
            } catch (const DataError& e) {
                out.error = e.what();
            } catch (const NumericalError& e) {
                out.error = e.what();
            }
        }
    });

    BenchmarkResult result;
    result.report.scenario = echo(options);
    const auto grid = FunctionalGrid::uniform(options.scenario.T);
    const Vector truth = simulate::true_beta(grid);
    for (int m = 0; m < M; ++m) {
        EstimatorRun run;
        run.method = options.methods[static_cast<std::size_t>(m)];
        const std::string name(mem::to_string(run.method));
        std::vector<const sofr::SofrFit*> fits;
        for (int r = 0; r < R; ++r) {
            const auto& o = outcomes[static_cast<std::size_t>(r * M + m)];
            if (o.fit) {
                fits.push_back(&*o.fit);
                run.spreads.push_back(o.spread);
            } else {
                run.failed.push_back(r);
                result.log.push_back(name + " replicate " + std::to_string(r) + ": " + o.error);
            }
        }
        const int ok = static_cast<int>(fits.size());
        const int p = ok > 0 ? static_cast<int>(fits[0]->alpha.size()) : 0;
        run.curves.resize(ok, options.scenario.T);
        run.scalars.resize(ok, 1 + p);
        for (int k = 0; k < ok; ++k) {
            run.curves.row(k) = fits[static_cast<std::size_t>(k)]->beta_curve.transpose();
            run.scalars(k, 0) = fits[static_cast<std::size_t>(k)]->intercept;
            run.scalars.row(k).tail(p) = fits[static_cast<std::size_t>(k)]->alpha.transpose();
        }
        const int failures = static_cast<int>(run.failed.size());
        if (failures > options.max_failure_rate * R) result.failure_limit_exceeded = true;
        if (ok > 0) {
            result.report.rows.push_back(metrics::summarize(name, run.curves, truth, run.spreads, failures));
        } else {
            metrics::MetricRow row;
            row.estimator = name;
            row.abias2 = row.avar = row.aimse = row.cov_avar = row.abias2_se =
                std::numeric_limits<double>::quiet_NaN();
            row.failures = failures;
            result.report.rows.push_back(row);
        }
        result.runs.push_back(std::move(run));
    }
    return result;
}

}  // namespace mfglm::benchmark
