#include "mfglm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>

#include "mfglm/parallel.hpp"

namespace mfglm::inference {

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw InvalidArgument("quantile: no values");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile: p must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct Draw {
    std::vector<int> rows;
    std::optional<sofr::SofrFit> fit;
    int attempts = 0;
};

bool degenerate_outcome(const Vector& Y) {
    return Y.size() == 0 || (Y.array() == Y[0]).all();
}

Draw resample(const MultiLevelSample& sample, mem::Method method, const pipeline::Options& options,
              const BootstrapOptions& boot, int b) {
    const int n = sample.subjects();
    std::uniform_int_distribution<int> pick(0, n - 1);
    Draw draw;
    for (int attempt = 0; attempt <= boot.max_redraws; ++attempt) {
        auto rng = substream(boot.seed, {static_cast<std::uint64_t>(b), static_cast<std::uint64_t>(attempt)});
        draw.rows.assign(static_cast<std::size_t>(n), 0);
        for (auto& r : draw.rows) r = pick(rng);
        draw.attempts = attempt + 1;

        const auto boot_sample = sample.select_subjects(draw.rows);
        if (degenerate_outcome(boot_sample.Y)) continue;
        try {
            draw.fit = pipeline::fit(boot_sample, method, options);
            return draw;
        } catch (const DataError&) {
        } catch (const NumericalError&) {
        }
    }
    return draw;
}

}  // namespace

BootstrapResult bootstrap(const MultiLevelSample& sample, mem::Method method, const pipeline::Options& options,
                          const BootstrapOptions& boot) {
    if (boot.B < 50) throw InvalidArgument("bootstrap: B must be at least 50");
    if (!(boot.level > 0.0 && boot.level < 1.0)) throw InvalidArgument("bootstrap: level must lie in (0, 1)");
    if (sample.subjects() < 2) throw DataError("bootstrap: need at least two subjects");
    sample.validate();

    // Resamples run in parallel, so each inner fit stays single-threaded.
    pipeline::Options inner = options;
    inner.reconstruct.threads = 1;

    std::vector<Draw> draws(static_cast<std::size_t>(boot.B));
    parallel_for(boot.B, boot.threads,
                 [&](int b) { draws[static_cast<std::size_t>(b)] = resample(sample, method, inner, boot, b); });

    BootstrapResult out;
    out.failed.assign(draws.size(), false);
    std::vector<int> ok;
    for (int b = 0; b < boot.B; ++b) {
        auto& d = draws[static_cast<std::size_t>(b)];
        out.redraws += d.attempts - 1;
        if (d.fit) {
            ok.push_back(b);
        } else {
            out.failed[static_cast<std::size_t>(b)] = true;
            ++out.failures;
        }
        out.indices.push_back(std::move(d.rows));
    }
    if (out.failures > boot.max_failure_rate * boot.B) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "bootstrap: %d of %d resamples failed (limit %.0f%%)", out.failures, boot.B,
                      100.0 * boot.max_failure_rate);
        throw NumericalError(msg);
    }

    const int T = sample.grid.size();
    const int p = static_cast<int>(sample.Z.cols());
    out.curves.resize(static_cast<int>(ok.size()), T);
    out.coefficients.resize(static_cast<int>(ok.size()), 1 + p);
    for (int k = 0; k < static_cast<int>(ok.size()); ++k) {
        const auto& f = *draws[static_cast<std::size_t>(ok[static_cast<std::size_t>(k)])].fit;
        out.curves.row(k) = f.beta_curve.transpose();
        out.coefficients(k, 0) = f.intercept;
        for (int c = 0; c < p; ++c) out.coefficients(k, 1 + c) = f.alpha[c];
    }

    const double lo = (1.0 - boot.level) / 2.0, hi = 1.0 - lo;
    auto column = [](const Matrix& m, int c) {
        std::vector<double> v(static_cast<std::size_t>(m.rows()));
        for (int r = 0; r < m.rows(); ++r) v[static_cast<std::size_t>(r)] = m(r, c);
        return v;
    };
    out.bands.level = boot.level;
    out.bands.lower.resize(T);
    out.bands.upper.resize(T);
    for (int t = 0; t < T; ++t) {
        const auto v = column(out.curves, t);
        out.bands.lower[t] = quantile(v, lo);
        out.bands.upper[t] = quantile(v, hi);
    }
    out.bands.coef_lower.resize(1 + p);
    out.bands.coef_upper.resize(1 + p);
    for (int c = 0; c <= p; ++c) {
        const auto v = column(out.coefficients, c);
        out.bands.coef_lower[c] = quantile(v, lo);
        out.bands.coef_upper[c] = quantile(v, hi);
    }
    return out;
}

}  // namespace mfglm::inference
