#include "mfglm/mem.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mfglm/parallel.hpp"

namespace mfglm::mem {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::UP_MEM: return "UP_MEM";
    case Method::MP_MEM: return "MP_MEM";
    case Method::PACE: return "PACE";
    case Method::Average: return "Average";
    case Method::Naive: return "Naive";
    case Method::Oracle: return "Oracle";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Method m : all_methods()) {
        std::string canon(to_string(m));
        std::transform(canon.begin(), canon.end(), canon.begin(), [](unsigned char c) { return std::tolower(c); });
        if (canon == lower) return m;
    }
    throw InvalidArgument("unknown method '" + std::string(name) +
                          "'; expected one of up_mem, mp_mem, pace, average, naive, oracle");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::Oracle, Method::MP_MEM,  Method::UP_MEM,
                                             Method::PACE,   Method::Average, Method::Naive};
    return methods;
}

int ReconstructedCovariate::unconverged() const {
    return static_cast<int>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                          [](const FitDiagnostics& d) { return !d.converged; }));
}

int ReconstructedCovariate::degenerate() const {
    return static_cast<int>(std::count_if(diagnostics.begin(), diagnostics.end(),
                                          [](const FitDiagnostics& d) { return d.degenerate; }));
}

namespace {

FitDiagnostics summarize(const glmm::GlmmFit& fit, int first_slot) {
    return {first_slot, fit.converged, fit.degenerate, fit.iterations, fit.mu_hat, fit.var_components};
}

SurrogateArray window_slice(const SurrogateArray& W, int start, int D) {
    SurrogateArray out(W.subjects(), W.replicates(), D);
    for (int i = 0; i < W.subjects(); ++i)
        for (int j = 0; j < W.replicates(); ++j)
            for (int d = 0; d < D; ++d) out(i, j, d) = W(i, j, start + d);
    return out;
}

// Fills cells that had no observation with the column mean of the cells
// that did; a column with no data at all is an error.
void impute_columns(Matrix& values, const std::vector<std::vector<bool>>& observed) {
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            if (observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]) {
                sum += values(i, t);
                ++count;
            }
        }
        if (count == 0) throw DataError("reconstruction: time point " + std::to_string(t) + " has no observations");
        if (count == values.rows()) continue;
        const double fill = sum / count;
        for (Eigen::Index i = 0; i < values.rows(); ++i)
            if (!observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)]) values(i, t) = fill;
    }
}

}  // namespace

std::pair<int, int> window_source(int t, int T, int D) {
    const int centre = (D - 1) / 2;
    const int start = std::clamp(t - centre, 0, T - D);
    return {start, t - start};
}

ReconstructedCovariate up_mem(const SurrogateArray& W, const std::optional<Vector>& weights,
                              const ReconstructOptions& options) {
    if (W.replicates() < 2) throw InvalidArgument("up_mem: need J >= 2 replicates");
    const int n = W.subjects();
    const int T = W.points();
    ReconstructedCovariate out;
    out.method = Method::UP_MEM;
    out.window_size = 1;
    out.values = Matrix(n, T);
    out.diagnostics.resize(static_cast<std::size_t>(T));
    parallel_for(T, options.threads, [&](int t) {
        const auto fit = glmm::detail::fit_window_any(window_slice(W, t, 1), weights, options.glmm);
        for (int i = 0; i < n; ++i) out.values(i, t) = glmm::predict_x(fit, i, 0);
        out.diagnostics[static_cast<std::size_t>(t)] = summarize(fit, t);
    });
    return out;
}

namespace detail {

ReconstructedCovariate mp_mem_any(const SurrogateArray& W, int D, const std::optional<Vector>& weights,
                                  const ReconstructOptions& options) {
    const int n = W.subjects();
    const int T = W.points();
    if (D < 1 || D > T) throw InvalidArgument("mp_mem: window size D must satisfy 1 <= D <= T");
    if (W.replicates() < 2) throw InvalidArgument("mp_mem: need J >= 2 replicates");
    const int windows = T - D + 1;
    std::vector<glmm::GlmmFit> fits(static_cast<std::size_t>(windows));
    glmm::FitOptions opts = options.glmm;
    if (D > 1) opts.quadrature_nodes = 1;
    parallel_for(windows, options.threads, [&](int s) {
        fits[static_cast<std::size_t>(s)] = glmm::detail::fit_window_any(window_slice(W, s, D), weights, opts);
    });
    ReconstructedCovariate out;
    out.method = D == 1 ? Method::UP_MEM : Method::MP_MEM;
    out.window_size = D;
    out.values = Matrix(n, T);
    for (int t = 0; t < T; ++t) {
        const auto [start, slot] = window_source(t, T, D);
        const auto& fit = fits[static_cast<std::size_t>(start)];
        for (int i = 0; i < n; ++i) out.values(i, t) = glmm::predict_x(fit, i, slot);
    }
    for (int s = 0; s < windows; ++s) out.diagnostics.push_back(summarize(fits[static_cast<std::size_t>(s)], s));
    return out;
}

}  // namespace detail

ReconstructedCovariate mp_mem(const SurrogateArray& W, int D, const std::optional<Vector>& weights,
                              const ReconstructOptions& options) {
    if (D < 2) throw InvalidArgument("mp_mem: D must be >= 2; use up_mem for point-wise fits");
    return detail::mp_mem_any(W, D, weights, options);
}

ReconstructedCovariate average_reconstruct(const SurrogateArray& W) {
    const int n = W.subjects();
    const int T = W.points();
    ReconstructedCovariate out;
    out.method = Method::Average;
    out.values = Matrix(n, T);
    std::vector<std::vector<bool>> observed(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(T)));
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < T; ++t) {
            double sum = 0.0;
            int m = 0;
            for (int j = 0; j < W.replicates(); ++j) {
                const double w = W(i, j, t);
                if (is_missing(w)) continue;
                sum += w;
                ++m;
            }
            observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = m > 0;
            out.values(i, t) = m > 0 ? std::log(sum / m + 1.0) : 0.0;
        }
    }
    impute_columns(out.values, observed);
    return out;
}

ReconstructedCovariate naive_reconstruct(const SurrogateArray& W) {
    const int n = W.subjects();
    const int T = W.points();
    ReconstructedCovariate out;
    out.method = Method::Naive;
    out.values = Matrix(n, T);
    std::vector<std::vector<bool>> observed(static_cast<std::size_t>(n), std::vector<bool>(static_cast<std::size_t>(T)));
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < T; ++t) {
            // First replicate, or the first one observed at this point.
            double w = kMissing;
            for (int j = 0; j < W.replicates() && is_missing(w); ++j) w = W(i, j, t);
            observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = !is_missing(w);
            out.values(i, t) = is_missing(w) ? 0.0 : std::log(w + 1.0);
        }
    }
    impute_columns(out.values, observed);
    return out;
}

ReconstructedCovariate oracle_passthrough(const Matrix& X) {
    ReconstructedCovariate out;
    out.method = Method::Oracle;
    out.values = X;
    return out;
}

}  // namespace mfglm::mem
