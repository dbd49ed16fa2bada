#include "mfglm/pace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace mfglm::pace {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double gauss_kernel(double u) { return std::exp(-0.5 * u * u); }

// A_p(a, b) = K(u) u^p with u = (x_b - x_a) / h.
Matrix kernel_moment(const Vector& x, double h, int p) {
    const auto T = x.size();
    Matrix A(T, T);
    for (Eigen::Index a = 0; a < T; ++a) {
        for (Eigen::Index b = 0; b < T; ++b) {
            const double u = (x[b] - x[a]) / h;
            A(a, b) = gauss_kernel(u) * std::pow(u, p);
        }
    }
    return A;
}

struct SurfaceFit {
    Matrix fitted;
    double gcv = kInf;
};

// Local-linear surface smoother over the entries flagged in mask (the
// off-diagonal raw covariances).
SurfaceFit smooth_surface(const Vector& x, const Matrix& raw, const Matrix& mask, double h) {
    const auto T = x.size();
    const Matrix A0 = kernel_moment(x, h, 0);
    const Matrix A1 = kernel_moment(x, h, 1);
    const Matrix A2 = kernel_moment(x, h, 2);
    const Matrix V = raw.cwiseProduct(mask);
    const Matrix S00 = A0 * mask * A0.transpose();
    const Matrix S10 = A1 * mask * A0.transpose();
    const Matrix S01 = A0 * mask * A1.transpose();
    const Matrix S20 = A2 * mask * A0.transpose();
    const Matrix S11 = A1 * mask * A1.transpose();
    const Matrix S02 = A0 * mask * A2.transpose();
    const Matrix R0 = A0 * V * A0.transpose();
    const Matrix R1 = A1 * V * A0.transpose();
    const Matrix R2 = A0 * V * A1.transpose();

    SurfaceFit out;
    out.fitted = Matrix(T, T);
    double rss = 0.0, trace = 0.0, count = 0.0;
    for (Eigen::Index s = 0; s < T; ++s) {
        for (Eigen::Index t = 0; t < T; ++t) {
            Eigen::Matrix3d S;
            S << S00(s, t), S10(s, t), S01(s, t), S10(s, t), S20(s, t), S11(s, t), S01(s, t), S11(s, t), S02(s, t);
            const Eigen::Vector3d r(R0(s, t), R1(s, t), R2(s, t));
            Eigen::LDLT<Eigen::Matrix3d> ldlt(S);
            double self;
            const double scale = S.diagonal().maxCoeff();
            if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                ldlt.vectorD().minCoeff() > 1e-12 * scale) {
                out.fitted(s, t) = ldlt.solve(r)[0];
                self = ldlt.solve(Eigen::Vector3d::UnitX())[0];
            } else {
                // Too few effective neighbours for a plane: local constant.
                out.fitted(s, t) = S00(s, t) > 0.0 ? R0(s, t) / S00(s, t) : 0.0;
                self = S00(s, t) > 0.0 ? 1.0 / S00(s, t) : 0.0;
            }
            if (mask(s, t) > 0.0) {
                const double e = raw(s, t) - out.fitted(s, t);
                rss += e * e;
                trace += self;  // kernel weight at zero offset is 1
                count += 1.0;
            }
        }
    }
    out.fitted = 0.5 * (out.fitted + out.fitted.transpose()).eval();
    if (count > 0.0 && 1.0 - trace / count > 1e-6) {
        const double denom = 1.0 - trace / count;
        out.gcv = (rss / count) / (denom * denom);
    }
    return out;
}

double grid_range(const Vector& x) { return x[x.size() - 1] - x[0]; }

}  // namespace

namespace detail {

std::pair<Vector, double> local_linear(const Vector& x, const Vector& y, double h) {
    const auto T = x.size();
    Vector fitted(T);
    double rss = 0.0, trace = 0.0;
    int count = 0;
    for (Eigen::Index a = 0; a < T; ++a) {
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, r0 = 0.0, r1 = 0.0;
        for (Eigen::Index b = 0; b < T; ++b) {
            if (is_missing(y[b])) continue;
            const double u = (x[b] - x[a]) / h;
            const double k = gauss_kernel(u);
            s0 += k;
            s1 += k * u;
            s2 += k * u * u;
            r0 += k * y[b];
            r1 += k * u * y[b];
        }
        const double det = s0 * s2 - s1 * s1;
        double self;
        if (det > 1e-12 * s0 * s2 && det > 0.0) {
            fitted[a] = (s2 * r0 - s1 * r1) / det;
            self = s2 / det;
        } else {
            fitted[a] = r0 / s0;
            self = 1.0 / s0;
        }
        if (!is_missing(y[a])) {
            const double e = y[a] - fitted[a];
            rss += e * e;
            trace += self;
            ++count;
        }
    }
    double gcv = kInf;
    if (count > 0 && 1.0 - trace / count > 1e-6) {
        const double denom = 1.0 - trace / count;
        gcv = (rss / count) / (denom * denom);
    }
    return {fitted, gcv};
}

}  // namespace detail

FpcaModel fit_fpca(const Matrix& curves, const FunctionalGrid& grid, const FpcaOptions& options) {
    const auto n = curves.rows();
    const auto T = curves.cols();
    if (n < 5) throw InvalidArgument("fit_fpca: need at least 5 curves");
    if (T != grid.size()) throw InvalidArgument("fit_fpca: curve length does not match the grid");
    if (!(options.fve_target > 0.0 && options.fve_target <= 1.0))
        throw InvalidArgument("fit_fpca: fve_target must lie in (0, 1]");
    if (options.bandwidth_fractions.empty()) throw InvalidArgument("fit_fpca: empty bandwidth grid");

    const Vector x = grid.as_vector();
    const double range = grid_range(x);

    // Cross-sectional means, then the smoothed mean.
    Vector raw_mean(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        double sum = 0.0;
        int m = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (is_missing(curves(i, t))) continue;
            sum += curves(i, t);
            ++m;
        }
        if (m == 0) throw DataError("fit_fpca: time point " + std::to_string(t) + " has no observed curve");
        raw_mean[t] = sum / m;
    }
    FpcaModel model;
    model.grid = x;
    model.fve_target = options.fve_target;
    double best = kInf;
    for (double frac : options.bandwidth_fractions) {
        auto [fit, gcv] = detail::local_linear(x, raw_mean, frac * range);
        if (model.mean_curve.size() == 0 || gcv < best) {
            best = gcv;
            model.mean_curve = fit;
            model.mean_bandwidth = frac * range;
        }
    }

    // Raw covariance over jointly observed pairs, centred on the raw
    // cross-sectional means so that smoothing bias in the mean does not
    // leak into the surface.
    Matrix sum = Matrix::Zero(T, T);
    Matrix pairs = Matrix::Zero(T, T);
    Vector centred(T);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index t = 0; t < T; ++t) centred[t] = curves(i, t) - raw_mean[t];
        for (Eigen::Index s = 0; s < T; ++s) {
            if (is_missing(centred[s])) continue;
            for (Eigen::Index t = 0; t < T; ++t) {
                if (is_missing(centred[t])) continue;
                sum(s, t) += centred[s] * centred[t];
                pairs(s, t) += 1.0;
            }
        }
    }
    Matrix raw = Matrix::Zero(T, T);
    Matrix mask = Matrix::Zero(T, T);
    for (Eigen::Index s = 0; s < T; ++s) {
        for (Eigen::Index t = 0; t < T; ++t) {
            if (pairs(s, t) == 0.0) continue;
            raw(s, t) = sum(s, t) / pairs(s, t);
            if (s != t) mask(s, t) = 1.0;
        }
    }

    SurfaceFit surface;
    for (double frac : options.bandwidth_fractions) {
        SurfaceFit fit = smooth_surface(x, raw, mask, frac * range);
        if (surface.fitted.size() == 0 || fit.gcv < surface.gcv) {
            surface = std::move(fit);
            model.cov_bandwidth = frac * range;
        }
    }
    const Matrix& G = surface.fitted;

    double noise = 0.0;
    for (Eigen::Index t = 0; t < T; ++t) noise += raw(t, t) - G(t, t);
    model.noise_var = std::max(0.0, noise / static_cast<double>(T));

    // Eigen-decomposition of the integral operator: Q^1/2 G Q^1/2.
    const Vector q_sqrt = grid.weights().cwiseSqrt();
    const Matrix B = q_sqrt.asDiagonal() * G * q_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (B + B.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("fit_fpca: eigen-decomposition failed");
    const Vector ev = eig.eigenvalues().reverse();
    const Matrix vecs = eig.eigenvectors().rowwise().reverse();

    double total = 0.0;
    int positive = 0;
    for (Eigen::Index k = 0; k < T && ev[k] > 0.0; ++k) {
        total += ev[k];
        ++positive;
    }
    int K = 1;
    if (total > 0.0) {
        double cum = 0.0;
        for (K = 1; K <= positive; ++K) {
            cum += ev[K - 1];
            if (cum >= options.fve_target * total * (1.0 - 1e-12)) break;
        }
        K = std::min(K, positive);
    }
    model.eigenvalues = ev.head(K).cwiseMax(0.0);
    model.eigenfunctions = q_sqrt.cwiseInverse().asDiagonal() * vecs.leftCols(K);
    for (int k = 0; k < K; ++k) {
        auto phi = model.eigenfunctions.col(k);
        const double tol = 1e-10 * phi.cwiseAbs().maxCoeff();
        Eigen::Index lead = 0;
        while (lead + 1 < T && std::abs(phi[lead]) <= tol) ++lead;
        if (phi[lead] < 0.0) phi = -phi;
    }
    return model;
}

namespace {

// K x m map from centred observed values to scores.
Matrix score_operator(const FpcaModel& model, const std::vector<Eigen::Index>& observed, bool& ridged) {
    const auto m = static_cast<Eigen::Index>(observed.size());
    const int K = model.components();
    Matrix phi(m, K);
    for (Eigen::Index a = 0; a < m; ++a) phi.row(a) = model.eigenfunctions.row(observed[static_cast<std::size_t>(a)]);
    Matrix sigma = phi * model.eigenvalues.asDiagonal() * phi.transpose();
    sigma.diagonal().array() += model.noise_var;
    const double ridge = 1e-8 * std::max(sigma.trace(), 1e-300) / static_cast<double>(m);
    Eigen::LLT<Matrix> llt;
    ridged = false;
    if (model.noise_var < ridge) {
        ridged = true;
    } else {
        llt.compute(sigma);
        ridged = llt.info() != Eigen::Success;
    }
    if (ridged) {
        sigma.diagonal().array() += ridge;
        llt.compute(sigma);
        if (llt.info() != Eigen::Success) throw NumericalError("pace_scores: covariance not positive definite");
    }
    return model.eigenvalues.asDiagonal() * llt.solve(phi).transpose();
}

}  // namespace

Scores pace_scores(const FpcaModel& model, const Vector& curve) {
    const auto T = model.mean_curve.size();
    if (curve.size() != T) throw InvalidArgument("pace_scores: curve length does not match the model");
    std::vector<Eigen::Index> observed;
    for (Eigen::Index t = 0; t < T; ++t)
        if (!is_missing(curve[t])) observed.push_back(t);
    Scores out;
    out.xi = Vector::Zero(model.components());
    if (observed.empty()) return out;
    const Matrix op = score_operator(model, observed, out.ridged);
    Vector resid(static_cast<Eigen::Index>(observed.size()));
    for (std::size_t a = 0; a < observed.size(); ++a)
        resid[static_cast<Eigen::Index>(a)] = curve[observed[a]] - model.mean_curve[observed[a]];
    out.xi = op * resid;
    return out;
}

Matrix pace_predict(const FpcaModel& model, const Matrix& curves) {
    const auto n = curves.rows();
    const auto T = model.mean_curve.size();
    if (curves.cols() != T) throw InvalidArgument("pace_predict: curve length does not match the model");
    std::vector<Eigen::Index> all(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) all[static_cast<std::size_t>(t)] = t;
    bool ridged = false;
    const Matrix full_op = score_operator(model, all, ridged);
    Matrix out(n, T);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector row = curves.row(i).transpose();
        Vector xi;
        if (row.array().isNaN().any()) {
            xi = pace_scores(model, row).xi;
        } else {
            xi = full_op * (row - model.mean_curve);
        }
        out.row(i) = (model.mean_curve + model.eigenfunctions * xi).transpose();
    }
    return out;
}

Matrix log_mean_curves(const SurrogateArray& W) {
    const int n = W.subjects();
    const int T = W.points();
    Matrix out(n, T);
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < T; ++t) {
            double sum = 0.0;
            int m = 0;
            for (int j = 0; j < W.replicates(); ++j) {
                const double w = W(i, j, t);
                if (is_missing(w)) continue;
                sum += std::log(w + 1.0);
                ++m;
            }
            out(i, t) = m > 0 ? sum / m : kMissing;
        }
    }
    return out;
}

mem::ReconstructedCovariate pace_reconstruct(const SurrogateArray& W, const FunctionalGrid& grid,
                                             const FpcaOptions& options) {
    const Matrix curves = log_mean_curves(W);
    const FpcaModel model = fit_fpca(curves, grid, options);
    mem::ReconstructedCovariate out;
    out.method = mem::Method::PACE;
    out.values = pace_predict(model, curves);
    out.meta = {{"components", static_cast<double>(model.components())},
                {"noise_var", model.noise_var},
                {"fve_target", model.fve_target},
                {"mean_bandwidth", model.mean_bandwidth},
                {"cov_bandwidth", model.cov_bandwidth}};
    return out;
}

}  // namespace mfglm::pace
