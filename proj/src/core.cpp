#include "mfglm/core.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace mfglm {

FunctionalGrid::FunctionalGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidArgument("FunctionalGrid: need at least 2 points");
    for (std::size_t l = 0; l < points_.size(); ++l) {
        const double t = points_[l];
        if (!std::isfinite(t) || t < 0.0 || t > 1.0) {
            std::ostringstream os;
            os << "FunctionalGrid: point " << l << " = " << t << " outside [0,1]";
            throw InvalidArgument(os.str());
        }
        if (l > 0 && !(t > points_[l - 1])) {
            throw InvalidArgument("FunctionalGrid: points must be strictly increasing");
        }
    }
    const auto T = static_cast<Eigen::Index>(points_.size());
    weights_ = Vector::Zero(T);
    for (Eigen::Index l = 0; l + 1 < T; ++l) {
        const double h = points_[static_cast<std::size_t>(l + 1)] - points_[static_cast<std::size_t>(l)];
        weights_[l] += 0.5 * h;
        weights_[l + 1] += 0.5 * h;
    }
}

FunctionalGrid FunctionalGrid::uniform(int size) {
    if (size < 2) throw InvalidArgument("FunctionalGrid::uniform: need at least 2 points");
    std::vector<double> pts(static_cast<std::size_t>(size));
    for (int l = 0; l < size; ++l) pts[static_cast<std::size_t>(l)] = static_cast<double>(l) / (size - 1);
    pts.back() = 1.0;
    return FunctionalGrid(std::move(pts));
}

Matrix kernel_matrix(const CovarianceKernel& kernel, const FunctionalGrid& grid) {
    const int T = grid.size();
    switch (kernel.kind) {
    case KernelKind::AR1:
    case KernelKind::CompoundSymmetry: {
        if (!(kernel.sigma >= 0.0) || !std::isfinite(kernel.sigma))
            throw InvalidArgument("kernel_matrix: sigma must be finite and >= 0");
        if (!(kernel.rho >= 0.0 && kernel.rho < 1.0))
            throw InvalidArgument("kernel_matrix: rho must lie in [0,1)");
        const double var = kernel.sigma * kernel.sigma;
        Matrix out(T, T);
        for (int l = 0; l < T; ++l) {
            for (int m = 0; m < T; ++m) {
                if (l == m) {
                    out(l, m) = var;
                } else if (kernel.kind == KernelKind::AR1) {
                    const double lag = std::abs(grid[l] - grid[m]) * (T - 1);
                    out(l, m) = var * std::pow(kernel.rho, lag);
                } else {
                    out(l, m) = var * kernel.rho;
                }
            }
        }
        return out;
    }
    case KernelKind::Unstructured: {
        const Matrix& m = kernel.matrix;
        if (m.rows() != T || m.cols() != T)
            throw InvalidArgument("kernel_matrix: unstructured matrix must be T x T");
        if (!m.isApprox(m.transpose(), 1e-12))
            throw InvalidArgument("kernel_matrix: unstructured matrix is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
        if (lo < -1e-10 * scale) {
            std::ostringstream os;
            os << "kernel_matrix: unstructured matrix is not positive semi-definite (min eigenvalue "
               << lo << ")";
            throw InvalidArgument(os.str());
        }
        return m;
    }
    }
    throw InvalidArgument("kernel_matrix: unknown kernel kind");
}

Matrix cholesky_with_jitter(const Matrix& cov, double max_relative_jitter) {
    const Eigen::Index T = cov.rows();
    const double scale = T > 0 ? cov.diagonal().cwiseAbs().mean() : 0.0;
    if (scale == 0.0) return Matrix::Zero(T, T);
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    for (double rel = 1e-14; rel <= max_relative_jitter * (1.0 + 1e-12); rel *= 10.0) {
        Matrix jittered = cov;
        jittered.diagonal().array() += rel * scale;
        llt.compute(jittered);
        if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    throw NumericalError("cholesky_with_jitter: covariance is not positive semi-definite");
}

double LinkFunction::apply(double mean) const {
    switch (kind) {
    case LinkKind::Logit:
        if (!(mean > 0.0 && mean < 1.0)) {
            std::ostringstream os;
            os << "logit link: value " << mean << " outside (0,1)";
            throw InvalidArgument(os.str());
        }
        return std::log(mean / (1.0 - mean));
    case LinkKind::Log:
        if (!(mean > 0.0)) {
            std::ostringstream os;
            os << "log link: value " << mean << " must be > 0";
            throw InvalidArgument(os.str());
        }
        return std::log(mean);
    case LinkKind::Identity:
        return mean;
    }
    return mean;
}

double LinkFunction::invert(double eta) const {
    switch (kind) {
    case LinkKind::Logit:
        return expit(eta);
    case LinkKind::Log:
        return std::exp(eta);
    case LinkKind::Identity:
        return eta;
    }
    return eta;
}

std::string_view to_string(LinkKind kind) {
    switch (kind) {
    case LinkKind::Logit: return "logit";
    case LinkKind::Log: return "log";
    case LinkKind::Identity: return "identity";
    }
    return "?";
}

double integrate_product(std::span<const double> f, std::span<const double> g,
                         const FunctionalGrid& grid) {
    const auto T = static_cast<std::size_t>(grid.size());
    if (f.size() != T || g.size() != T)
        throw InvalidArgument("integrate_product: vectors must match the grid length");
    const Vector& w = grid.weights();
    double acc = 0.0;
    for (std::size_t l = 0; l < T; ++l) acc += w[static_cast<Eigen::Index>(l)] * f[l] * g[l];
    return acc;
}

double integrate_product(const Vector& f, const Vector& g, const FunctionalGrid& grid) {
    return integrate_product(std::span<const double>(f.data(), static_cast<std::size_t>(f.size())),
                             std::span<const double>(g.data(), static_cast<std::size_t>(g.size())),
                             grid);
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(seed);
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

std::mt19937_64 substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    const std::uint64_t h = derive_seed(seed, keys);
    std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace mfglm
