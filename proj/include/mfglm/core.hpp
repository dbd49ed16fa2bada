#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "mfglm/error.hpp"

namespace mfglm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered observation times on [0,1], shared by every curve in a sample.
class FunctionalGrid {
public:
    explicit FunctionalGrid(std::vector<double> points);

    /// T equally spaced points 0, 1/(T-1), ..., 1.
    static FunctionalGrid uniform(int size);

    int size() const { return static_cast<int>(points_.size()); }
    double operator[](int l) const { return points_[static_cast<std::size_t>(l)]; }
    std::span<const double> points() const { return points_; }
    Eigen::Map<const Vector> as_vector() const {
        return {points_.data(), static_cast<Eigen::Index>(points_.size())};
    }

    /// Trapezoidal quadrature weights; weights().dot(f) approximates the
    /// integral of f over [t_0, t_{T-1}].
    const Vector& weights() const { return weights_; }

    bool operator==(const FunctionalGrid& other) const { return points_ == other.points_; }

private:
    std::vector<double> points_;
    Vector weights_;
};

enum class KernelKind { AR1, CompoundSymmetry, Unstructured };

struct CovarianceKernel {
    KernelKind kind = KernelKind::AR1;
    double sigma = 1.0;
    double rho = 0.0;
    Matrix matrix;  // Unstructured only

    static CovarianceKernel ar1(double sigma, double rho) { return {KernelKind::AR1, sigma, rho, {}}; }
    static CovarianceKernel compound_symmetry(double sigma, double rho) {
        return {KernelKind::CompoundSymmetry, sigma, rho, {}};
    }
    static CovarianceKernel unstructured(Matrix m) {
        return {KernelKind::Unstructured, 0.0, 0.0, std::move(m)};
    }
};

/// T x T covariance of the kernel on the grid. AR1 lag is measured in
/// grid-index units: |t - t'| * (T - 1).
Matrix kernel_matrix(const CovarianceKernel& kernel, const FunctionalGrid& grid);

/// Lower Cholesky factor of `cov`, adding diagonal jitter in decades from
/// 1e-14 up to `max_relative_jitter` times the mean diagonal until the
/// factorization succeeds. Throws NumericalError when it never does.
Matrix cholesky_with_jitter(const Matrix& cov, double max_relative_jitter = 1e-8);

enum class LinkKind { Logit, Log, Identity };

struct LinkFunction {
    LinkKind kind = LinkKind::Identity;

    /// Maps the mean scale to the linear-predictor scale.
    double apply(double mean) const;
    /// Maps the linear-predictor scale back to the mean scale.
    double invert(double eta) const;
};

std::string_view to_string(LinkKind kind);

inline double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Trapezoidal approximation of the integral of f*g over the grid.
double integrate_product(std::span<const double> f, std::span<const double> g,
                         const FunctionalGrid& grid);
double integrate_product(const Vector& f, const Vector& g, const FunctionalGrid& grid);

/// Mixes a master seed with an index path into a child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// Deterministic generator for an indexed substream of a master seed, so
/// (replicate, subject) draws do not depend on scheduling order.
std::mt19937_64 substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

}  // namespace mfglm
