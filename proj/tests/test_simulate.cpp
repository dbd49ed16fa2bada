#include <doctest.h>

#include <cmath>

#include "mfglm/simulate.hpp"

using namespace mfglm;
using namespace mfglm::simulate;

TEST_SUITE("simulate") {

TEST_CASE("latent mean and truth") {
    CHECK(latent_mean(0.5) == 0.5);
    CHECK(true_beta(0.25) == doctest::Approx(1.0));
    CHECK(true_alpha() == Vector((Vector(2) << 1.0, 2.0).finished()));
}

TEST_CASE("sigma 0 gives the mean curve") {
    ScenarioConfig c;
    c.n = 5;
    c.sigma_x = 0.0;
    const auto grid = FunctionalGrid::uniform(c.T);
    const Matrix X = sample_latent_curves(c, grid, 3);
    for (int i = 0; i < c.n; ++i)
        for (int t = 0; t < c.T; ++t) CHECK(X(i, t) == latent_mean(grid[t]));
}

TEST_CASE("latent variance and lag-1 correlation") {
    ScenarioConfig c;
    c.n = 20000;
    c.T = 10;
    const auto grid = FunctionalGrid::uniform(c.T);
    const Matrix X = sample_latent_curves(c, grid, 11);
    Matrix E = X;
    for (int t = 0; t < c.T; ++t) E.col(t).array() -= latent_mean(grid[t]);
    for (int t = 0; t < c.T; ++t) CHECK(std::abs(E.col(t).squaredNorm() / c.n - 4.0) <= 0.15);
    double num = 0.0, den = 0.0;
    for (int t = 0; t + 1 < c.T; ++t) {
        num += E.col(t).dot(E.col(t + 1));
        den += std::sqrt(E.col(t).squaredNorm() * E.col(t + 1).squaredNorm());
    }
    CHECK(std::abs(num / den - 0.5) <= 0.02);
}

TEST_CASE("Poisson surrogates") {
    Matrix X = Matrix::Zero(100, 100);
    const auto W = sample_surrogates(X, 1, 5);
    double s = 0.0;
    for (double v : W.data()) {
        CHECK(v >= 0.0);
        CHECK(v == std::floor(v));
        s += v;
    }
    CHECK(std::abs(s / 10000 - 1.0) <= 0.05);

    const auto W2 = sample_surrogates(Matrix::Constant(100, 100, 2.0), 1, 6);
    double m = 0.0, q = 0.0;
    for (double v : W2.data()) m += v / 10000;
    for (double v : W2.data()) q += (v - m) * (v - m) / 10000;
    CHECK(std::abs(q - std::exp(2.0)) <= 0.5);

    const auto W3 = sample_surrogates(Matrix::Constant(10, 10, -50.0), 2, 6);
    for (double v : W3.data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(sample_surrogates(Matrix::Constant(1, 1, 800.0), 1, 1), InvalidArgument);
}

TEST_CASE("outcome model") {
    const auto grid = FunctionalGrid::uniform(50);
    Matrix Z = Matrix::Zero(4, 2);
    const auto [Y, eta] = sample_outcomes(Matrix::Zero(4, 50), Z, grid, 1);
    CHECK(eta.cwiseAbs().maxCoeff() == 0.0);  // p = 0.5

    Matrix Z2(3, 2);
    Z2 << 1.0, 0.0, 2.5, 1.0, -1.0, 1.0;
    const auto [Y2, eta2] = sample_outcomes(Matrix::Constant(3, 50, 1.7), Z2, grid, 2);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(eta2[i] - (Z2(i, 0) + 2.0 * Z2(i, 1))) <= 1e-8);
}

TEST_CASE("covariate distributions") {
    const Matrix Z = sample_covariates(50000, 9);
    CHECK(std::abs(Z.col(0).mean() - 2.0) <= 0.02);
    CHECK(std::abs(Z.col(1).mean() - 0.6) <= 0.01);
}

TEST_CASE("outcome calibration") {
    const int n = 200000;
    const auto grid = FunctionalGrid::uniform(2);
    Matrix Z(n, 2);
    auto rng = substream(3, {0});
    std::normal_distribution<double> nd(0.0, 2.0);
    for (int i = 0; i < n; ++i) {
        Z(i, 0) = nd(rng);
        Z(i, 1) = 0.0;
    }
    const auto [Y, eta] = sample_outcomes(Matrix::Zero(n, 2), Z, grid, 4);
    int populated = 0;
    for (double lo = 0.0; lo < 1.0; lo += 0.1) {
        double ys = 0.0, ps = 0.0;
        int k = 0;
        for (int i = 0; i < n; ++i) {
            const double p = expit(eta[i]);
            if (p >= lo && p < lo + 0.1) {
                ys += Y[i];
                ps += p;
                ++k;
            }
        }
        if (k < 1000) continue;
        ++populated;
        CHECK(std::abs(ys / k - ps / k) <= 0.03);
    }
    CHECK(populated >= 5);
}

TEST_CASE("make_dataset contract") {
    ScenarioConfig c;
    c.n = 100;
    const auto a = make_dataset(c, 3);
    const auto b = make_dataset(c, 3);
    CHECK(a.X.rows() == 100);
    CHECK(a.X.cols() == 50);
    CHECK(a.W.subjects() == 100);
    CHECK(a.W.replicates() == 5);
    CHECK(a.W.points() == 50);
    CHECK(a.Y.size() == 100);
    CHECK(a.X == b.X);
    CHECK(a.W == b.W);
    CHECK(a.Y == b.Y);
    for (int i = 0; i < c.n; ++i) {
        const double eta = integrate_product(a.beta, a.X.row(i).transpose(), a.grid) + a.Z.row(i).dot(a.alpha);
        CHECK(std::abs(eta - a.eta[i]) <= 1e-10);
    }

    // D and R do not feed the generator.
    ScenarioConfig d = c;
    d.D = 5;
    d.R = 7;
    const auto e = make_dataset(d, 3);
    CHECK(e.W == a.W);
    CHECK(e.Y == a.Y);
    CHECK(make_dataset(c, 4).Y != a.Y);
}

TEST_CASE("scenario validation") {
    ScenarioConfig c;
    c.J = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = {};
    c.D = 60;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

}
