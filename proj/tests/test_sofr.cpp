#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mfglm/simulate.hpp"
#include "mfglm/sofr.hpp"

using namespace mfglm;
using namespace mfglm::sofr;

namespace {

struct LogisticData {
    Matrix design, Z;
    Vector Y;
};

LogisticData logistic_data(int n, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    LogisticData d{Matrix(n, k), Matrix(n, 2), Vector(n)};
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < k; ++c) d.design(i, c) = nd(rng);
        d.Z(i, 0) = nd(rng);
        d.Z(i, 1) = nd(rng) > 0 ? 1.0 : 0.0;
        double eta = 0.3 + 0.8 * d.Z(i, 0) - 0.5 * d.Z(i, 1);
        for (int c = 0; c < k; ++c) eta += 0.4 * d.design(i, c) / (c + 1);
        d.Y[i] = std::uniform_real_distribution<double>(0, 1)(rng) < expit(eta) ? 1.0 : 0.0;
    }
    return d;
}

// Plain Newton-Raphson on [1, Z, design], with no safeguards.
Vector newton_oracle(const LogisticData& d) {
    const auto n = d.Y.size();
    Matrix A(n, 1 + d.Z.cols() + d.design.cols());
    A << Matrix::Ones(n, 1), d.Z, d.design;
    Vector b = Vector::Zero(A.cols());
    for (int it = 0; it < 50; ++it) {
        const Vector p = (A * b).unaryExpr([](double e) { return expit(e); });
        const Vector w = p.array() * (1.0 - p.array());
        const Matrix H = A.transpose() * w.asDiagonal() * A;
        b += H.ldlt().solve(A.transpose() * (d.Y - p));
    }
    return b;
}

}  // namespace

TEST_SUITE("sofr") {

TEST_CASE("partition of unity and non-negativity") {
    for (int T : {7, 50, 101})
        for (int deg : {0, 1, 2, 3})
            for (int K : {deg + 1, deg + 4, 15}) {
                const auto b = build_basis(FunctionalGrid::uniform(T), K, deg);
                CHECK(b.evaluation.rows() == T);
                CHECK(b.evaluation.cols() == K);
                CHECK((b.evaluation.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
                CHECK(b.evaluation.minCoeff() >= 0.0);
            }
    const auto b = build_basis(FunctionalGrid::uniform(5), 6, 3);
    for (double t = 0.0; t <= 1.0; t += 0.013) CHECK(std::abs(evaluate_basis(b, t).sum() - 1.0) <= 1e-12);
    CHECK(evaluate_basis(b, 1.0)[5] == doctest::Approx(1.0));
    CHECK_THROWS_AS(build_basis(FunctionalGrid::uniform(5), 3, 3), InvalidArgument);
}

TEST_CASE("degree zero with one bin per point gives indicators") {
    const auto b = build_basis(FunctionalGrid::uniform(10), 10, 0);
    CHECK(b.evaluation == Matrix::Identity(10, 10));
}

TEST_CASE("local support") {
    const auto grid = FunctionalGrid::uniform(101);
    const auto b = build_basis(grid, 10, 3);
    const auto knots = b.knots;
    for (int k = 0; k < 10; ++k)
        for (int l = 0; l < 101; ++l)
            if (grid[l] < knots[k] || grid[l] > knots[k + 4]) CHECK(b.evaluation(l, k) == 0.0);
}

TEST_CASE("cubic basis reproduces linear functions") {
    const auto grid = FunctionalGrid::uniform(50);
    const auto b = build_basis(grid, 8, 3);
    const Vector t = grid.as_vector();
    const Vector coef = b.evaluation.colPivHouseholderQr().solve(t);
    CHECK((b.evaluation * coef - t).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("functional design") {
    const auto grid = FunctionalGrid::uniform(101);
    const auto b = build_basis(grid, 15, 3);
    Matrix X(3, 101);
    X.row(0).setOnes();
    X.row(1).setZero();
    for (int l = 0; l < 101; ++l) X(2, l) = std::exp(-grid[l]) + std::cos(3.0 * grid[l]);
    const Matrix F = functional_design(X, b, grid);
    CHECK(std::abs(F.row(0).sum() - 1.0) <= 1e-10);
    for (int k = 0; k < 15; ++k)
        CHECK(F(0, k) == doctest::Approx(integrate_product(Vector::Ones(101), b.evaluation.col(k), grid)));
    CHECK(F.row(1).cwiseAbs().maxCoeff() == 0.0);

    const Vector beta = simulate::true_beta(grid);
    const Vector omega = b.evaluation.colPivHouseholderQr().solve(beta);
    const double direct = integrate_product(beta, X.row(2).transpose(), grid);
    CHECK(std::abs(F.row(2).dot(omega) - direct) <= 1e-3);
}

TEST_CASE("IRLS matches an independent Newton solver") {
    const auto d = logistic_data(400, 4, 1);
    const auto fit = fit_logistic(d.design, d.Z, d.Y, std::nullopt, {}, {"age", "female"});
    CHECK(fit.converged);
    CHECK(!fit.separated);
    CHECK((fit.coef - newton_oracle(d)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(fit.names == std::vector<std::string>{"Intercept", "age", "female", "omega1", "omega2", "omega3", "omega4"});
    CHECK((fit.vcov - fit.vcov.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(fit.vcov).eigenvalues().minCoeff() > 0.0);
    CHECK(logistic_score(d.design, d.Z, d.Y, std::nullopt, fit.coef).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("score matches finite differences of the log-likelihood") {
    const auto d = logistic_data(200, 3, 2);
    const std::optional<Vector> w = Vector::LinSpaced(200, 0.5, 1.5);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector coef = 0.3 * Vector::Random(6);
        const Vector g = logistic_score(d.design, d.Z, d.Y, w, coef);
        for (int k = 0; k < 6; ++k) {
            Vector a = coef, b = coef;
            const double h = 1e-6;
            a[k] += h;
            b[k] -= h;
            const double fd =
                (logistic_loglik(d.design, d.Z, d.Y, w, a) - logistic_loglik(d.design, d.Z, d.Y, w, b)) / (2 * h);
            CHECK(std::abs(g[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("log-likelihood never decreases across iterations") {
    const auto d = logistic_data(150, 6, 3);
    const auto fit = fit_logistic(d.design, d.Z, d.Y);
    REQUIRE(fit.loglik_path.size() >= 2);
    for (std::size_t k = 1; k < fit.loglik_path.size(); ++k) CHECK(fit.loglik_path[k] >= fit.loglik_path[k - 1]);
    CHECK(fit.loglik == fit.loglik_path.back());
}

TEST_CASE("integer weights equal duplicated rows") {
    const auto d = logistic_data(120, 2, 4);
    Vector w = Vector::Ones(120);
    w.head(30).setConstant(2.0);
    LogisticData dup{Matrix(150, 2), Matrix(150, 2), Vector(150)};
    dup.design << d.design, d.design.topRows(30);
    dup.Z << d.Z, d.Z.topRows(30);
    dup.Y << d.Y, d.Y.head(30);
    const auto a = fit_logistic(d.design, d.Z, d.Y, w);
    const auto b = fit_logistic(dup.design, dup.Z, dup.Y);
    CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("separation is flagged") {
    LogisticData d{Matrix(60, 1), Matrix(60, 1), Vector(60)};
    for (int i = 0; i < 60; ++i) {
        d.design(i, 0) = i - 29.5;
        d.Z(i, 0) = std::sin(i * 1.0);
        d.Y[i] = i >= 30 ? 1.0 : 0.0;
    }
    const auto fit = fit_logistic(d.design, d.Z, d.Y);
    CHECK(fit.separated);
}

TEST_CASE("rank-deficient design names the null direction") {
    auto d = logistic_data(100, 3, 5);
    d.design.col(2) = d.design.col(0) - 2.0 * d.design.col(1);
    try {
        fit_logistic(d.design, d.Z, d.Y);
        FAIL("expected a rank error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("omega1") != std::string::npos);
        CHECK(msg.find("omega3") != std::string::npos);
    }
}

TEST_CASE("basis rotation does not change beta") {
    simulate::ScenarioConfig c;
    c.n = 300;
    const auto ds = simulate::make_dataset(c, 1);
    const auto b = build_basis(ds.grid, 6, 3);
    const Matrix F = functional_design(ds.X, b, ds.grid);
    Matrix A = Matrix::Identity(6, 6) + 0.3 * Matrix::Random(6, 6);
    const auto f1 = fit_logistic(F, ds.Z, ds.Y);
    const auto f2 = fit_logistic(F * A, ds.Z, ds.Y);
    const Vector beta1 = b.evaluation * f1.coef.tail(6);
    const Vector beta2 = b.evaluation * A * f2.coef.tail(6);
    CHECK((beta1 - beta2).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("estimate") {
    simulate::ScenarioConfig c;
    c.n = 400;
    const auto ds = simulate::make_dataset(c, 2);
    const auto rc = mem::oracle_passthrough(ds.X);
    const auto fit = estimate(rc, ds.Z, ds.Y, ds.grid, 6);
    CHECK(fit.converged);
    CHECK(fit.omega_rank == 6);
    CHECK(fit.beta_curve == fit.basis.evaluation * fit.omega);
    CHECK(fit.names.front() == "Intercept");
    CHECK(fit.beta_se().size() == 50);
    CHECK(fit.vcov.rows() == 1 + 2 + 6);

    // Same as the direct logistic fit on a full-rank design.
    const auto direct = fit_logistic(functional_design(ds.X, fit.basis, ds.grid), ds.Z, ds.Y);
    CHECK((direct.coef.tail(6) - fit.omega).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(direct.coef[0] - fit.intercept) <= 1e-6);

    // Permuting subjects leaves beta unchanged.
    std::vector<int> perm(400);
    for (int i = 0; i < 400; ++i) perm[i] = (i * 7 + 3) % 400;
    Matrix X2(400, 50), Z2(400, 2);
    Vector Y2(400);
    for (int i = 0; i < 400; ++i) {
        X2.row(i) = ds.X.row(perm[i]);
        Z2.row(i) = ds.Z.row(perm[i]);
        Y2[i] = ds.Y[perm[i]];
    }
    const auto fit2 = estimate(mem::oracle_passthrough(X2), Z2, Y2, ds.grid, 6);
    CHECK((fit2.beta_curve - fit.beta_curve).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("low-rank reconstructions get a minimum-norm fit") {
    simulate::ScenarioConfig c;
    c.n = 300;
    const auto ds = simulate::make_dataset(c, 3);
    // Curves in a two-dimensional space plus the mean.
    Matrix X(300, 50);
    for (int i = 0; i < 300; ++i)
        for (int l = 0; l < 50; ++l)
            X(i, l) = 1.0 + ds.X(i, 10) * ds.grid[l] + ds.X(i, 30) * ds.grid[l] * ds.grid[l];
    const auto fit = estimate(mem::oracle_passthrough(X), ds.Z, ds.Y, ds.grid, 10);
    CHECK(fit.omega_rank == 2);
    CHECK(fit.converged);
    CHECK(fit.omega.allFinite());
    // omega lies in the row space of the projected design, so adding a null
    // vector cannot shorten it.
    const Matrix F = functional_design(X, fit.basis, ds.grid);
    Eigen::JacobiSVD<Matrix> svd(F, Eigen::ComputeFullV);
    const Matrix null = svd.matrixV().rightCols(7);
    CHECK((null.transpose() * fit.omega).cwiseAbs().maxCoeff() <= 1e-6 * fit.omega.norm());
}

}
