#include <doctest.h>

#include <cmath>

#include "mfglm/mem.hpp"
#include "mfglm/simulate.hpp"

using namespace mfglm;
using namespace mfglm::mem;

namespace {

SurrogateArray slice(const SurrogateArray& W, int t0, int D) {
    SurrogateArray a(W.subjects(), W.replicates(), D);
    for (int i = 0; i < W.subjects(); ++i)
        for (int j = 0; j < W.replicates(); ++j)
            for (int d = 0; d < D; ++d) a(i, j, d) = W(i, j, t0 + d);
    return a;
}

double mse(const Matrix& a, const Matrix& b) { return (a - b).array().square().mean(); }

}  // namespace

TEST_SUITE("mem") {

TEST_CASE("method names") {
    CHECK(parse_method("mp_mem") == Method::MP_MEM);
    CHECK(parse_method("PACE") == Method::PACE);
    CHECK(parse_method("oracle") == Method::Oracle);
    CHECK(to_string(Method::Average) == "Average");
    CHECK_THROWS_AS(parse_method("lasso"), InvalidArgument);
    CHECK(all_methods().size() == 6);
}

TEST_CASE("Average and Naive transforms") {
    SurrogateArray W(2, 3, 2);
    double v = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j)
            for (int t = 0; t < 2; ++t) W(i, j, t) = v++;
    const auto avg = average_reconstruct(W);
    const auto naive = naive_reconstruct(W);
    for (int i = 0; i < 2; ++i)
        for (int t = 0; t < 2; ++t) {
            const double m = (W(i, 0, t) + W(i, 1, t) + W(i, 2, t)) / 3.0;
            CHECK(avg.values(i, t) == std::log(m + 1.0));
            CHECK(naive.values(i, t) == std::log(W(i, 0, t) + 1.0));
        }
    CHECK(avg.method == Method::Average);
    CHECK(naive.method == Method::Naive);
}

TEST_CASE("missing cells in Average and Naive") {
    SurrogateArray W(3, 2, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j)
            for (int t = 0; t < 2; ++t) W(i, j, t) = i + j + t;
    W(0, 0, 1) = kMissing;
    W(0, 1, 1) = kMissing;
    W(1, 0, 0) = kMissing;
    const auto avg = average_reconstruct(W);
    CHECK(avg.values(1, 0) == std::log(W(1, 1, 0) + 1.0));
    CHECK(avg.values(0, 1) == doctest::Approx((avg.values(1, 1) + avg.values(2, 1)) / 2.0));
    CHECK(avg.values.allFinite());
    const auto naive = naive_reconstruct(W);
    CHECK(naive.values.allFinite());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) W(i, j, 0) = kMissing;
    CHECK_THROWS_AS(average_reconstruct(W), DataError);
}

TEST_CASE("window source") {
    CHECK(window_source(0, 50, 3) == std::pair<int, int>{0, 0});
    CHECK(window_source(1, 50, 3) == std::pair<int, int>{0, 1});
    CHECK(window_source(25, 50, 3) == std::pair<int, int>{24, 1});
    CHECK(window_source(49, 50, 3) == std::pair<int, int>{47, 2});
    CHECK(window_source(10, 50, 4) == std::pair<int, int>{9, 1});
    for (int D = 2; D <= 7; ++D)
        for (int t = 0; t < 20; ++t) {
            const auto [w, s] = window_source(t, 20, D);
            CHECK(w + s == t);
            CHECK(w >= 0);
            CHECK(w + D <= 20);
        }
}

TEST_CASE("MP_MEM uses the window fit of each point") {
    simulate::ScenarioConfig c;
    c.n = 40;
    c.T = 8;
    const auto ds = simulate::make_dataset(c, 2);
    const auto rc = mp_mem(ds.W, 3);
    CHECK(rc.window_size == 3);
    CHECK(rc.values.rows() == 40);
    CHECK(rc.values.cols() == 8);
    for (int t : {0, 4, 7}) {
        const auto [w, s] = window_source(t, 8, 3);
        const auto fit = glmm::fit_window(slice(ds.W, w, 3));
        for (int i = 0; i < 40; ++i) CHECK(rc.values(i, t) == glmm::predict_x(fit, i, s));
    }
    CHECK_THROWS_AS(mp_mem(ds.W, 1), InvalidArgument);
    CHECK_THROWS_AS(mp_mem(ds.W, 9), InvalidArgument);
}

TEST_CASE("UP_MEM equals the one-slot window shim") {
    simulate::ScenarioConfig c;
    c.n = 30;
    c.T = 6;
    const auto ds = simulate::make_dataset(c, 4);
    const auto up = up_mem(ds.W);
    const auto shim = detail::mp_mem_any(ds.W, 1, std::nullopt, {});
    CHECK((up.values - shim.values).cwiseAbs().maxCoeff() <= 1e-8);
    for (int t = 0; t < 6; ++t) {
        Matrix m(30, 5);
        for (int i = 0; i < 30; ++i)
            for (int j = 0; j < 5; ++j) m(i, j) = ds.W(i, j, t);
        const auto fit = glmm::fit_pointwise(m);
        for (int i = 0; i < 30; ++i) CHECK(std::abs(up.values(i, t) - glmm::predict_x(fit, i)) <= 1e-12);
    }
}

TEST_CASE("threads do not change the reconstruction") {
    simulate::ScenarioConfig c;
    c.n = 50;
    c.T = 10;
    const auto ds = simulate::make_dataset(c, 5);
    ReconstructOptions one, many;
    many.threads = 4;
    CHECK(mp_mem(ds.W, 3, std::nullopt, one).values == mp_mem(ds.W, 3, std::nullopt, many).values);
    CHECK(up_mem(ds.W, std::nullopt, one).values == up_mem(ds.W, std::nullopt, many).values);
}

TEST_CASE("mixed-model reconstructions beat Naive") {
    simulate::ScenarioConfig c;
    c.n = 1000;
    c.T = 12;
    const auto ds = simulate::make_dataset(c, 6);
    const double naive = mse(naive_reconstruct(ds.W).values, ds.X);
    CHECK(mse(up_mem(ds.W).values, ds.X) < naive);
    CHECK(mse(mp_mem(ds.W, 3).values, ds.X) < naive);
}

TEST_CASE("many replicates: UP_MEM and Average agree") {
    simulate::ScenarioConfig c;
    c.n = 30;
    c.T = 4;
    c.J = 200;
    c.sigma_x = 1.0;
    const auto ds = simulate::make_dataset(c, 7);
    // Poisson means of at least 30 everywhere, so log(mean + 1) - log(mean) < 0.034.
    Matrix X = ds.X.array() - ds.X.minCoeff() + std::log(30.0);
    const auto W = simulate::sample_surrogates(X, 200, 8);
    const auto up = up_mem(W);
    Matrix logmean(30, 4);
    for (int i = 0; i < 30; ++i)
        for (int t = 0; t < 4; ++t) {
            double s = 0.0;
            for (int j = 0; j < 200; ++j) s += W(i, j, t);
            logmean(i, t) = std::log(s / 200.0);
        }
    CHECK((up.values - logmean).cwiseAbs().maxCoeff() <= 0.05);
    CHECK((up.values - average_reconstruct(W).values).cwiseAbs().maxCoeff() <= 0.05);
}

TEST_CASE("replicate order does not matter") {
    simulate::ScenarioConfig c;
    c.n = 40;
    c.T = 6;
    const auto ds = simulate::make_dataset(c, 9);
    SurrogateArray P(40, 5, 6);
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 5; ++j)
            for (int t = 0; t < 6; ++t) P(i, j, t) = ds.W(i, 4 - j, t);
    CHECK((up_mem(P).values - up_mem(ds.W).values).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((mp_mem(P, 3).values - mp_mem(ds.W, 3).values).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((average_reconstruct(P).values - average_reconstruct(ds.W).values).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("oracle passthrough") {
    const Matrix X = Matrix::Random(4, 5);
    const auto rc = oracle_passthrough(X);
    CHECK(rc.values == X);
    CHECK(rc.method == Method::Oracle);
}

}
