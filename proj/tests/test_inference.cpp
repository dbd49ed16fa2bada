#include <doctest.h>

#include "mfglm/inference.hpp"
#include "mfglm/simulate.hpp"

using namespace mfglm;
using namespace mfglm::inference;

namespace {

MultiLevelSample oracle_sample(int n, int replicate) {
    simulate::ScenarioConfig c;
    c.n = n;
    c.T = 20;
    return simulate::make_dataset(c, replicate).to_sample();
}

pipeline::Options small_basis() {
    pipeline::Options o;
    o.K_n = 5;
    return o;
}

}  // namespace

TEST_SUITE("inference") {

TEST_CASE("type-7 quantiles") {
    CHECK(quantile({4, 1, 3, 2}, 0.5) == 2.5);
    CHECK(quantile({1, 2, 3, 4}, 0.25) == 1.75);
    CHECK(quantile({1, 2, 3, 4}, 0.0) == 1.0);
    CHECK(quantile({1, 2, 3, 4}, 1.0) == 4.0);
    CHECK(quantile({7}, 0.3) == 7.0);
    CHECK_THROWS_AS(quantile({}, 0.5), InvalidArgument);
}

TEST_CASE("bands are the percentiles of the stored curves") {
    const auto s = oracle_sample(300, 1);
    BootstrapOptions b;
    b.B = 50;
    b.seed = 11;
    const auto r = bootstrap(s, mem::Method::Oracle, small_basis(), b);
    CHECK(r.curves.rows() == 50);
    CHECK(r.coefficients.rows() == 50);
    CHECK(r.coefficients.cols() == 3);
    CHECK(r.indices.size() == 50);
    CHECK(r.failures == 0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> v(r.curves.col(t).data(), r.curves.col(t).data() + 50);
        CHECK(r.bands.lower[t] == quantile(v, (1.0 - b.level) / 2.0));
        CHECK(r.bands.upper[t] == quantile(v, 1.0 - (1.0 - b.level) / 2.0));
        CHECK(r.bands.lower[t] <= r.bands.upper[t]);
    }
    for (const auto& idx : r.indices) {
        CHECK(idx.size() == 300);
        for (int i : idx) CHECK((i >= 0 && i < 300));
    }
}

TEST_CASE("identical seeds give identical bands regardless of threads") {
    const auto s = oracle_sample(200, 2);
    BootstrapOptions b;
    b.B = 60;
    b.seed = 5;
    const auto r1 = bootstrap(s, mem::Method::Oracle, small_basis(), b);
    b.threads = 3;
    const auto r2 = bootstrap(s, mem::Method::Oracle, small_basis(), b);
    CHECK(r1.bands.lower == r2.bands.lower);
    CHECK(r1.bands.upper == r2.bands.upper);
    CHECK(r1.indices == r2.indices);
    b.seed = 6;
    const auto r3 = bootstrap(s, mem::Method::Oracle, small_basis(), b);
    CHECK(r3.bands.lower != r1.bands.lower);
}

TEST_CASE("point estimate lies inside its band") {
    const auto s = oracle_sample(500, 3);
    const auto fit = pipeline::fit(s, mem::Method::Oracle, small_basis());
    BootstrapOptions b;
    b.B = 100;
    b.seed = 8;
    const auto r = bootstrap(s, mem::Method::Oracle, small_basis(), b);
    int inside = 0;
    for (int t = 0; t < 20; ++t) inside += fit.beta_curve[t] >= r.bands.lower[t] && fit.beta_curve[t] <= r.bands.upper[t];
    CHECK(inside >= 19);
    for (int c = 0; c < 3; ++c) CHECK(r.bands.coef_lower[c] <= r.bands.coef_upper[c]);
}

TEST_CASE("degenerate resamples are redrawn") {
    auto s = oracle_sample(40, 4);
    s.Y.setOnes();
    s.Y[0] = 0.0;
    s.Y[1] = 0.0;
    BootstrapOptions b;
    b.B = 50;
    b.seed = 2;
    const auto r = bootstrap(s, mem::Method::Naive, small_basis(), b);
    CHECK(r.redraws > 0);
    for (std::size_t k = 0; k < r.indices.size(); ++k) {
        if (r.failed[k]) continue;
        bool zero = false;
        for (int i : r.indices[k]) zero = zero || i < 2;
        CHECK(zero);
    }
}

TEST_CASE("too many failures is an error") {
    auto s = oracle_sample(60, 5);
    s.X.reset();  // every oracle fit now fails
    BootstrapOptions b;
    b.B = 50;
    CHECK_THROWS_AS(bootstrap(s, mem::Method::Oracle, small_basis(), b), NumericalError);
    b.B = 10;
    CHECK_THROWS_AS(bootstrap(s, mem::Method::Naive, small_basis(), b), InvalidArgument);
}

}
