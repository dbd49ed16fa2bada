#include <doctest.h>

#include "mfglm/metrics.hpp"

using namespace mfglm;
using namespace mfglm::metrics;

TEST_SUITE("metrics") {

TEST_CASE("hand fixture") {
    Matrix curves(3, 2);
    curves << 0, 0, 1, 1, 2, 2;
    const Vector truth = Vector::Ones(2);
    CHECK(abias2(curves, truth) == 0.0);
    CHECK(avar(curves) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(aimse(curves, truth) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("bias cases") {
    const Vector truth = Vector::LinSpaced(5, -1, 1);
    Matrix one = (truth.array() + 1.0).matrix().transpose();
    CHECK(abias2(one, truth) == doctest::Approx(1.0));
    Matrix two(2, 5);
    two.row(0) = (truth.array() + 1.0).matrix().transpose();
    two.row(1) = (truth.array() - 1.0).matrix().transpose();
    CHECK(abias2(two, truth) == doctest::Approx(0.0));
    CHECK(avar(two) == doctest::Approx(1.0));
    Matrix same = truth.transpose().replicate(4, 1);
    CHECK(abias2(same, truth) == 0.0);
    CHECK(avar(same) == 0.0);
    CHECK_THROWS_AS(abias2(same, Vector::Zero(3)), InvalidArgument);
}

TEST_CASE("aimse is the literal sum and metrics ignore replicate order") {
    Matrix c = Matrix::Random(17, 9);
    const Vector truth = Vector::Random(9);
    CHECK(aimse(c, truth) == abias2(c, truth) + avar(c));
    Matrix r = c.colwise().reverse();
    CHECK(abias2(r, truth) == doctest::Approx(abias2(c, truth)).epsilon(1e-13));
    CHECK(avar(r) == doctest::Approx(avar(c)).epsilon(1e-13));
}

TEST_CASE("covariate spread") {
    CHECK(covariate_spread(Matrix::Constant(4, 3, 2.5)) == 0.0);
    const Matrix X = Matrix::Random(20, 6);
    CHECK(covariate_spread(2.0 * X) == doctest::Approx(4.0 * covariate_spread(X)));
    CHECK(covariate_avar({X, 2.0 * X}) == doctest::Approx(2.5 * covariate_spread(X)));
    Matrix col(2, 1);
    col << 1.0, 3.0;
    CHECK(covariate_spread(col) == doctest::Approx(1.0));
}

TEST_CASE("spearman") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    // Ties get average ranks: ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4).
    CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(0.9486832980505138));
    // Oracle and Naive at n = 5000: higher covariate spread, lower beta AVar.
    CHECK(spearman({3.9994, 1.6983}, {0.0628, 0.1629}) == doctest::Approx(-1.0));
}

TEST_CASE("summarize and abias2 standard error") {
    Matrix c(3, 2);
    c << 0, 0, 1, 1, 2, 2;
    const auto row = summarize("X", c, Vector::Ones(2), {1.0, 2.0, 3.0}, 1);
    CHECK(row.aimse == row.abias2 + row.avar);
    CHECK(row.cov_avar == doctest::Approx(2.0));
    CHECK(row.replicates == 3);
    CHECK(row.failures == 1);
    CHECK(abias2_se(c.topRows(1), Vector::Ones(2)) == 0.0);
    CHECK(abias2_se(c, Vector::Zero(2)) > 0.0);
}

}
