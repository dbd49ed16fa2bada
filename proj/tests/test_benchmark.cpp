#include <doctest.h>

#include "mfglm/benchmark.hpp"

using namespace mfglm;
using namespace mfglm::benchmark;

TEST_SUITE("benchmark") {

TEST_CASE("smoke run with two replicates") {
    BenchmarkOptions o;
    o.scenario.n = 120;
    o.scenario.T = 12;
    o.scenario.R = 2;
    o.pipeline.K_n = 5;
    const auto r = run(o);
    CHECK(r.report.rows.size() == 6);
    CHECK(r.runs.size() == 6);
    for (const auto& row : r.report.rows) {
        CHECK(row.aimse == row.abias2 + row.avar);
        CHECK(row.replicates + row.failures == 2);
    }
    CHECK(!r.failure_limit_exceeded);
    CHECK(r.report.scenario.K_n == 5);
    CHECK(r.report.scenario.n == 120);
}

TEST_CASE("paired design and independence from D and threads") {
    BenchmarkOptions o;
    o.scenario.n = 100;
    o.scenario.T = 10;
    o.scenario.R = 3;
    o.pipeline.K_n = 4;
    o.methods = {mem::Method::Oracle, mem::Method::UP_MEM, mem::Method::Average, mem::Method::MP_MEM};
    const auto a = run(o);
    o.scenario.D = 5;
    o.threads = 2;
    const auto b = run(o);
    for (auto m : {mem::Method::Oracle, mem::Method::UP_MEM, mem::Method::Average}) {
        CHECK(a.run(m).curves == b.run(m).curves);
        CHECK(a.report.row(std::string(mem::to_string(m))).abias2 ==
              b.report.row(std::string(mem::to_string(m))).abias2);
    }
    CHECK(a.run(mem::Method::MP_MEM).curves != b.run(mem::Method::MP_MEM).curves);

    // Replicate r of the benchmark is make_dataset(scenario, r).
    const auto ds = simulate::make_dataset(o.scenario, 1).to_sample();
    pipeline::Options p = o.pipeline;
    const auto fit = pipeline::fit(ds, mem::Method::Oracle, p);
    CHECK(a.run(mem::Method::Oracle).curves.row(1).transpose() == fit.beta_curve);
}

}
