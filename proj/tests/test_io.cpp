#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfglm/io.hpp"
#include "mfglm/simulate.hpp"

using namespace mfglm;
using namespace mfglm::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("mfglm_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<double> day_with_zero_run(int length, int start, int run) {
    std::vector<double> d(static_cast<std::size_t>(length), 5.0);
    for (int k = start; k < start + run; ++k) d[static_cast<std::size_t>(k)] = 0.0;
    return d;
}

// One subject-day of minute counts: slot s has count (s % 7) + 1 unless
// inside [zero_from, zero_to).
void write_day(std::ostream& out, const std::string& id, int day, int slots, int zero_from = -1, int zero_to = -1) {
    for (int s = 0; s < slots; ++s) {
        const int c = s >= zero_from && s < zero_to ? 0 : (s % 7) + 1;
        out << id << ',' << day << ',' << s << ',' << c << '\n';
    }
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("non-wear threshold is inclusive at 60") {
    const auto m60 = nonwear_mask(day_with_zero_run(200, 50, 60));
    for (int k = 0; k < 200; ++k) CHECK(m60[k] == (k >= 50 && k < 110));
    const auto m59 = nonwear_mask(day_with_zero_run(200, 50, 59));
    for (bool b : m59) CHECK(!b);
    const auto none = nonwear_mask(std::vector<double>(100, 3.0));
    for (bool b : none) CHECK(!b);
    // A missing minute ends a run.
    auto split = day_with_zero_run(200, 50, 80);
    split[120] = kMissing;  // 70 zeros, NA, 9 zeros
    const auto ms = nonwear_mask(split);
    CHECK(ms[60]);
    CHECK(!ms[120]);
    CHECK(!ms[125]);
    split[90] = kMissing;  // 40 and 29 zeros: neither qualifies
    for (bool b : nonwear_mask(split)) CHECK(!b);
    CHECK(nonwear_mask(day_with_zero_run(200, 0, 200), 0)[5] == false);
}

TEST_CASE("ingest: days, bins, masking and drops") {
    const auto dir = scratch("ingest");
    const int S = 240, B = 4;  // 60-minute bins
    {
        std::ofstream cov(dir / "cov.csv");
        cov << "subject_id,Y,age,female\n";
        cov << "b,1,40,1\n" << "a,0,35,0\n" << "c,1,50,1\n";
        std::ofstream cnt(dir / "counts.csv");
        cnt << "subject_id,day,slot,count\n";
        for (int day = 1; day <= 5; ++day) write_day(cnt, "a", day, S, day == 2 ? 60 : -1, day == 2 ? 120 : -1);
        for (int day = 1; day <= 4; ++day) write_day(cnt, "b", day, S);
        for (int day = 1; day <= 3; ++day) write_day(cnt, "c", day, S);  // too few days
    }
    IngestOptions o;
    o.grid = {S, B};
    const auto res = ingest((dir / "counts.csv").string(), (dir / "cov.csv").string(), o);
    const auto& s = res.sample;
    CHECK(s.subject_ids == std::vector<std::string>{"a", "b"});
    CHECK(res.dropped_subjects == 1);
    CHECK(s.W.replicates() == 4);
    CHECK(s.W.points() == B);
    CHECK(s.covariate_names == std::vector<std::string>{"age", "female"});
    CHECK(s.Z(0, 0) == 35.0);
    CHECK(s.Y[1] == 1.0);
    // Day 2 of subject a: bin 1 (minutes 60..119) fully masked.
    CHECK(is_missing(s.W(0, 1, 1)));
    CHECK(!is_missing(s.W(0, 1, 0)));
    double bin0 = 0.0;
    for (int m = 0; m < 60; ++m) bin0 += (m % 7) + 1;
    CHECK(s.W(1, 0, 0) == bin0);
    CHECK(res.masked_minutes == 60);
    CHECK(res.retained_minutes == res.input_minutes - res.masked_minutes);
    CHECK(!res.warnings.empty());
}

TEST_CASE("ingest is row-order independent and rejects bad input") {
    const auto dir = scratch("order");
    std::vector<std::string> rows;
    {
        std::ostringstream o;
        for (const char* id : {"x", "y"})
            for (int d = 1; d <= 4; ++d) write_day(o, id, d, 48);
        std::istringstream in(o.str());
        for (std::string line; std::getline(in, line);) rows.push_back(line);
    }
    std::ofstream(dir / "cov.csv") << "subject_id,Y,z\nx,1,0.5\ny,0,1.5\n";
    auto write = [&](const fs::path& p, const std::vector<std::string>& r) {
        std::ofstream out(p);
        out << "subject_id,day,slot,count\n";
        for (const auto& l : r) out << l << '\n';
    };
    write(dir / "a.csv", rows);
    std::vector<std::string> rev(rows.rbegin(), rows.rend());
    write(dir / "b.csv", rev);
    IngestOptions o;
    o.grid = {48, 4};
    const auto a = ingest((dir / "a.csv").string(), (dir / "cov.csv").string(), o).sample;
    const auto b = ingest((dir / "b.csv").string(), (dir / "cov.csv").string(), o).sample;
    CHECK(a.W == b.W);

    auto dup = rows;
    dup.push_back(rows.front());
    write(dir / "dup.csv", dup);
    CHECK_THROWS_AS(ingest((dir / "dup.csv").string(), (dir / "cov.csv").string(), o), DataError);
    auto stranger = rows;
    stranger.push_back("zz,1,0,3");
    write(dir / "s.csv", stranger);
    CHECK_THROWS_AS(ingest((dir / "s.csv").string(), (dir / "cov.csv").string(), o), DataError);
    auto bad = rows;
    bad.push_back("x,1,0,abc");
    write(dir / "bad.csv", bad);
    try {
        ingest((dir / "bad.csv").string(), (dir / "cov.csv").string(), o);
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(std::to_string(rows.size() + 2)) != std::string::npos);
    }
}

TEST_CASE("dataset export and reload round trip") {
    simulate::ScenarioConfig c;
    c.n = 25;
    c.T = 12;
    const auto sample = simulate::make_dataset(c, 1).to_sample();
    const auto d1 = scratch("rt1");
    export_dataset(sample, d1.string(), {"seed=1"});
    const auto back = load_dataset(d1.string());
    CHECK(back.W == sample.W);
    CHECK(back.Y == sample.Y);
    CHECK(back.Z == sample.Z);
    CHECK(back.subject_ids == sample.subject_ids);
    REQUIRE(back.X.has_value());
    CHECK(*back.X == *sample.X);

    const auto d2 = scratch("rt2");
    export_dataset(back, d2.string(), {"seed=1"});
    for (const char* f : {"counts.csv", "covariates.csv", "latent.csv"}) CHECK(slurp(d1 / f) == slurp(d2 / f));

    // Ingest with real thresholds reproduces W as well (no zero runs of 60).
    IngestOptions o;
    o.grid = {12, 12};
    o.min_days = 4;
    const DatasetFiles files(d1.string());
    CHECK(ingest(files.counts, files.covariates, o).sample.W == sample.W);
    CHECK(read_header(files.counts).get_int("bins", 0) == 12);
}

TEST_CASE("report schema and number format") {
    metrics::MetricReport r;
    r.scenario.n = 10;
    r.rows.push_back(metrics::summarize("Oracle", Matrix::Zero(2, 3), Vector::Zero(3), {0.5, 0.5}));
    const auto dir = scratch("report");
    export_report(r, (dir / "r.csv").string());
    std::ifstream in(dir / "r.csv");
    std::string line, header;
    while (std::getline(in, line))
        if (line.rfind("#", 0) != 0) {
            header = line;
            break;
        }
    CHECK(header == "estimator,abias2,avar,aimse,cov_avar");
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(kMissing) == "NA");
}

}
