// Command-line front end: simulate, reconstruct, fit, bootstrap, benchmark, ingest.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mfglm/benchmark.hpp"
#include "mfglm/inference.hpp"
#include "mfglm/io.hpp"
#include "mfglm/parallel.hpp"
#include "mfglm/pipeline.hpp"
#include "mfglm/simulate.hpp"

namespace fs = std::filesystem;
using namespace mfglm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

// Flags shared by every subcommand. Each one, when given, overrides the
// config key of the same meaning.
struct Flags {
    std::string config, out = "out", data, method, counts, covariates;
    std::uint64_t seed = 0;
    int D = 0, K = 0, B = 0, threads = 0;
};

struct Command {
    CLI::App* app = nullptr;
    std::vector<std::string> keys;  // valid config keys
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "key=value config file ('#' comments)")->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--threads", f.threads, "worker threads (default: all cores)");
    app->add_option("--out", f.out, "output directory")->capture_default_str();
}

// Merges the config file with explicitly given flags.
KeyValueConfig resolve(const Command& cmd, const Flags& f) {
    KeyValueConfig cfg = f.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(f.config);
    cfg.require_keys_in(cmd.keys);
    auto given = [&](const char* flag) {
        const auto* opt = cmd.app->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
    };
    if (given("--seed")) cfg.set("seed", std::to_string(f.seed));
    if (given("--method")) cfg.set("method", f.method);
    if (given("--D")) cfg.set("D", std::to_string(f.D));
    if (given("--K")) cfg.set("K_n", std::to_string(f.K));
    if (given("--B")) cfg.set("B", std::to_string(f.B));
    if (given("--data")) cfg.set("data", f.data);
    if (given("--counts")) cfg.set("counts", f.counts);
    if (given("--covariates")) cfg.set("covariates", f.covariates);
    return cfg;
}

std::vector<std::string> header_of(const std::string& command, const KeyValueConfig& cfg) {
    std::vector<std::string> h{"command=" + command};
    for (const auto& [k, v] : cfg.entries()) h.push_back(k + "=" + v);
    return h;
}

int threads_of(const Flags& f) { return resolve_threads(f.threads); }

std::string out_path(const Flags& f, const std::string& name) { return (fs::path(f.out) / name).string(); }

pipeline::Options pipeline_options(const KeyValueConfig& cfg, int threads) {
    pipeline::Options o;
    o.D = static_cast<int>(cfg.get_int("D", o.D));
    o.K_n = static_cast<int>(cfg.get_int("K_n", o.K_n));
    o.degree = static_cast<int>(cfg.get_int("degree", o.degree));
    o.fpca.fve_target = cfg.get_double("fve", o.fpca.fve_target);
    const auto coding = cfg.get_string("coding", "nested");
    if (coding == "nested") o.reconstruct.glmm.coding = glmm::WindowCoding::Nested;
    else if (coding == "reference") o.reconstruct.glmm.coding = glmm::WindowCoding::Reference;
    else throw InvalidArgument("coding must be 'nested' or 'reference', got '" + coding + "'");
    o.reconstruct.threads = threads;
    return o;
}

const std::vector<std::string> kScenarioKeys{"n", "T", "J", "sigma_x", "rho_x", "D", "seed", "R"};
const std::vector<std::string> kPipelineKeys{"D", "K_n", "degree", "fve", "coding"};

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void print_summary(const MultiLevelSample& s) {
    std::printf("n=%d T=%d J=%d prevalence=%.6f\n", s.subjects(), s.grid.size(), s.W.replicates(), s.Y.mean());
}

int cmd_simulate(const Command& cmd, const Flags& f) {
    auto cfg = resolve(cmd, f);
    const auto scenario = simulate::ScenarioConfig::from(cfg);
    scenario.validate();
    const int replicate = static_cast<int>(cfg.get_int("replicate", 0));
    const auto sample = simulate::make_dataset(scenario, replicate).to_sample();
    io::export_dataset(sample, f.out, header_of("simulate", cfg));
    print_summary(sample);
    return 0;
}

MultiLevelSample load_input(const KeyValueConfig& cfg) {
    const auto dir = cfg.get_string("data", "");
    if (dir.empty()) throw InvalidArgument("no input data set: pass --data DIR or set data= in the config");
    return io::load_dataset(dir);
}

int cmd_reconstruct(const Command& cmd, const Flags& f) {
    auto cfg = resolve(cmd, f);
    const auto sample = load_input(cfg);
    const auto method = mem::parse_method(cfg.get_string("method", "MP_MEM"));
    const auto rc = pipeline::reconstruct(sample, method, pipeline_options(cfg, threads_of(f)));
    io::export_reconstruction(rc.values, sample.grid, sample.subject_ids, out_path(f, "xhat.csv"),
                              header_of("reconstruct", cfg));
    if (rc.unconverged() > 0)
        std::fprintf(stderr, "warning: %d mixed-model fits did not converge\n", rc.unconverged());
    std::printf("method=%s n=%d T=%d\n", std::string(mem::to_string(method)).c_str(), sample.subjects(),
                sample.grid.size());
    return 0;
}

void write_indices(const inference::BootstrapResult& boot, const std::string& path,
                   const std::vector<std::string>& header) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    for (const auto& h : header) out << "# " << h << '\n';
    out << "resample,failed,subjects\n";
    for (std::size_t b = 0; b < boot.indices.size(); ++b) {
        out << b << ',' << (boot.failed[b] ? 1 : 0) << ',';
        for (std::size_t k = 0; k < boot.indices[b].size(); ++k) out << (k ? " " : "") << boot.indices[b][k];
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

int fit_and_write(const std::string& name, const Command& cmd, const Flags& f, int default_B) {
    auto cfg = resolve(cmd, f);
    const auto sample = load_input(cfg);
    const auto method = mem::parse_method(cfg.get_string("method", "MP_MEM"));
    const int threads = threads_of(f);
    const auto options = pipeline_options(cfg, threads);
    const auto fit = pipeline::fit(sample, method, options);
    const int B = static_cast<int>(cfg.get_int("B", default_B));
    const auto header = header_of(name, cfg);

    std::optional<inference::Bands> bands;
    if (B > 0) {
        inference::BootstrapOptions bo;
        bo.B = B;
        bo.level = cfg.get_double("level", bo.level);
        bo.seed = cfg.get_u64("seed", bo.seed);
        bo.threads = threads;
        const auto boot = inference::bootstrap(sample, method, options, bo);
        bands = boot.bands;
        write_indices(boot, out_path(f, "bootstrap_indices.csv"), header);
        std::printf("bootstrap B=%d failed=%d redraws=%d\n", B, boot.failures, boot.redraws);
    }
    io::export_beta(fit, sample.grid, out_path(f, "beta.csv"), bands, header);
    io::export_coefficients(fit, out_path(f, "coefficients.csv"), bands, header);
    std::printf("method=%s converged=%d loglik=%.6f omega_rank=%d\n", std::string(mem::to_string(method)).c_str(),
                fit.converged ? 1 : 0, fit.loglik, fit.omega_rank);
    if (fit.separated) std::fprintf(stderr, "warning: the outcome regression shows signs of separation\n");
    return 0;
}

int cmd_benchmark(const Command& cmd, const Flags& f) {
    auto cfg = resolve(cmd, f);
    // Scenario keys may hold comma-separated grids; the scalar view takes
    // their first entries.
    KeyValueConfig scalar = cfg;
    for (const char* key : {"n", "sigma_x", "rho_x", "D"})
        if (cfg.contains(key)) scalar.set(key, split_list(*cfg.get(key)).front());
    const auto base = simulate::ScenarioConfig::from(scalar);
    const auto ns = cfg.get_ints("n", {base.n});
    const auto sigmas = cfg.get_doubles("sigma_x", {base.sigma_x});
    const auto rhos = cfg.get_doubles("rho_x", {base.rho_x});
    const auto Ds = cfg.get_ints("D", {base.D});
    std::vector<mem::Method> methods;
    for (const auto& m : cfg.get_strings("methods", {})) methods.push_back(mem::parse_method(m));
    if (methods.empty()) methods = mem::all_methods();

    fs::create_directories(f.out);
    std::ofstream combined(out_path(f, "combined.csv"));
    for (const auto& h : header_of("benchmark", cfg)) combined << "# " << h << '\n';
    combined << "scenario,n,sigma_x,rho_x,D,estimator,abias2,abias2_se,avar,aimse,cov_avar,replicates,failures\n";
    std::ofstream log(out_path(f, "failures.log"));

    bool exceeded = false;
    int index = 0;
    for (auto n : ns)
        for (double sigma : sigmas)
            for (double rho : rhos)
                for (auto D : Ds) {
                    benchmark::BenchmarkOptions bo;
                    bo.scenario = base;
                    bo.scenario.n = static_cast<int>(n);
                    bo.scenario.sigma_x = sigma;
                    bo.scenario.rho_x = rho;
                    bo.scenario.D = static_cast<int>(D);
                    bo.methods = methods;
                    bo.threads = threads_of(f);
                    bo.pipeline = pipeline_options(scalar, 1);
                    const auto result = benchmark::run(bo);

                    char file[64];
                    std::snprintf(file, sizeof file, "report_%03d.csv", index);
                    io::export_report(result.report, out_path(f, file), {"command=benchmark"});
                    for (const auto& row : result.report.rows) {
                        combined << index << ',' << n << ',' << io::format_double(sigma) << ','
                                 << io::format_double(rho) << ',' << D << ',' << row.estimator << ','
                                 << io::format_double(row.abias2) << ',' << io::format_double(row.abias2_se) << ','
                                 << io::format_double(row.avar) << ',' << io::format_double(row.aimse) << ','
                                 << io::format_double(row.cov_avar) << ',' << row.replicates << ',' << row.failures
                                 << '\n';
                        std::printf("[%d] n=%lld sigma_x=%g rho_x=%g D=%lld %-8s abias2=%.5f avar=%.5f aimse=%.5f\n",
                                    index, n, sigma, rho, D, row.estimator.c_str(), row.abias2, row.avar, row.aimse);
                    }
                    for (const auto& line : result.log) log << "[" << index << "] " << line << '\n';
                    exceeded = exceeded || result.failure_limit_exceeded;
                    ++index;
                }
    if (!combined || !log) throw DataError("cannot write benchmark output under " + f.out);
    if (exceeded) {
        std::fprintf(stderr, "error: more than 5%% of replicates failed for some estimator; see failures.log\n");
        return kExitNumerical;
    }
    return 0;
}

int cmd_ingest(const Command& cmd, const Flags& f) {
    auto cfg = resolve(cmd, f);
    io::IngestOptions o;
    o.grid.slots_per_day = static_cast<int>(cfg.get_int("slots_per_day", o.grid.slots_per_day));
    o.grid.bins = static_cast<int>(cfg.get_int("bins", o.grid.bins));
    o.min_days = static_cast<int>(cfg.get_int("min_days", o.min_days));
    o.nonwear_run = static_cast<int>(cfg.get_int("nonwear_run", o.nonwear_run));
    const auto counts = cfg.get_string("counts", "");
    const auto covariates = cfg.get_string("covariates", "");
    if (counts.empty() || covariates.empty()) throw InvalidArgument("ingest needs --counts and --covariates");
    const auto result = io::ingest(counts, covariates, o);
    for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    io::export_dataset(result.sample, f.out, header_of("ingest", cfg));
    std::printf("minutes input=%lld masked=%lld retained=%lld dropped_subjects=%d\n", result.input_minutes,
                result.masked_minutes, result.retained_minutes, result.dropped_subjects);
    print_summary(result.sample);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage measurement-error correction for functional logistic regression"};
    app.require_subcommand(1);
    Flags f;

    auto* sim = app.add_subcommand("simulate", "simulate one data set");
    auto* rec = app.add_subcommand("reconstruct", "stage one only: write X-hat curves");
    auto* fit = app.add_subcommand("fit", "fit beta(t) and the scalar coefficients");
    auto* boot = app.add_subcommand("bootstrap", "fit with percentile bootstrap bands");
    auto* bench = app.add_subcommand("benchmark", "Monte Carlo comparison of the estimators");
    auto* ing = app.add_subcommand("ingest", "turn minute-level counts into a data set");

    const auto fit_keys = join({"data", "method", "seed", "B", "level"}, kPipelineKeys);
    std::vector<Command> commands{
        {sim, join(kScenarioKeys, {"replicate"})},
        {rec, join({"data", "method", "seed"}, kPipelineKeys)},
        {fit, fit_keys},
        {boot, fit_keys},
        {bench, join(join(kScenarioKeys, kPipelineKeys), {"methods"})},
        {ing, {"counts", "covariates", "slots_per_day", "bins", "min_days", "nonwear_run", "seed"}},
    };
    for (auto& c : commands) add_common(c.app, f);
    for (auto* a : {rec, fit, boot}) {
        a->add_option("--data", f.data, "data set directory (as written by simulate or ingest)");
        a->add_option("--method", f.method, "UP_MEM, MP_MEM, PACE, Average, Naive or Oracle");
        a->add_option("--D", f.D, "MP_MEM window size");
    }
    for (auto* a : {fit, boot, bench}) a->add_option("--K", f.K, "number of B-spline basis functions");
    for (auto* a : {fit, boot}) a->add_option("--B", f.B, "bootstrap resamples");
    bench->add_option("--D", f.D, "MP_MEM window size");
    ing->add_option("--counts", f.counts, "subject_id,day,slot,count file");
    ing->add_option("--covariates", f.covariates, "subject_id,Y,covariates...[,weight] file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*sim) return cmd_simulate(commands[0], f);
        if (*rec) return cmd_reconstruct(commands[1], f);
        if (*fit) return fit_and_write("fit", commands[2], f, 0);
        if (*boot) return fit_and_write("bootstrap", commands[3], f, 1000);
        if (*bench) return cmd_benchmark(commands[4], f);
        if (*ing) return cmd_ingest(commands[5], f);
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitNumerical;
    }
    return kExitUsage;
}
