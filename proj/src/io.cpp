#include "mfglm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mfglm::io {

namespace fs = std::filesystem;

std::vector<bool> nonwear_mask(const std::vector<double>& minute_counts, int run_threshold) {
    std::vector<bool> mask(minute_counts.size(), false);
    if (run_threshold <= 0) return mask;
    std::size_t start = 0;
    while (start < minute_counts.size()) {
        if (minute_counts[start] != 0.0) {  // NaN also ends up here
            ++start;
            continue;
        }
        std::size_t end = start;
        while (end < minute_counts.size() && minute_counts[end] == 0.0) ++end;
        if (end - start >= static_cast<std::size_t>(run_threshold)) std::fill(mask.begin() + start, mask.begin() + end, true);
        start = end;
    }
    return mask;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

struct CsvReader {
    std::ifstream in;
    std::string path;
    int lineno = 0;

    explicit CsvReader(const std::string& p) : in(p), path(p) {
        if (!in) throw DataError("cannot open " + p);
    }

    // Next non-comment, non-blank line split on commas.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto t = trim(line);
            if (t.empty() || t.front() == '#') continue;
            fields.clear();
            std::size_t pos = 0;
            while (true) {
                const auto comma = line.find(',', pos);
                fields.push_back(trim(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + what);
    }
};

bool is_na(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan"; }

double parse_double(const CsvReader& r, const std::string& s, const char* what) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) r.fail(std::string("malformed ") + what + " '" + s + "'");
    return v;
}

long long parse_int(const CsvReader& r, const std::string& s, const char* what) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) r.fail(std::string("malformed ") + what + " '" + s + "'");
    return v;
}

void expect_header(CsvReader& r, const std::vector<std::string>& fields, const std::vector<std::string>& want) {
    if (fields.size() < want.size() || !std::equal(want.begin(), want.end(), fields.begin())) {
        std::string w;
        for (const auto& f : want) w += (w.empty() ? "" : ",") + f;
        r.fail("expected header starting with " + w);
    }
}

struct CovariateRow {
    double y = 0.0;
    std::vector<double> z;
    double weight = 1.0;
};

struct CovariateTable {
    std::vector<std::string> names;
    bool has_weights = false;
    std::map<std::string, CovariateRow> rows;
};

CovariateTable read_covariates(const std::string& path) {
    CsvReader r(path);
    std::vector<std::string> f;
    if (!r.next(f)) throw DataError(path + ": empty covariate file");
    expect_header(r, f, {"subject_id", "Y"});
    CovariateTable table;
    int weight_col = -1;
    std::vector<int> z_cols;
    for (std::size_t c = 2; c < f.size(); ++c) {
        if (f[c] == "weight") {
            weight_col = static_cast<int>(c);
        } else {
            z_cols.push_back(static_cast<int>(c));
            table.names.push_back(f[c]);
        }
    }
    table.has_weights = weight_col >= 0;
    const std::size_t width = f.size();
    while (r.next(f)) {
        if (f.size() != width) r.fail("expected " + std::to_string(width) + " fields, found " + std::to_string(f.size()));
        if (f[0].empty()) r.fail("empty subject_id");
        CovariateRow row;
        row.y = parse_double(r, f[1], "Y");
        if (row.y != 0.0 && row.y != 1.0) r.fail("Y must be 0 or 1");
        for (int c : z_cols) {
            if (is_na(f[static_cast<std::size_t>(c)])) r.fail("missing covariate " + table.names[row.z.size()]);
            row.z.push_back(parse_double(r, f[static_cast<std::size_t>(c)], "covariate"));
        }
        if (weight_col >= 0) {
            row.weight = parse_double(r, f[static_cast<std::size_t>(weight_col)], "weight");
            if (!(row.weight > 0.0) || !std::isfinite(row.weight)) r.fail("weight must be positive");
        }
        if (!table.rows.emplace(f[0], std::move(row)).second) r.fail("duplicate subject '" + f[0] + "'");
    }
    return table;
}

}  // namespace

IngestResult ingest(const std::string& counts_path, const std::string& covariates_path, const IngestOptions& options) {
    const int S = options.grid.slots_per_day;
    const int B = options.grid.bins;
    if (B < 2 || S < B) throw InvalidArgument("ingest: need 2 <= bins <= slots_per_day");
    if (options.min_days < 1) throw InvalidArgument("ingest: min_days must be >= 1");

    const CovariateTable covariates = read_covariates(covariates_path);

    // subject -> day -> minute values; state marks which minutes were listed.
    struct Day {
        std::vector<double> minutes;
        std::vector<char> listed;
    };
    std::map<std::string, std::map<long long, Day>> records;
    {
        CsvReader r(counts_path);
        std::vector<std::string> f;
        if (!r.next(f)) throw DataError(counts_path + ": empty count file");
        expect_header(r, f, {"subject_id", "day", "slot", "count"});
        if (f.size() != 4) r.fail("expected exactly the columns subject_id,day,slot,count");
        while (r.next(f)) {
            if (f.size() != 4) r.fail("expected 4 fields, found " + std::to_string(f.size()));
            if (f[0].empty()) r.fail("empty subject_id");
            const long long day = parse_int(r, f[1], "day");
            if (day < 1) r.fail("day must be >= 1");
            const long long slot = parse_int(r, f[2], "slot");
            if (slot < 0 || slot >= S) r.fail("slot " + f[2] + " outside [0, " + std::to_string(S) + ")");
            double count = kMissing;
            if (!is_na(f[3])) {
                count = parse_double(r, f[3], "count");
                if (count < 0.0 || count != std::floor(count)) r.fail("count must be a nonnegative integer");
            }
            if (!covariates.rows.count(f[0])) r.fail("subject '" + f[0] + "' has no row in " + covariates_path);
            Day& d = records[f[0]][day];
            if (d.minutes.empty()) {
                d.minutes.assign(static_cast<std::size_t>(S), kMissing);
                d.listed.assign(static_cast<std::size_t>(S), 0);
            }
            if (d.listed[static_cast<std::size_t>(slot)]) {
                r.fail("duplicate record for subject '" + f[0] + "', day " + f[1] + ", slot " + f[2]);
            }
            d.listed[static_cast<std::size_t>(slot)] = 1;
            d.minutes[static_cast<std::size_t>(slot)] = count;
        }
    }

    IngestResult result;
    // Per subject: binned valid days in day order.
    std::map<std::string, std::vector<std::vector<double>>> binned;
    for (const auto& [id, days] : records) {
        auto& valid = binned[id];
        for (const auto& [day, d] : days) {
            const auto mask = nonwear_mask(d.minutes, options.nonwear_run);
            std::vector<double> bins(static_cast<std::size_t>(B), kMissing);
            bool any = false;
            for (int s = 0; s < S; ++s) {
                const double v = d.minutes[static_cast<std::size_t>(s)];
                if (is_missing(v)) continue;
                ++result.input_minutes;
                if (mask[static_cast<std::size_t>(s)]) {
                    ++result.masked_minutes;
                    continue;
                }
                auto& b = bins[static_cast<std::size_t>(static_cast<long long>(s) * B / S)];
                b = is_missing(b) ? v : b + v;
                any = true;
            }
            if (any) valid.push_back(std::move(bins));
        }
    }
    result.retained_minutes = result.input_minutes - result.masked_minutes;

    std::vector<std::string> kept;
    for (const auto& [id, row] : covariates.rows) {
        auto it = binned.find(id);
        const int days = it == binned.end() ? 0 : static_cast<int>(it->second.size());
        if (days >= options.min_days) {
            kept.push_back(id);
        } else {
            ++result.dropped_subjects;
            result.warnings.push_back("subject '" + id + "' dropped: " + std::to_string(days) +
                                      " valid day(s), fewer than " + std::to_string(options.min_days));
        }
    }
    if (kept.empty()) throw DataError("ingest: no subject has at least " + std::to_string(options.min_days) + " valid days");
    std::size_t J = binned[kept.front()].size();
    for (const auto& id : kept) J = std::min(J, binned[id].size());
    for (const auto& id : kept) {
        if (binned[id].size() > J) {
            result.warnings.push_back("subject '" + id + "': days beyond the first " + std::to_string(J) +
                                      " valid days dropped to balance replicates");
        }
    }

    MultiLevelSample& s = result.sample;
    const int n = static_cast<int>(kept.size());
    const auto p = static_cast<Eigen::Index>(covariates.names.size());
    s.grid = FunctionalGrid::uniform(B);
    s.subject_ids = kept;
    s.covariate_names = covariates.names;
    s.W = SurrogateArray(n, static_cast<int>(J), B);
    s.Z = Matrix(n, p);
    s.Y = Vector(n);
    if (covariates.has_weights) s.weights = Vector(n);
    for (int i = 0; i < n; ++i) {
        const auto& days = binned[kept[static_cast<std::size_t>(i)]];
        for (std::size_t j = 0; j < J; ++j)
            for (int t = 0; t < B; ++t) s.W(i, static_cast<int>(j), t) = days[j][static_cast<std::size_t>(t)];
        const auto& row = covariates.rows.at(kept[static_cast<std::size_t>(i)]);
        s.Y[i] = row.y;
        for (Eigen::Index k = 0; k < p; ++k) s.Z(i, k) = row.z[static_cast<std::size_t>(k)];
        if (s.weights) (*s.weights)[i] = row.weight;
    }
    s.validate();
    return result;
}

KeyValueConfig read_header(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line, text;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() != '#') break;
        const auto body = trim(t.substr(1));
        if (body.find('=') != std::string::npos) text += body + "\n";
    }
    return KeyValueConfig::parse(text, path);
}

DatasetFiles::DatasetFiles(const std::string& dir)
    : counts((fs::path(dir) / "counts.csv").string()),
      covariates((fs::path(dir) / "covariates.csv").string()),
      latent((fs::path(dir) / "latent.csv").string()) {}

namespace {

std::ofstream open_output(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& header) {
    for (const auto& h : header) out << (h.rfind("#", 0) == 0 ? h : "# " + h) << '\n';
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw DataError("write failed: " + path);
}

std::string format_count(double v) {
    if (is_missing(v)) return "NA";
    if (v == std::floor(v) && std::abs(v) < 9e15) return std::to_string(static_cast<long long>(v));
    return format_double(v);
}

void check_id(const std::string& id) {
    if (id.empty() || id.find_first_of(",\n\r#") != std::string::npos || trim(id) != id)
        throw DataError("subject id '" + id + "' cannot be written to CSV");
}

}  // namespace

void export_dataset(const MultiLevelSample& sample, const std::string& dir, const std::vector<std::string>& header) {
    sample.validate();
    const DatasetFiles files(dir);
    const int n = sample.subjects();
    const int J = sample.W.replicates();
    const int T = sample.W.points();
    std::vector<std::string> head{"slots_per_day=" + std::to_string(T), "bins=" + std::to_string(T)};
    head.insert(head.end(), header.begin(), header.end());
    for (const auto& id : sample.subject_ids) check_id(id);
    {
        auto out = open_output(files.counts);
        write_header(out, head);
        out << "subject_id,day,slot,count\n";
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < J; ++j)
                for (int t = 0; t < T; ++t)
                    out << sample.subject_ids[static_cast<std::size_t>(i)] << ',' << j + 1 << ',' << t << ','
                        << format_count(sample.W(i, j, t)) << '\n';
        finish(out, files.counts);
    }
    {
        auto out = open_output(files.covariates);
        write_header(out, head);
        out << "subject_id,Y";
        for (const auto& name : sample.covariate_names) {
            if (name == "weight" || name.find(',') != std::string::npos) throw DataError("covariate name '" + name + "' cannot be written");
            out << ',' << name;
        }
        if (sample.weights) out << ",weight";
        out << '\n';
        for (int i = 0; i < n; ++i) {
            out << sample.subject_ids[static_cast<std::size_t>(i)] << ',' << format_count(sample.Y[i]);
            for (Eigen::Index k = 0; k < sample.Z.cols(); ++k) out << ',' << format_double(sample.Z(i, k));
            if (sample.weights) out << ',' << format_double((*sample.weights)[i]);
            out << '\n';
        }
        finish(out, files.covariates);
    }
    std::error_code ec;
    fs::remove(files.latent, ec);
    if (sample.X) {
        auto out = open_output(files.latent);
        write_header(out, head);
        out << "subject_id,slot,x\n";
        for (int i = 0; i < n; ++i)
            for (int t = 0; t < T; ++t)
                out << sample.subject_ids[static_cast<std::size_t>(i)] << ',' << t << ','
                    << format_double((*sample.X)(i, t)) << '\n';
        finish(out, files.latent);
    }
}

MultiLevelSample load_dataset(const std::string& dir) {
    const DatasetFiles files(dir);
    const KeyValueConfig head = read_header(files.counts);
    IngestOptions options;
    options.grid.slots_per_day = static_cast<int>(head.get_int("slots_per_day", 1440));
    options.grid.bins = static_cast<int>(head.get_int("bins", options.grid.slots_per_day));
    options.min_days = 1;
    options.nonwear_run = 0;
    MultiLevelSample sample = ingest(files.counts, files.covariates, options).sample;
    if (fs::exists(files.latent)) {
        std::map<std::string, int> index;
        for (int i = 0; i < sample.subjects(); ++i) index[sample.subject_ids[static_cast<std::size_t>(i)]] = i;
        const int T = sample.grid.size();
        Matrix X = Matrix::Constant(sample.subjects(), T, kMissing);
        CsvReader r(files.latent);
        std::vector<std::string> f;
        if (!r.next(f)) throw DataError(files.latent + ": empty file");
        expect_header(r, f, {"subject_id", "slot", "x"});
        while (r.next(f)) {
            if (f.size() != 3) r.fail("expected 3 fields");
            auto it = index.find(f[0]);
            if (it == index.end()) continue;
            const long long slot = parse_int(r, f[1], "slot");
            if (slot < 0 || slot >= T) r.fail("slot outside the grid");
            X(it->second, slot) = parse_double(r, f[2], "x");
        }
        if (X.array().isNaN().any()) throw DataError(files.latent + ": latent curves incomplete");
        sample.X = std::move(X);
    }
    return sample;
}

void export_reconstruction(const Matrix& values, const FunctionalGrid& grid, const std::vector<std::string>& ids,
                           const std::string& path, const std::vector<std::string>& header) {
    if (values.cols() != grid.size() || static_cast<std::size_t>(values.rows()) != ids.size())
        throw InvalidArgument("export_reconstruction: shape mismatch");
    auto out = open_output(path);
    write_header(out, header);
    out << "subject_id,t,xhat\n";
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        check_id(ids[static_cast<std::size_t>(i)]);
        for (int t = 0; t < grid.size(); ++t)
            out << ids[static_cast<std::size_t>(i)] << ',' << format_double(grid[t]) << ',' << format_double(values(i, t))
                << '\n';
    }
    finish(out, path);
}

void export_beta(const sofr::SofrFit& fit, const FunctionalGrid& grid, const std::string& path,
                 const std::optional<Bands>& bands, const std::vector<std::string>& header) {
    if (fit.beta_curve.size() != grid.size()) throw InvalidArgument("export_beta: curve does not match the grid");
    auto out = open_output(path);
    write_header(out, header);
    out << (bands ? "t,lower,estimate,upper\n" : "t,estimate\n");
    for (int t = 0; t < grid.size(); ++t) {
        out << format_double(grid[t]) << ',';
        if (bands) out << format_double(bands->lower[t]) << ',';
        out << format_double(fit.beta_curve[t]);
        if (bands) out << ',' << format_double(bands->upper[t]);
        out << '\n';
    }
    finish(out, path);
}

void export_coefficients(const sofr::SofrFit& fit, const std::string& path, const std::optional<Bands>& bands,
                         const std::vector<std::string>& header) {
    auto out = open_output(path);
    write_header(out, header);
    out << (bands ? "term,estimate,std_error,lower,upper\n" : "term,estimate,std_error\n");
    const auto p = fit.alpha.size();
    for (Eigen::Index k = 0; k <= p; ++k) {
        const double est = k == 0 ? fit.intercept : fit.alpha[k - 1];
        out << fit.names[static_cast<std::size_t>(k)] << ',' << format_double(est) << ','
            << format_double(std::sqrt(fit.vcov(k, k)));
        if (bands) out << ',' << format_double(bands->coef_lower[k]) << ',' << format_double(bands->coef_upper[k]);
        out << '\n';
    }
    finish(out, path);
}

void export_report(const metrics::MetricReport& report, const std::string& path, const std::vector<std::string>& header) {
    const auto& sc = report.scenario;
    std::vector<std::string> head = header;
    head.push_back("n=" + std::to_string(sc.n));
    head.push_back("T=" + std::to_string(sc.T));
    head.push_back("J=" + std::to_string(sc.J));
    head.push_back("sigma_x=" + format_double(sc.sigma_x));
    head.push_back("rho_x=" + format_double(sc.rho_x));
    head.push_back("D=" + std::to_string(sc.D));
    head.push_back("R=" + std::to_string(sc.R));
    head.push_back("K_n=" + std::to_string(sc.K_n));
    head.push_back("seed=" + std::to_string(sc.seed));
    for (const auto& row : report.rows) {
        head.push_back("abias2_se." + row.estimator + "=" + format_double(row.abias2_se));
        head.push_back("replicates." + row.estimator + "=" + std::to_string(row.replicates));
        head.push_back("failures." + row.estimator + "=" + std::to_string(row.failures));
    }
    auto out = open_output(path);
    write_header(out, head);
    out << "estimator,abias2,avar,aimse,cov_avar\n";
    for (const auto& row : report.rows) {
        out << row.estimator << ',' << format_double(row.abias2) << ',' << format_double(row.avar) << ','
            << format_double(row.aimse) << ',' << format_double(row.cov_avar) << '\n';
    }
    finish(out, path);
}

}  // namespace mfglm::io
