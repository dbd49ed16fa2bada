#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfglm/config.hpp"
#include "mfglm/inference.hpp"
#include "mfglm/metrics.hpp"
#include "mfglm/sample.hpp"
#include "mfglm/sofr.hpp"

namespace mfglm::io {

/// Flags every position inside a maximal run of zero counts of length at
/// least run_threshold. Missing minutes (NaN) end a run. A threshold of 0
/// disables masking.
std::vector<bool> nonwear_mask(const std::vector<double>& minute_counts, int run_threshold = 60);

/// Minute slots per day and the number of analysis bins they are summed into.
struct GridSpec {
    int slots_per_day = 1440;
    int bins = 24;
};

struct IngestOptions {
    GridSpec grid;
    int min_days = 4;
    int nonwear_run = 60;
};

struct IngestResult {
    MultiLevelSample sample;
    std::vector<std::string> warnings;
    long long input_minutes = 0;     // non-missing minute records
    long long masked_minutes = 0;    // of those, inside non-wear runs
    long long retained_minutes = 0;  // input - masked
    int dropped_subjects = 0;
};

/// Reads a long count file (subject_id,day,slot,count) and a covariate file
/// (subject_id,Y,<covariates...>[,weight]). Lines starting with '#' are
/// comments. Subjects are ordered by id and days by day number; only the
/// first J valid days are kept, with J the smallest valid-day count among
/// retained subjects.
IngestResult ingest(const std::string& counts_path, const std::string& covariates_path,
                    const IngestOptions& options = {});

/// "# key=value" lines at the top of a file, as a config.
KeyValueConfig read_header(const std::string& path);

/// Files written by export_dataset inside a directory.
struct DatasetFiles {
    std::string counts, covariates, latent;
    explicit DatasetFiles(const std::string& dir);
};

/// Writes counts.csv, covariates.csv and, when the sample carries X,
/// latent.csv. Each day is written with one slot per grid point, so
/// load_dataset with slots_per_day = bins = T reads it back unchanged.
void export_dataset(const MultiLevelSample& sample, const std::string& dir,
                    const std::vector<std::string>& header = {});

/// Reads a directory written by export_dataset (non-wear masking off,
/// min_days = 1, grid size taken from its header).
MultiLevelSample load_dataset(const std::string& dir);

void export_reconstruction(const Matrix& values, const FunctionalGrid& grid, const std::vector<std::string>& ids,
                           const std::string& path, const std::vector<std::string>& header = {});

using inference::Bands;

/// t,estimate[,lower,upper] rows.
void export_beta(const sofr::SofrFit& fit, const FunctionalGrid& grid, const std::string& path,
                 const std::optional<Bands>& bands = std::nullopt, const std::vector<std::string>& header = {});

/// term,estimate,std_error[,lower,upper] rows for the intercept and Z terms.
void export_coefficients(const sofr::SofrFit& fit, const std::string& path,
                         const std::optional<Bands>& bands = std::nullopt,
                         const std::vector<std::string>& header = {});

/// estimator,abias2,avar,aimse,cov_avar rows; the scenario, Monte Carlo
/// standard errors and failure counts go into the comment header.
void export_report(const metrics::MetricReport& report, const std::string& path,
                   const std::vector<std::string>& header = {});

/// 17 significant digits, enough to read back the identical double.
std::string format_double(double v);

}  // namespace mfglm::io
