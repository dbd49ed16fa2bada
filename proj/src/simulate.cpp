#include "mfglm/simulate.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace mfglm::simulate {

namespace {
// Substream tags so that the latent curves, counts, covariates and outcomes
// of one data set never share draws.
enum StreamTag : std::uint64_t { kLatent = 1, kCounts = 2, kCovariates = 3, kOutcomes = 4 };
}  // namespace

void ScenarioConfig::validate() const {
    std::ostringstream os;
    if (n < 2) os << "n must be >= 2; ";
    if (T < 2) os << "T must be >= 2; ";
    if (D < 1 || D > T) os << "D must satisfy 1 <= D <= T; ";
    if (J < 2) os << "J must be >= 2 (replicates identify the measurement error model); ";
    if (!(sigma_x >= 0.0) || !std::isfinite(sigma_x)) os << "sigma_x must be >= 0; ";
    if (!(rho_x >= 0.0 && rho_x < 1.0)) os << "rho_x must lie in [0,1); ";
    if (R < 1) os << "R must be >= 1; ";
    if (!os.str().empty()) throw InvalidArgument("scenario: " + os.str());
}

ScenarioConfig ScenarioConfig::from(const KeyValueConfig& cfg) {
    ScenarioConfig c;
    c.n = static_cast<int>(cfg.get_int("n", c.n));
    c.T = static_cast<int>(cfg.get_int("T", c.T));
    c.J = static_cast<int>(cfg.get_int("J", c.J));
    c.sigma_x = cfg.get_double("sigma_x", c.sigma_x);
    c.rho_x = cfg.get_double("rho_x", c.rho_x);
    c.D = static_cast<int>(cfg.get_int("D", c.D));
    c.seed = cfg.get_u64("seed", c.seed);
    c.R = static_cast<int>(cfg.get_int("R", c.R));
    c.validate();
    return c;
}

double latent_mean(double t) { return 1.0 / (1.0 + std::exp(8.0 * (t - 0.5))); }

double true_beta(double t) { return std::sin(2.0 * std::numbers::pi * t); }

Vector true_beta(const FunctionalGrid& grid) {
    Vector b(grid.size());
    for (int l = 0; l < grid.size(); ++l) b[l] = true_beta(grid[l]);
    return b;
}

Vector true_alpha() { return Vector{{1.0, 2.0}}; }

Matrix sample_latent_curves(const ScenarioConfig& config, const FunctionalGrid& grid, std::uint64_t seed) {
    config.validate();
    const int T = grid.size();
    const Matrix L = cholesky_with_jitter(kernel_matrix(CovarianceKernel::ar1(config.sigma_x, config.rho_x), grid));
    Vector mu(T);
    for (int l = 0; l < T; ++l) mu[l] = latent_mean(grid[l]);
    Matrix X(config.n, T);
    Vector z(T);
    for (int i = 0; i < config.n; ++i) {
        auto rng = substream(seed, {kLatent, static_cast<std::uint64_t>(i)});
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int l = 0; l < T; ++l) z[l] = normal(rng);
        X.row(i) = (mu + L.triangularView<Eigen::Lower>() * z).transpose();
    }
    return X;
}

SurrogateArray sample_surrogates(const Matrix& X, int J, std::uint64_t seed) {
    if (!X.allFinite()) throw InvalidArgument("sample_surrogates: X must be finite");
    if (X.size() > 0 && X.maxCoeff() > 700.0) {
        throw InvalidArgument("sample_surrogates: exp(X) overflows (max X = " + std::to_string(X.maxCoeff()) +
                              "); rescale sigma_x or the mean curve");
    }
    const auto n = static_cast<int>(X.rows());
    const auto T = static_cast<int>(X.cols());
    SurrogateArray W(n, J, T);
    for (int i = 0; i < n; ++i) {
        auto rng = substream(seed, {kCounts, static_cast<std::uint64_t>(i)});
        for (int j = 0; j < J; ++j) {
            for (int t = 0; t < T; ++t) {
                std::poisson_distribution<long long> pois(std::exp(X(i, t)));
                W(i, j, t) = static_cast<double>(pois(rng));
            }
        }
    }
    return W;
}

Matrix sample_covariates(int n, std::uint64_t seed) {
    Matrix Z(n, 2);
    for (int i = 0; i < n; ++i) {
        auto rng = substream(seed, {kCovariates, static_cast<std::uint64_t>(i)});
        std::normal_distribution<double> normal(2.0, 1.0);
        std::bernoulli_distribution coin(0.6);
        Z(i, 0) = normal(rng);
        Z(i, 1) = coin(rng) ? 1.0 : 0.0;
    }
    return Z;
}

std::pair<Vector, Vector> sample_outcomes(const Matrix& X, const Matrix& Z, const FunctionalGrid& grid,
                                          std::uint64_t seed) {
    if (X.cols() != grid.size()) throw InvalidArgument("sample_outcomes: X must have T columns");
    if (Z.rows() != X.rows() || Z.cols() != 2) throw InvalidArgument("sample_outcomes: Z must be n x 2");
    const Vector beta = true_beta(grid);
    const Vector alpha = true_alpha();
    const Vector beta_w = beta.cwiseProduct(grid.weights());
    const auto n = X.rows();
    Vector eta = X * beta_w + Z * alpha;
    Vector Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        auto rng = substream(seed, {kOutcomes, static_cast<std::uint64_t>(i)});
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Y[i] = unif(rng) < expit(eta[i]) ? 1.0 : 0.0;
    }
    return {Y, eta};
}

SimulatedDataset make_dataset(const ScenarioConfig& config, int replicate) {
    config.validate();
    const std::uint64_t seed = derive_seed(config.seed, {static_cast<std::uint64_t>(replicate)});
    SimulatedDataset ds;
    ds.grid = FunctionalGrid::uniform(config.T);
    ds.X = sample_latent_curves(config, ds.grid, seed);
    ds.W = sample_surrogates(ds.X, config.J, seed);
    ds.Z = sample_covariates(config.n, seed);
    auto [Y, eta] = sample_outcomes(ds.X, ds.Z, ds.grid, seed);
    ds.Y = std::move(Y);
    ds.eta = std::move(eta);
    ds.beta = true_beta(ds.grid);
    ds.alpha = true_alpha();
    return ds;
}

MultiLevelSample SimulatedDataset::to_sample() const {
    MultiLevelSample s;
    s.grid = grid;
    s.W = W;
    s.Z = Z;
    s.Y = Y;
    s.X = X;
    s.covariate_names = {"Z1", "Z2"};
    const int n = W.subjects();
    const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
    s.subject_ids.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::string id = std::to_string(i + 1);
        s.subject_ids.push_back("s" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id);
    }
    return s;
}

}  // namespace mfglm::simulate
