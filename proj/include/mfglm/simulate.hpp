#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "mfglm/config.hpp"
#include "mfglm/core.hpp"
#include "mfglm/sample.hpp"

namespace mfglm::simulate {

/// One simulation scenario. Defaults follow the desk-scale benchmark.
struct ScenarioConfig {
    int n = 500;
    int T = 50;
    int J = 5;
    double sigma_x = 2.0;
    double rho_x = 0.5;
    int D = 3;
    std::uint64_t seed = 20240417;
    int R = 100;

    void validate() const;

    /// Reads n, T, J, sigma_x, rho_x, D, seed, R (all optional).
    static ScenarioConfig from(const KeyValueConfig& cfg);
};

/// A generated data set together with the quantities used to create it.
struct SimulatedDataset {
    FunctionalGrid grid = FunctionalGrid::uniform(2);
    Matrix X;          // n x T latent curves
    SurrogateArray W;  // n x J x T counts
    Matrix Z;          // n x 2: Z1 ~ N(2,1), Z2 ~ Bernoulli(0.6)
    Vector Y;          // n binary outcomes
    Vector eta;        // n linear predictors
    Vector beta;       // beta(t) on the grid
    Vector alpha;      // (1, 2)

    /// The pipeline view: zero-padded ids, covariates named Z1, Z2, X kept as truth.
    MultiLevelSample to_sample() const;
};

/// Mean of the latent process, 1 / (1 + exp(8 (t - 0.5))).
double latent_mean(double t);

/// The true coefficient function sin(2 pi t).
double true_beta(double t);
Vector true_beta(const FunctionalGrid& grid);
Vector true_alpha();

Matrix sample_latent_curves(const ScenarioConfig& config, const FunctionalGrid& grid, std::uint64_t seed);

/// Independent Poisson(exp(X_it)) counts for every replicate j.
SurrogateArray sample_surrogates(const Matrix& X, int J, std::uint64_t seed);

/// Z1 ~ N(2, 1) and Z2 ~ Bernoulli(0.6), independently.
Matrix sample_covariates(int n, std::uint64_t seed);

/// Y_i ~ Bernoulli(expit(eta_i)), eta_i = int beta X_i + Z_i alpha.
/// Returns (Y, eta).
std::pair<Vector, Vector> sample_outcomes(const Matrix& X, const Matrix& Z, const FunctionalGrid& grid,
                                          std::uint64_t seed);

/// Full data set for Monte Carlo replicate `replicate` of the configured seed.
/// Depends only on (n, T, J, sigma_x, rho_x, seed, replicate), never on D or R.
SimulatedDataset make_dataset(const ScenarioConfig& config, int replicate = 0);

}  // namespace mfglm::simulate
