#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mfglm/glmm.hpp"
#include "mfglm/sample.hpp"

namespace mfglm::mem {

enum class Method { UP_MEM, MP_MEM, PACE, Average, Naive, Oracle };

std::string_view to_string(Method method);
/// Accepts the canonical names and their lowercase forms (up_mem, pace, ...).
Method parse_method(std::string_view name);
const std::vector<Method>& all_methods();

/// Fit summary for one point-wise or window mixed model.
struct FitDiagnostics {
    int first_slot = 0;  // grid index of the window's first time point
    bool converged = true;
    bool degenerate = false;
    int iterations = 0;
    double mu_hat = 0.0;
    std::vector<double> var_components;
};

/// n x T reconstruction of the latent curves by one method.
struct ReconstructedCovariate {
    Method method = Method::Oracle;
    Matrix values;
    int window_size = 1;
    std::vector<FitDiagnostics> diagnostics;
    /// Extra method-specific notes (PACE: components kept, noise variance).
    std::vector<std::pair<std::string, double>> meta;

    int unconverged() const;
    int degenerate() const;
};

struct ReconstructOptions {
    glmm::FitOptions glmm;
    int threads = 1;
};

/// One random-intercept mixed model per time point; X_hat_i(t) is the
/// predicted subject mean on the link scale.
ReconstructedCovariate up_mem(const SurrogateArray& W, const std::optional<Vector>& weights = std::nullopt,
                              const ReconstructOptions& options = {});

/// Sliding window of D adjacent points fitted jointly; each time point takes
/// the prediction of the window that centres it (slot (D-1)/2, 0-based), and
/// the first and last (D-1)/2 points use the first and last windows.
ReconstructedCovariate mp_mem(const SurrogateArray& W, int D, const std::optional<Vector>& weights = std::nullopt,
                              const ReconstructOptions& options = {});

/// log(mean_j W_ij(t) + 1).
ReconstructedCovariate average_reconstruct(const SurrogateArray& W);

/// log(W_i1(t) + 1).
ReconstructedCovariate naive_reconstruct(const SurrogateArray& W);

/// The latent curves themselves (simulation only).
ReconstructedCovariate oracle_passthrough(const Matrix& X);

/// Window index and slot that supply X_hat at time t in mp_mem.
std::pair<int, int> window_source(int t, int T, int D);

namespace detail {
/// mp_mem without the D >= 2 contract.
ReconstructedCovariate mp_mem_any(const SurrogateArray& W, int D, const std::optional<Vector>& weights,
                                  const ReconstructOptions& options);
}  // namespace detail

}  // namespace mfglm::mem
