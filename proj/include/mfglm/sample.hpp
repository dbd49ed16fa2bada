#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfglm/core.hpp"

namespace mfglm {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Replicate surrogate curves W_ij(t) stored subject-major as n x J x T.
/// Missing observations are NaN.
class SurrogateArray {
public:
    SurrogateArray() = default;
    SurrogateArray(int n, int J, int T, double fill = 0.0)
        : n_(n), J_(J), T_(T), data_(static_cast<std::size_t>(n) * J * T, fill) {
        if (n < 0 || J < 0 || T < 0) throw InvalidArgument("SurrogateArray: negative dimension");
    }

    int subjects() const { return n_; }
    int replicates() const { return J_; }
    int points() const { return T_; }

    double& operator()(int i, int j, int t) { return data_[index(i, j, t)]; }
    double operator()(int i, int j, int t) const { return data_[index(i, j, t)]; }

    const std::vector<double>& data() const { return data_; }

    /// Copy holding only the listed subjects, in the listed order.
    SurrogateArray select_subjects(const std::vector<int>& rows) const;

    bool operator==(const SurrogateArray& o) const;

private:
    std::size_t index(int i, int j, int t) const {
        return (static_cast<std::size_t>(i) * J_ + static_cast<std::size_t>(j)) * T_ + static_cast<std::size_t>(t);
    }
    int n_ = 0, J_ = 0, T_ = 0;
    std::vector<double> data_;
};

/// Everything the two-stage pipeline consumes: surrogate replicates,
/// error-free covariates, the binary outcome and, in simulation, the
/// latent curves.
struct MultiLevelSample {
    FunctionalGrid grid = FunctionalGrid::uniform(2);
    std::vector<std::string> subject_ids;
    SurrogateArray W;
    Matrix Z;                               // n x p
    std::vector<std::string> covariate_names;  // p names
    Vector Y;                               // n, values in {0,1}
    std::optional<Vector> weights;          // optional positive per-subject weights
    std::optional<Matrix> X;                // latent truth, n x T

    int subjects() const { return W.subjects(); }

    /// Consistency of all shapes; throws DataError.
    void validate() const;

    /// Resample/reorder subjects; ids are carried along unchanged.
    MultiLevelSample select_subjects(const std::vector<int>& rows) const;
};

}  // namespace mfglm
