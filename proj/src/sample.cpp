#include "mfglm/sample.hpp"

#include <cstring>

namespace mfglm {

SurrogateArray SurrogateArray::select_subjects(const std::vector<int>& rows) const {
    SurrogateArray out(static_cast<int>(rows.size()), J_, T_);
    const std::size_t block = static_cast<std::size_t>(J_) * T_;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int i = rows[r];
        if (i < 0 || i >= n_) throw InvalidArgument("SurrogateArray::select_subjects: index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * block), block,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(r * block));
    }
    return out;
}

bool SurrogateArray::operator==(const SurrogateArray& o) const {
    if (n_ != o.n_ || J_ != o.J_ || T_ != o.T_) return false;
    // Bitwise so that NaN (missing) compares equal to NaN.
    return data_.empty() || std::memcmp(data_.data(), o.data_.data(), data_.size() * sizeof(double)) == 0;
}

void MultiLevelSample::validate() const {
    const int n = W.subjects();
    if (W.points() != grid.size()) throw DataError("sample: W has " + std::to_string(W.points()) +
                                                   " time points but the grid has " + std::to_string(grid.size()));
    if (static_cast<int>(subject_ids.size()) != n) throw DataError("sample: subject id count does not match W");
    if (Z.rows() != n) throw DataError("sample: Z row count does not match W");
    if (static_cast<Eigen::Index>(covariate_names.size()) != Z.cols())
        throw DataError("sample: covariate name count does not match Z columns");
    if (Y.size() != n) throw DataError("sample: Y length does not match W");
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
        if (Y[i] != 0.0 && Y[i] != 1.0) throw DataError("sample: Y must be binary (0/1)");
    }
    if (weights) {
        if (weights->size() != n) throw DataError("sample: weight count does not match W");
        if ((weights->array() <= 0.0).any() || !weights->allFinite())
            throw DataError("sample: weights must be positive and finite");
    }
    if (X && (X->rows() != n || X->cols() != grid.size())) throw DataError("sample: X must be n x T");
}

MultiLevelSample MultiLevelSample::select_subjects(const std::vector<int>& rows) const {
    MultiLevelSample out;
    out.grid = grid;
    out.covariate_names = covariate_names;
    out.W = W.select_subjects(rows);
    const auto m = static_cast<Eigen::Index>(rows.size());
    out.Z.resize(m, Z.cols());
    out.Y.resize(m);
    out.subject_ids.reserve(rows.size());
    if (weights) out.weights = Vector(m);
    if (X) out.X = Matrix(m, X->cols());
    for (Eigen::Index r = 0; r < m; ++r) {
        const int i = rows[static_cast<std::size_t>(r)];
        out.subject_ids.push_back(subject_ids[static_cast<std::size_t>(i)]);
        out.Z.row(r) = Z.row(i);
        out.Y[r] = Y[i];
        if (weights) (*out.weights)[r] = (*weights)[i];
        if (X) out.X->row(r) = X->row(i);
    }
    return out;
}

}  // namespace mfglm
