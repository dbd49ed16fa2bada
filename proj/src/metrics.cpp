#include "mfglm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfglm::metrics {

namespace {

void check_curves(const Matrix& curves, const char* what) {
    if (curves.rows() < 1) throw InvalidArgument(std::string(what) + ": need at least one replicate curve");
}

}  // namespace

double abias2(const Matrix& curves, const Vector& truth) {
    check_curves(curves, "abias2");
    if (curves.cols() != truth.size()) throw InvalidArgument("abias2: curve length does not match the truth");
    const Vector mean = curves.colwise().mean().transpose();
    return (mean - truth).squaredNorm() / static_cast<double>(truth.size());
}

double avar(const Matrix& curves) {
    check_curves(curves, "avar");
    const Eigen::RowVectorXd mean = curves.colwise().mean();
    return (curves.rowwise() - mean).squaredNorm() / static_cast<double>(curves.rows() * curves.cols());
}

double aimse(const Matrix& curves, const Vector& truth) { return abias2(curves, truth) + avar(curves); }

double abias2_se(const Matrix& curves, const Vector& truth) {
    const auto R = curves.rows();
    if (R < 2) return 0.0;
    // Per-replicate influence of the mean on the grid-averaged squared bias.
    const Vector bias = curves.colwise().mean().transpose() - truth;
    const auto G = static_cast<double>(truth.size());
    Vector influence(R);
    const Eigen::RowVectorXd mean = curves.colwise().mean();
    for (Eigen::Index r = 0; r < R; ++r) influence[r] = 2.0 * (curves.row(r) - mean).dot(bias.transpose()) / G;
    const double var = influence.squaredNorm() / static_cast<double>(R - 1);
    return std::sqrt(var / static_cast<double>(R));
}

double covariate_spread(const Matrix& Xhat) {
    if (Xhat.rows() < 1 || Xhat.cols() < 1) throw InvalidArgument("covariate_spread: empty reconstruction");
    const Eigen::RowVectorXd mean = Xhat.colwise().mean();
    return (Xhat.rowwise() - mean).squaredNorm() / static_cast<double>(Xhat.rows() * Xhat.cols());
}

double covariate_avar(const std::vector<Matrix>& reconstructions) {
    if (reconstructions.empty()) throw InvalidArgument("covariate_avar: need at least one reconstruction");
    const auto T = reconstructions.front().cols();
    double sum = 0.0;
    for (const auto& X : reconstructions) {
        if (X.cols() != T) throw InvalidArgument("covariate_avar: reconstructions disagree on the grid length");
        sum += covariate_spread(X);
    }
    return sum / static_cast<double>(reconstructions.size());
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t a = 0; a < order.size();) {
        std::size_t b = a;
        while (b + 1 < order.size() && v[order[b + 1]] == v[order[a]]) ++b;
        const double avg = 0.5 * static_cast<double>(a + b) + 1.0;
        for (std::size_t k = a; k <= b; ++k) r[order[k]] = avg;
        a = b + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman: need two equal-length samples of size >= 2");
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < ra.size(); ++k) {
        sab += (ra[k] - ma) * (rb[k] - mb);
        saa += (ra[k] - ma) * (ra[k] - ma);
        sbb += (rb[k] - mb) * (rb[k] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

const MetricRow& MetricReport::row(const std::string& estimator) const {
    for (const auto& r : rows)
        if (r.estimator == estimator) return r;
    throw InvalidArgument("MetricReport: no row for estimator '" + estimator + "'");
}

MetricRow summarize(const std::string& estimator, const Matrix& curves, const Vector& truth,
                    const std::vector<double>& spreads, int failures) {
    MetricRow row;
    row.estimator = estimator;
    row.replicates = static_cast<int>(curves.rows());
    row.failures = failures;
    if (curves.rows() == 0) {
        row.abias2 = row.avar = row.aimse = row.cov_avar = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    row.abias2 = abias2(curves, truth);
    row.avar = avar(curves);
    row.aimse = row.abias2 + row.avar;
    row.abias2_se = abias2_se(curves, truth);
    row.cov_avar = spreads.empty() ? 0.0
                                   : std::accumulate(spreads.begin(), spreads.end(), 0.0) /
                                         static_cast<double>(spreads.size());
    return row;
}

}  // namespace mfglm::metrics
