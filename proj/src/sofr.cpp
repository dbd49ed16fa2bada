#include "mfglm/sofr.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace mfglm::sofr {

std::vector<double> SplineBasis::interior_knots() const {
    if (knots.size() < static_cast<std::size_t>(2 * (degree + 1))) return {};
    return {knots.begin() + degree + 1, knots.end() - degree - 1};
}

Vector evaluate_basis(const SplineBasis& basis, double t) {
    const int p = basis.degree;
    const int K = basis.size;
    const auto& u = basis.knots;
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("evaluate_basis: t outside [0, 1]");
    // Degree-0 functions on the spans; t = 1 belongs to the last non-empty span.
    const int spans = static_cast<int>(u.size()) - 1;
    std::vector<double> N(static_cast<std::size_t>(spans), 0.0);
    int span = -1;
    for (int k = 0; k < spans; ++k) {
        if (u[k] < u[k + 1] && t >= u[k] && t < u[k + 1]) span = k;
    }
    if (span < 0) {
        for (int k = spans - 1; k >= 0; --k) {
            if (u[k] < u[k + 1]) {
                span = k;
                break;
            }
        }
    }
    N[static_cast<std::size_t>(span)] = 1.0;
    for (int d = 1; d <= p; ++d) {
        for (int k = 0; k < spans - d; ++k) {
            double v = 0.0;
            const double left = u[k + d] - u[k];
            const double right = u[k + d + 1] - u[k + 1];
            if (left > 0.0) v += (t - u[k]) / left * N[k];
            if (right > 0.0) v += (u[k + d + 1] - t) / right * N[k + 1];
            N[k] = v;
        }
    }
    Vector out(K);
    for (int k = 0; k < K; ++k) out[k] = N[k];
    return out;
}

SplineBasis build_basis(const FunctionalGrid& grid, int K_n, int degree) {
    if (degree < 0) throw InvalidArgument("build_basis: degree must be >= 0");
    if (K_n < degree + 1)
        throw InvalidArgument("build_basis: K_n = " + std::to_string(K_n) + " is below degree + 1 = " +
                              std::to_string(degree + 1));
    SplineBasis basis;
    basis.degree = degree;
    basis.size = K_n;
    const int interior = K_n - degree - 1;
    basis.knots.assign(static_cast<std::size_t>(degree + 1), 0.0);
    for (int j = 1; j <= interior; ++j) basis.knots.push_back(static_cast<double>(j) / (interior + 1));
    basis.knots.insert(basis.knots.end(), static_cast<std::size_t>(degree + 1), 1.0);
    basis.evaluation = Matrix(grid.size(), K_n);
    for (int l = 0; l < grid.size(); ++l) basis.evaluation.row(l) = evaluate_basis(basis, grid[l]).transpose();
    return basis;
}

Matrix functional_design(const Matrix& Xhat, const SplineBasis& basis, const FunctionalGrid& grid) {
    if (Xhat.cols() != grid.size() || basis.evaluation.rows() != grid.size())
        throw InvalidArgument("functional_design: curves, basis and grid disagree on the number of points");
    if (!Xhat.allFinite()) throw DataError("functional_design: reconstructed curves contain missing or non-finite values");
    return Xhat * grid.weights().asDiagonal() * basis.evaluation;
}

namespace {

Matrix full_design(const Matrix& design, const Matrix& Z, Eigen::Index n) {
    const Eigen::Index p = Z.size() == 0 ? 0 : Z.cols();
    const Eigen::Index K = design.size() == 0 ? 0 : design.cols();
    if ((p > 0 && Z.rows() != n) || (K > 0 && design.rows() != n))
        throw InvalidArgument("fit_logistic: design, Z and Y disagree on the number of subjects");
    Matrix X(n, 1 + p + K);
    X.col(0).setOnes();
    if (p > 0) X.middleCols(1, p) = Z;
    if (K > 0) X.rightCols(K) = design;
    return X;
}

Vector resolve_weights(const std::optional<Vector>& weights, Eigen::Index n) {
    if (!weights) return Vector::Ones(n);
    if (weights->size() != n) throw InvalidArgument("fit_logistic: weights length does not match Y");
    if ((weights->array() <= 0.0).any() || !weights->allFinite())
        throw InvalidArgument("fit_logistic: weights must be positive and finite");
    return *weights;
}

// log(1 + e^eta) without overflow.
double log1pexp(double eta) { return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double loglik_of(const Matrix& X, const Vector& Y, const Vector& w, const Vector& coef) {
    const Vector eta = X * coef;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w[i] * (Y[i] * eta[i] - log1pexp(eta[i]));
    return ll;
}

std::string describe_direction(const Vector& v, const std::vector<std::string>& names) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) order[static_cast<std::size_t>(k)] = k;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(v[a]) > std::abs(v[b]); });
    std::ostringstream out;
    out << std::setprecision(3);
    const double top = std::abs(v[order[0]]);
    bool first = true;
    for (auto k : order) {
        if (std::abs(v[k]) < 0.05 * top) break;
        out << (first ? "" : " ") << (v[k] < 0 ? "-" : (first ? "" : "+")) << std::abs(v[k]) << "*"
            << names[static_cast<std::size_t>(k)];
        first = false;
    }
    return out.str();
}

void check_rank(const Matrix& X, const std::vector<std::string>& names) {
    Vector scale = X.colwise().norm().transpose();
    for (Eigen::Index k = 0; k < scale.size(); ++k) {
        if (scale[k] == 0.0) throw DataError("fit_logistic: design is rank deficient; column " + names[k] + " is zero");
    }
    const Matrix Xs = X * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Matrix> qr(Xs);
    qr.setThreshold(1e-10);
    if (qr.rank() == Xs.cols()) return;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Xs.transpose() * Xs);
    Vector null = scale.cwiseInverse().asDiagonal() * eig.eigenvectors().col(0);
    null /= null.cwiseAbs().maxCoeff();
    throw DataError("fit_logistic: design is rank deficient; null direction " + describe_direction(null, names));
}

}  // namespace

double logistic_loglik(const Matrix& design, const Matrix& Z, const Vector& Y, const std::optional<Vector>& weights,
                       const Vector& coef) {
    const Matrix X = full_design(design, Z, Y.size());
    return loglik_of(X, Y, resolve_weights(weights, Y.size()), coef);
}

Vector logistic_score(const Matrix& design, const Matrix& Z, const Vector& Y, const std::optional<Vector>& weights,
                      const Vector& coef) {
    const Matrix X = full_design(design, Z, Y.size());
    const Vector w = resolve_weights(weights, Y.size());
    const Vector eta = X * coef;
    Vector r(Y.size());
    for (Eigen::Index i = 0; i < Y.size(); ++i) r[i] = w[i] * (Y[i] - expit(eta[i]));
    return X.transpose() * r;
}

LogisticFit fit_logistic(const Matrix& design, const Matrix& Z, const Vector& Y, const std::optional<Vector>& weights,
                         const LogisticOptions& options, const std::vector<std::string>& z_names) {
    const Eigen::Index n = Y.size();
    const Matrix X = full_design(design, Z, n);
    const Eigen::Index q = X.cols();
    const Eigen::Index p = Z.size() == 0 ? 0 : Z.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (Y[i] != 0.0 && Y[i] != 1.0) throw DataError("fit_logistic: Y must be binary (0/1)");
    }
    if (n <= q) {
        throw InvalidArgument("fit_logistic: need more subjects (" + std::to_string(n) + ") than coefficients (" +
                              std::to_string(q) + ")");
    }
    const Vector w = resolve_weights(weights, n);

    LogisticFit fit;
    fit.names.push_back("Intercept");
    for (Eigen::Index k = 0; k < p; ++k) {
        fit.names.push_back(static_cast<std::size_t>(k) < z_names.size() ? z_names[static_cast<std::size_t>(k)]
                                                                          : "Z" + std::to_string(k + 1));
    }
    for (Eigen::Index k = 0; k < q - 1 - p; ++k) fit.names.push_back("omega" + std::to_string(k + 1));
    check_rank(X, fit.names);

    const double ybar = std::clamp(w.dot(Y) / w.sum(), 1e-6, 1.0 - 1e-6);
    fit.coef = Vector::Zero(q);
    fit.coef[0] = std::log(ybar / (1.0 - ybar));
    fit.loglik = loglik_of(X, Y, w, fit.coef);
    fit.loglik_path.push_back(fit.loglik);

    Vector mu(n), hw(n);
    Matrix H(q, q);
    Eigen::LDLT<Matrix> ldlt;
    int diverging = 0;
    auto derivatives = [&](const Vector& coef, Vector& score) {
        const Vector eta = X * coef;
        for (Eigen::Index i = 0; i < n; ++i) {
            mu[i] = expit(eta[i]);
            hw[i] = w[i] * mu[i] * (1.0 - mu[i]);
        }
        score = X.transpose() * (w.cwiseProduct(Y - mu));
        H = X.transpose() * hw.asDiagonal() * X;
        ldlt.compute(H);
    };
    Vector score;
    for (int it = 1; it <= options.max_iterations; ++it) {
        derivatives(fit.coef, score);
        if (score.cwiseAbs().maxCoeff() <= options.score_tolerance) {
            fit.converged = true;
            break;
        }
        if (ldlt.info() != Eigen::Success) throw NumericalError("fit_logistic: information matrix is singular");
        const Vector step = ldlt.solve(score);
        double t = 1.0;
        bool accepted = false;
        Vector trial;
        double trial_ll = 0.0;
        for (int halving = 0; halving < 50; ++halving, t *= 0.5) {
            trial = fit.coef + t * step;
            trial_ll = loglik_of(X, Y, w, trial);
            if (std::isfinite(trial_ll) && trial_ll >= fit.loglik) {
                accepted = true;
                break;
            }
        }
        fit.iterations = it;
        if (!accepted) {
            // No ascent possible at working precision.
            fit.converged = score.cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + std::abs(fit.loglik));
            break;
        }
        const double change = trial_ll - fit.loglik;
        fit.coef = trial;
        fit.loglik = trial_ll;
        fit.loglik_path.push_back(trial_ll);
        if (change <= options.deviance_tolerance * (std::abs(trial_ll) + 0.1)) {
            fit.converged = true;
            break;
        }
        // Coefficients past the bound that still move by order one across
        // consecutive iterations: the likelihood has no finite maximum.
        if (fit.coef.cwiseAbs().maxCoeff() > options.separation_bound && (t * step).cwiseAbs().maxCoeff() > 0.1) {
            if (++diverging >= 3) {
                fit.separated = true;
                break;
            }
        } else {
            diverging = 0;
        }
    }
    derivatives(fit.coef, score);
    fit.deviance = -2.0 * fit.loglik;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        fit.vcov = ldlt.solve(Matrix::Identity(q, q));
        fit.vcov = 0.5 * (fit.vcov + fit.vcov.transpose()).eval();
    } else {
        fit.vcov = Matrix::Constant(q, q, std::numeric_limits<double>::quiet_NaN());
    }
    return fit;
}

Vector SofrFit::beta_se() const {
    const auto K = omega.size();
    const Matrix V = vcov.bottomRightCorner(K, K);
    return (basis.evaluation * V).cwiseProduct(basis.evaluation).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
}

SofrFit estimate(const mem::ReconstructedCovariate& reconstruction, const Matrix& Z, const Vector& Y,
                 const FunctionalGrid& grid, int K_n, const std::optional<Vector>& weights,
                 const std::vector<std::string>& z_names, int degree) {
    SofrFit out;
    out.method = reconstruction.method;
    out.basis = build_basis(grid, K_n, degree);
    const Matrix design = functional_design(reconstruction.values, out.basis, grid);
    const Eigen::Index n = design.rows();
    const Eigen::Index p = Z.size() == 0 ? 0 : Z.cols();

    // omega is identified only modulo directions whose design image lies in
    // span(1, Z) (e.g. PACE curves share the mean function and span K + 1
    // dimensions). Fit omega = V gamma on the identifiable subspace, which
    // gives the minimum-norm omega among the maximizers.
    Matrix base(n, 1 + p);
    base.col(0).setOnes();
    if (p > 0) base.rightCols(p) = Z;
    Eigen::ColPivHouseholderQR<Matrix> qr_base(base);
    const Matrix Qb = qr_base.householderQ() * Matrix::Identity(n, qr_base.rank());
    const Matrix residual = design - Qb * (Qb.transpose() * design);
    Eigen::JacobiSVD<Matrix> svd(residual, Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv[rank] > 1e-9 * sv[0]) ++rank;
    if (rank == 0) throw DataError("estimate: reconstructed curves carry no information beyond the intercept and Z");
    const Matrix V = rank == K_n ? Matrix(Matrix::Identity(K_n, K_n)) : Matrix(svd.matrixV().leftCols(rank));

    const LogisticFit fit = fit_logistic(design * V, Z, Y, weights, {}, z_names);
    out.omega_rank = static_cast<int>(rank);
    out.intercept = fit.coef[0];
    out.alpha = fit.coef.segment(1, p);
    out.omega = V * fit.coef.tail(rank);
    out.beta_curve = out.basis.evaluation * out.omega;
    Matrix map = Matrix::Zero(1 + p + K_n, 1 + p + rank);
    map.topLeftCorner(1 + p, 1 + p).setIdentity();
    map.bottomRightCorner(K_n, rank) = V;
    out.vcov = map * fit.vcov * map.transpose();
    out.names.assign(fit.names.begin(), fit.names.begin() + 1 + p);
    for (int k = 0; k < K_n; ++k) out.names.push_back("omega" + std::to_string(k + 1));
    out.converged = fit.converged;
    out.separated = fit.separated;
    out.iterations = fit.iterations;
    out.loglik = fit.loglik;
    return out;
}

}  // namespace mfglm::sofr
