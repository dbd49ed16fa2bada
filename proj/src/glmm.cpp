#include "mfglm/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "optimize.hpp"

namespace mfglm::glmm {

std::pair<Vector, Vector> gauss_hermite(int nodes) {
    if (nodes < 1) throw InvalidArgument("gauss_hermite: need at least one node");
    // Golub-Welsch on the Jacobi matrix of the physicists' Hermite polynomials.
    Vector diag = Vector::Zero(nodes);
    Vector sub(std::max(nodes - 1, 0));
    for (int k = 1; k < nodes; ++k) sub[k - 1] = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    Vector x = eig.eigenvalues();
    Vector w = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square();
    // Exact symmetry of the rule.
    for (int k = 0; k < nodes / 2; ++k) {
        const double a = 0.5 * (x[nodes - 1 - k] - x[k]);
        x[k] = -a;
        x[nodes - 1 - k] = a;
        const double b = 0.5 * (w[k] + w[nodes - 1 - k]);
        w[k] = w[nodes - 1 - k] = b;
    }
    if (nodes % 2 == 1) x[nodes / 2] = 0.0;
    return {x, w};
}

namespace {

// Subjects with identical sufficient statistics share one inner solve.
struct GroupedCounts {
    int D = 1;
    int groups = 0;
    std::vector<double> s;       // groups x D count sums per slot
    std::vector<double> m;       // groups x D observation counts per slot
    std::vector<double> weight;  // total (normalized) subject weight per group
    std::vector<int> subject_group;
    double total_count = 0.0;
    double total_obs = 0.0;
    double log_factorial = 0.0;  // sum_i w_i sum_obs lgamma(y + 1)
};

Vector normalized_weights(int n, const std::optional<Vector>& weights) {
    if (!weights) return Vector::Ones(n);
    if (weights->size() != n) throw InvalidArgument("glmm: weight vector length does not match subjects");
    if ((weights->array() <= 0.0).any() || !weights->allFinite())
        throw InvalidArgument("glmm: weights must be positive and finite");
    return *weights / weights->mean();
}

GroupedCounts group_counts(const SurrogateArray& counts, const Vector& w) {
    GroupedCounts g;
    g.D = counts.points();
    const int n = counts.subjects();
    const int J = counts.replicates();
    const int D = g.D;
    g.subject_group.resize(static_cast<std::size_t>(n));
    std::map<std::vector<double>, int> index;
    std::vector<double> key(static_cast<std::size_t>(2 * D + 1));
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) {
            double s = 0.0, m = 0.0;
            for (int j = 0; j < J; ++j) {
                const double y = counts(i, j, d);
                if (is_missing(y)) continue;
                if (y < 0.0 || y != std::floor(y) || !std::isfinite(y))
                    throw DataError("glmm: counts must be nonnegative integers (got " + std::to_string(y) + ")");
                s += y;
                m += 1.0;
                g.log_factorial += w[i] * std::lgamma(y + 1.0);
            }
            key[static_cast<std::size_t>(d)] = s;
            key[static_cast<std::size_t>(D + d)] = m;
            g.total_count += w[i] * s;
            g.total_obs += w[i] * m;
        }
        key[static_cast<std::size_t>(2 * D)] = w[i];
        auto [it, inserted] = index.try_emplace(key, g.groups);
        if (inserted) {
            ++g.groups;
            g.s.insert(g.s.end(), key.begin(), key.begin() + D);
            g.m.insert(g.m.end(), key.begin() + D, key.begin() + 2 * D);
            g.weight.push_back(0.0);
        }
        g.weight[static_cast<std::size_t>(it->second)] += w[i];
        g.subject_group[static_cast<std::size_t>(i)] = it->second;
    }
    return g;
}

// Marginal log-likelihood of the Poisson window model in the standardized
// parametrization r0 = tau0 z0, r_d = tau1 z_d, z ~ N(0, I). The conditional
// log-density in z is strictly concave with an arrowhead Hessian, so each
// subject's mode is a cheap Newton solve.
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;

class PoissonObjective {
public:
    PoissonObjective(const GroupedCounts& data, int nodes)
        : data_(data), z_(static_cast<std::size_t>(data.groups * data.D), 0.0),
          a_trial_(static_cast<std::size_t>(data.D)), a_(static_cast<std::size_t>(data.D)),
          delta_(static_cast<std::size_t>(data.D)), trial_(static_cast<std::size_t>(data.D)),
          nodes_(data.D == 1 ? nodes : 1) {
        if (nodes_ > 1) std::tie(gh_x_, gh_w_) = gauss_hermite(nodes_);
    }

    double operator()(const Vector& p) {
        const double mu = p[0];
        const double tau0 = p[1];
        const double tau1 = data_.D > 1 ? p[2] : 0.0;
        double total = 0.0;
        for (int g = 0; g < data_.groups; ++g) {
            const double w = data_.weight[static_cast<std::size_t>(g)];
            total += w * group_term(g, mu, tau0, tau1);
        }
        return total;
    }

    /// Laplace objective and its exact gradient (the mode's dependence on
    /// the parameters enters through the log-determinant only).
    double operator()(const Vector& p, Vector& grad) {
        const int D = data_.D;
        const double mu = p[0];
        const double tau0 = p[1];
        const double tau1 = D > 1 ? p[2] : 0.0;
        grad = Vector::Zero(p.size());
        double total = 0.0;
        SmallMatrix A(D, D), N(D, D), B(D, D);
        SmallVector c(D), u(D), fz(D);
        for (int g = 0; g < data_.groups; ++g) {
            const double w = data_.weight[static_cast<std::size_t>(g)];
            const double* s = &data_.s[static_cast<std::size_t>(g * D)];
            const double* z = &z_[static_cast<std::size_t>(g * D)];
            const double f = solve_mode(g, mu, tau0, tau1);
            const double* a = a_.data();

            A.setZero();
            for (int d = 0; d < D; ++d) {
                A(d, 0) = tau0;
                if (d > 0) A(d, d) = tau1;
            }
            N.noalias() = A.transpose() * Eigen::Map<const Vector>(a, D).asDiagonal() * A;
            N.diagonal().array() += 1.0;
            Eigen::LLT<SmallMatrix> llt(N);
            B = llt.solve(A.transpose());  // N^-1 A^T
            const SmallMatrix L = llt.matrixL();
            double logdet = 0.0;
            for (int d = 0; d < D; ++d) logdet += 2.0 * std::log(L(d, d));
            total += w * (f - 0.5 * logdet);

            // P_dd = (A N^-1 A^T)_dd
            double sum_r = 0.0, sum_a = 0.0, sum_aP = 0.0;
            for (int d = 0; d < D; ++d) {
                const double Pdd = A.row(d).dot(B.col(d));
                fz[d] = a[d] * Pdd;  // reuse as a_d P_dd
                sum_r += s[d] - a[d];
                sum_a += a[d];
                sum_aP += fz[d];
            }
            c[0] = tau0 * sum_aP;
            for (int d = 1; d < D; ++d) c[d] = tau1 * fz[d];
            u = llt.solve(c);

            // mu
            double dz = -tau0 * sum_a * u[0];
            for (int d = 1; d < D; ++d) dz += -tau1 * a[d] * u[d];
            grad[0] += w * (sum_r - 0.5 * sum_aP - 0.5 * dz);

            // tau0
            double trace0 = 0.0;
            for (int d = 0; d < D; ++d) trace0 += B(0, d) * a[d];
            dz = (sum_r - tau0 * z[0] * sum_a) * u[0];
            for (int d = 1; d < D; ++d) dz += -tau1 * a[d] * z[0] * u[d];
            grad[1] += w * (z[0] * sum_r - 0.5 * (2.0 * trace0 + z[0] * sum_aP) - 0.5 * dz);

            if (D > 1) {
                double df = 0.0, trace1 = 0.0, zaP = 0.0, dz0 = 0.0;
                dz = 0.0;
                for (int d = 1; d < D; ++d) {
                    const double rd = s[d] - a[d];
                    df += z[d] * rd;
                    trace1 += B(d, d) * a[d];
                    zaP += z[d] * fz[d];
                    dz0 += a[d] * z[d];
                    dz += (rd - tau1 * a[d] * z[d]) * u[d];
                }
                dz += -tau0 * dz0 * u[0];
                grad[2] += w * (df - 0.5 * (2.0 * trace1 + zaP) - 0.5 * dz);
            }
        }
        return total;
    }

    /// Mode of group g in the standardized scale after the last evaluation.
    double mode(int g, int d) const { return z_[static_cast<std::size_t>(g * data_.D + d)]; }

private:
    double log_joint(const double* s, const double* m, const double* z, double mu, double tau0, double tau1,
                     std::vector<double>& a) {
        double f = 0.0;
        for (int d = 0; d < data_.D; ++d) {
            const double eta = mu + tau0 * z[0] + (d > 0 ? tau1 * z[d] : 0.0);
            a[static_cast<std::size_t>(d)] = m[d] > 0.0 ? m[d] * std::exp(eta) : 0.0;
            f += s[d] * eta - a[static_cast<std::size_t>(d)];
            f -= 0.5 * z[d] * z[d];
        }
        return f;
    }

    // Newton solve for the mode of group g; leaves a_ at the mode and
    // returns the log joint there.
    double solve_mode(int g, double mu, double tau0, double tau1) {
        const int D = data_.D;
        const double* s = &data_.s[static_cast<std::size_t>(g * D)];
        const double* m = &data_.m[static_cast<std::size_t>(g * D)];
        double* z = &z_[static_cast<std::size_t>(g * D)];

        double f = log_joint(s, m, z, mu, tau0, tau1, a_);
        if (!std::isfinite(f)) {
            std::fill(z, z + D, 0.0);
            f = log_joint(s, m, z, mu, tau0, tau1, a_);
        }
        for (int it = 0; it < 100; ++it) {
            // Gradient and negated Hessian (arrowhead) at z.
            double sum_a = 0.0, sum_r = 0.0;
            for (int d = 0; d < D; ++d) {
                sum_a += a_[static_cast<std::size_t>(d)];
                sum_r += s[d] - a_[static_cast<std::size_t>(d)];
            }
            const double g0 = tau0 * sum_r - z[0];
            double rhs0 = g0;
            double schur = tau0 * tau0 * sum_a + 1.0;
            for (int d = 1; d < D; ++d) {
                const double ad = a_[static_cast<std::size_t>(d)];
                const double gd = tau1 * (s[d] - ad) - z[d];
                const double n0d = tau0 * tau1 * ad;
                const double ndd = tau1 * tau1 * ad + 1.0;
                schur -= n0d * n0d / ndd;
                rhs0 -= n0d * gd / ndd;
            }
            const double d0 = rhs0 / schur;
            delta_[0] = d0;
            double biggest = std::abs(d0);
            for (int d = 1; d < D; ++d) {
                const double ad = a_[static_cast<std::size_t>(d)];
                const double gd = tau1 * (s[d] - ad) - z[d];
                const double n0d = tau0 * tau1 * ad;
                const double ndd = tau1 * tau1 * ad + 1.0;
                delta_[static_cast<std::size_t>(d)] = (gd - n0d * d0) / ndd;
                biggest = std::max(biggest, std::abs(delta_[static_cast<std::size_t>(d)]));
            }
            double scale = 0.0;
            for (int d = 0; d < D; ++d) scale = std::max(scale, std::abs(z[d]));
            if (biggest <= 1e-13 * (1.0 + scale)) break;

            double t = 1.0;
            double f_new = f;
            for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
                for (int d = 0; d < D; ++d)
                    trial_[static_cast<std::size_t>(d)] = z[d] + t * delta_[static_cast<std::size_t>(d)];
                f_new = log_joint(s, m, trial_.data(), mu, tau0, tau1, a_trial_);
                if (std::isfinite(f_new) && f_new >= f - 1e-13 * (1.0 + std::abs(f))) break;
            }
            if (!(std::isfinite(f_new) && f_new >= f - 1e-13 * (1.0 + std::abs(f)))) break;
            std::copy(trial_.begin(), trial_.end(), z);
            std::swap(a_, a_trial_);
            f = f_new;
            if (t * biggest <= 1e-13 * (1.0 + scale)) break;
        }
        return f;
    }

    double group_term(int g, double mu, double tau0, double tau1) {
        const int D = data_.D;
        const double* s = &data_.s[static_cast<std::size_t>(g * D)];
        const double* m = &data_.m[static_cast<std::size_t>(g * D)];
        const double* z = &z_[static_cast<std::size_t>(g * D)];
        const double f = solve_mode(g, mu, tau0, tau1);
        // log det of the negated Hessian at the mode.
        double sum_a = 0.0;
        for (int d = 0; d < D; ++d) sum_a += a_[static_cast<std::size_t>(d)];
        double logdet = 0.0;
        double schur = tau0 * tau0 * sum_a + 1.0;
        for (int d = 1; d < D; ++d) {
            const double ad = a_[static_cast<std::size_t>(d)];
            const double n0d = tau0 * tau1 * ad;
            const double ndd = tau1 * tau1 * ad + 1.0;
            schur -= n0d * n0d / ndd;
            logdet += std::log(ndd);
        }
        logdet += std::log(schur);
        if (nodes_ <= 1) return f - 0.5 * logdet;

        // Adaptive Gauss-Hermite around the mode (scalar random effect).
        const double sd = 1.0 / std::sqrt(schur);
        double acc = 0.0;
        for (int k = 0; k < nodes_; ++k) {
            const double x = gh_x_[k];
            const double zk = z[0] + std::numbers::sqrt2 * sd * x;
            const double eta = mu + tau0 * zk;
            const double fk = (m[0] > 0.0 ? s[0] * eta - m[0] * std::exp(eta) : 0.0) - 0.5 * zk * zk;
            acc += gh_w_[k] * std::exp(fk - f + x * x);
        }
        return f + std::log(acc) + std::log(sd) - 0.5 * std::log(std::numbers::pi);
    }

    const GroupedCounts& data_;
    std::vector<double> z_;
    std::vector<double> a_trial_, a_, delta_, trial_;
    int nodes_;
    Vector gh_x_, gh_w_;
};

// The relative-change stopping rule is loose in mu (the likelihood is flat to
// 1e-10 over mu +- 1e-6) and can leave a vanishing component at a small
// positive sd. Snap such components to the floor, re-solve mu alone and keep
// the result if the likelihood does not drop.
Vector polish_boundary(PoissonObjective& objective, const Vector& x, double tau_floor) {
    Vector y = x;
    for (Eigen::Index k = 1; k < y.size(); ++k)
        if (y[k] < 1e-2) y[k] = tau_floor;
    const double h = 1e-5;
    for (int it = 0; it < 20; ++it) {
        const double f0 = objective(y);
        Vector a = y, b = y;
        a[0] -= h;
        b[0] += h;
        const double fa = objective(a), fb = objective(b);
        const double g = (fb - fa) / (2.0 * h);
        const double c = (fb - 2.0 * f0 + fa) / (h * h);
        if (!(c < 0.0)) break;
        const double step = -g / c;
        y[0] += step;
        if (std::abs(step) < 1e-12) break;
    }
    return objective(y) >= objective(x) ? y : x;
}

Vector poisson_start(const GroupedCounts& g) {
    const int D = g.D;
    const double mu0 = std::log(g.total_count / g.total_obs);
    double sw = 0.0, mean_v = 0.0;
    std::vector<double> v(static_cast<std::size_t>(g.groups), 0.0);
    std::vector<bool> has(static_cast<std::size_t>(g.groups), false);
    double noise0 = 0.0;
    for (int k = 0; k < g.groups; ++k) {
        double S = 0.0, M = 0.0;
        for (int d = 0; d < D; ++d) {
            S += g.s[static_cast<std::size_t>(k * D + d)];
            M += g.m[static_cast<std::size_t>(k * D + d)];
        }
        if (M <= 0.0) continue;
        const auto ku = static_cast<std::size_t>(k);
        has[ku] = true;
        v[ku] = std::log((S + 0.5) / M);
        sw += g.weight[ku];
        mean_v += g.weight[ku] * v[ku];
        noise0 += g.weight[ku] / (S + 0.5);
    }
    mean_v /= std::max(sw, 1e-300);
    noise0 /= std::max(sw, 1e-300);
    double var0 = 0.0;
    for (int k = 0; k < g.groups; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (has[ku]) var0 += g.weight[ku] * (v[ku] - mean_v) * (v[ku] - mean_v);
    }
    var0 /= std::max(sw, 1e-300);
    const double tau0 = std::sqrt(std::max(var0 - noise0, 0.01));
    if (D == 1) return Vector{{mu0, tau0}};

    double sw1 = 0.0, var1 = 0.0, noise1 = 0.0;
    for (int k = 0; k < g.groups; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (!has[ku]) continue;
        for (int d = 1; d < D; ++d) {
            const double m = g.m[static_cast<std::size_t>(k * D + d)];
            if (m <= 0.0) continue;
            const double s = g.s[static_cast<std::size_t>(k * D + d)];
            const double u = std::log((s + 0.5) / m) - v[ku];
            sw1 += g.weight[ku];
            var1 += g.weight[ku] * u * u;
            noise1 += g.weight[ku] / (s + 0.5);
        }
    }
    const double tau1 = sw1 > 0.0 ? std::sqrt(std::max((var1 - noise1) / sw1, 0.01)) : 0.1;
    return Vector{{mu0, tau0, tau1}};
}

// Exact marginal likelihood of the Gaussian random-intercept model
// y_ij = mu + r_i + e_ij with r_i ~ N(0, tau^2), e_ij ~ N(0, sigma^2).
struct GaussianStats {
    std::vector<double> m, mean, ss, w;
};

GaussianStats gaussian_stats(const SurrogateArray& y, const Vector& w) {
    GaussianStats st;
    const int n = y.subjects();
    for (int i = 0; i < n; ++i) {
        double m = 0.0, sum = 0.0;
        for (int j = 0; j < y.replicates(); ++j) {
            const double v = y(i, j, 0);
            if (is_missing(v)) continue;
            m += 1.0;
            sum += v;
        }
        const double mean = m > 0.0 ? sum / m : 0.0;
        double ss = 0.0;
        for (int j = 0; j < y.replicates(); ++j) {
            const double v = y(i, j, 0);
            if (!is_missing(v)) ss += (v - mean) * (v - mean);
        }
        st.m.push_back(m);
        st.mean.push_back(mean);
        st.ss.push_back(ss);
        st.w.push_back(w[i]);
    }
    return st;
}

double gaussian_loglik(const GaussianStats& st, double mu, double tau, double log_sigma) {
    const double s2 = std::exp(2.0 * log_sigma);
    const double t2 = tau * tau;
    double total = 0.0;
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        const double m = st.m[i];
        if (m <= 0.0) continue;
        const double v = s2 + m * t2;
        const double dev = st.mean[i] - mu;
        total -= 0.5 * st.w[i] *
                 ((m - 1.0) * std::log(s2) + std::log(v) + st.ss[i] / s2 + m * dev * dev / v +
                  m * std::log(2.0 * std::numbers::pi));
    }
    return total;
}

GlmmFit fit_gaussian(const SurrogateArray& y, const Vector& w, const FitOptions& options) {
    const GaussianStats st = gaussian_stats(y, w);
    double sw = 0.0, grand = 0.0, within = 0.0, dof = 0.0;
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        if (st.m[i] <= 0.0) continue;
        sw += st.w[i] * st.m[i];
        grand += st.w[i] * st.m[i] * st.mean[i];
        within += st.w[i] * st.ss[i];
        dof += st.w[i] * (st.m[i] - 1.0);
    }
    if (sw <= 0.0) throw DataError("glmm: no observations");
    grand /= sw;
    double between = 0.0, sm = 0.0;
    for (std::size_t i = 0; i < st.m.size(); ++i) {
        if (st.m[i] <= 0.0) continue;
        between += st.w[i] * (st.mean[i] - grand) * (st.mean[i] - grand);
        sm += st.w[i];
    }
    between /= sm;
    const double s2 = dof > 0.0 ? std::max(within / dof, 1e-12) : std::max(between, 1e-12);
    const double t2 = std::max(between - s2 * sm / sw, 0.01 * between + 1e-12);

    auto objective = [&](const Vector& p) { return gaussian_loglik(st, p[0], p[1], p[2]); };
    mfglm::detail::MaximizeOptions mo;
    mo.tolerance = options.tolerance;
    mo.max_iterations = options.max_iterations;
    auto res = mfglm::detail::maximize(objective, Vector{{grand, std::sqrt(t2), 0.5 * std::log(s2)}}, mo);

    GlmmFit fit;
    fit.family = Family::Gaussian;
    fit.window_size = 1;
    fit.mu_hat = res.x[0];
    const double tau2 = std::max(res.x[1] * res.x[1], options.variance_floor);
    const double sig2 = std::exp(2.0 * res.x[2]);
    fit.var_components = {tau2, sig2};
    fit.converged = res.converged;
    fit.iterations = res.iterations;
    fit.loglik = res.value;
    fit.rand_effects = Matrix::Zero(y.subjects(), 1);
    for (int i = 0; i < y.subjects(); ++i) {
        const double m = st.m[static_cast<std::size_t>(i)];
        if (m <= 0.0) continue;
        fit.rand_effects(i, 0) = m * tau2 / (sig2 + m * tau2) * (st.mean[static_cast<std::size_t>(i)] - fit.mu_hat);
    }
    return fit;
}

void check_subjects(const SurrogateArray& counts) {
    if (counts.subjects() < 2) throw InvalidArgument("glmm: need at least 2 subjects");
    if (counts.points() > 15) throw InvalidArgument("glmm: window size is limited to 15 slots");
    if (counts.replicates() < 1) throw InvalidArgument("glmm: need at least 1 replicate");
    if (counts.points() < 1) throw InvalidArgument("glmm: need at least 1 slot");
}

// The nested model over D slots is the reference-coded model over D + 1
// slots whose reference slot is never observed.
SurrogateArray latent_layout(const SurrogateArray& counts, WindowCoding coding) {
    if (counts.points() == 1 || coding == WindowCoding::Reference) return counts;
    SurrogateArray out(counts.subjects(), counts.replicates(), counts.points() + 1, kMissing);
    for (int i = 0; i < counts.subjects(); ++i)
        for (int j = 0; j < counts.replicates(); ++j)
            for (int d = 0; d < counts.points(); ++d) out(i, j, d + 1) = counts(i, j, d);
    return out;
}

}  // namespace

double marginal_loglik(const SurrogateArray& counts, const std::optional<Vector>& weights, const Vector& params,
                       int quadrature_nodes, WindowCoding coding) {
    check_subjects(counts);
    const int D = counts.points();
    if (params.size() != (D == 1 ? 2 : 3)) throw InvalidArgument("marginal_loglik: wrong parameter count");
    const Vector w = normalized_weights(counts.subjects(), weights);
    const GroupedCounts g = group_counts(latent_layout(counts, coding), w);
    PoissonObjective obj(g, quadrature_nodes);
    return obj(params);
}

namespace detail {

double laplace_loglik_with_gradient(const SurrogateArray& counts, const std::optional<Vector>& weights,
                                    const Vector& params, Vector& gradient, WindowCoding coding) {
    check_subjects(counts);
    const int D = counts.points();
    if (params.size() != (D == 1 ? 2 : 3)) throw InvalidArgument("laplace_loglik_with_gradient: wrong parameter count");
    const Vector w = normalized_weights(counts.subjects(), weights);
    const GroupedCounts g = group_counts(latent_layout(counts, coding), w);
    PoissonObjective obj(g, 1);
    return obj(params, gradient);
}

GlmmFit fit_window_any(const SurrogateArray& counts, const std::optional<Vector>& weights,
                       const FitOptions& options) {
    check_subjects(counts);
    const int n = counts.subjects();
    const int D = counts.points();
    const Vector w = normalized_weights(n, weights);
    if (options.family == Family::Gaussian) {
        if (D != 1) throw InvalidArgument("glmm: the Gaussian variant supports point-wise fits only");
        return fit_gaussian(counts, w, options);
    }

    const GroupedCounts g = group_counts(latent_layout(counts, options.coding), w);
    const int L = g.D;  // latent slots: D, or D + 1 for the nested layout
    GlmmFit fit;
    fit.family = Family::Poisson;
    fit.window_size = D;
    fit.coding = options.coding;
    fit.rand_effects = Matrix::Zero(n, L);
    if (g.total_obs <= 0.0 || g.total_count <= 0.0) {
        fit.mu_hat = std::log(options.degenerate_rate);
        fit.var_components.assign(D == 1 ? 1 : 2, options.variance_floor);
        fit.converged = true;
        fit.degenerate = true;
        fit.loglik = g.total_obs > 0.0 ? -g.total_obs * options.degenerate_rate : 0.0;
        return fit;
    }

    PoissonObjective objective(g, options.quadrature_nodes);
    mfglm::detail::MaximizeOptions mo;
    mo.tolerance = options.tolerance;
    mo.max_iterations = options.max_iterations;
    // The adaptive quadrature objective uses finite-difference Newton; the
    // Laplace objective has an exact gradient.
    auto res = options.quadrature_nodes > 1 && D == 1
                   ? mfglm::detail::maximize(objective, poisson_start(g), mo)
                   : mfglm::detail::maximize_bfgs(objective, poisson_start(g), mo);

    const double tau_floor = std::sqrt(options.variance_floor);
    Vector final_params = res.x;
    for (Eigen::Index k = 1; k < final_params.size(); ++k)
        final_params[k] = std::max(std::abs(final_params[k]), tau_floor);
    final_params = polish_boundary(objective, final_params, tau_floor);
    const double value = objective(final_params);  // refreshes the modes

    fit.mu_hat = final_params[0];
    fit.var_components.clear();
    for (Eigen::Index k = 1; k < final_params.size(); ++k) fit.var_components.push_back(final_params[k] * final_params[k]);
    fit.converged = res.converged;
    fit.iterations = res.iterations;
    fit.loglik = value - g.log_factorial;
    const double tau0 = final_params[1];
    const double tau1 = D > 1 ? final_params[2] : 0.0;
    for (int i = 0; i < n; ++i) {
        const int grp = g.subject_group[static_cast<std::size_t>(i)];
        fit.rand_effects(i, 0) = tau0 * objective.mode(grp, 0);
        for (int d = 1; d < L; ++d) fit.rand_effects(i, d) = tau1 * objective.mode(grp, d);
    }
    return fit;
}

}  // namespace detail

GlmmFit fit_pointwise(const Matrix& counts, const std::optional<Vector>& weights, const FitOptions& options) {
    const auto n = static_cast<int>(counts.rows());
    const auto J = static_cast<int>(counts.cols());
    SurrogateArray arr(n, J, 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < J; ++j) arr(i, j, 0) = counts(i, j);
    return detail::fit_window_any(arr, weights, options);
}

GlmmFit fit_window(const SurrogateArray& counts, const std::optional<Vector>& weights, const FitOptions& options) {
    if (counts.points() < 2)
        throw InvalidArgument("fit_window: window size must be >= 2; use fit_pointwise for single points");
    FitOptions opts = options;
    opts.quadrature_nodes = 1;
    return detail::fit_window_any(counts, weights, opts);
}

double predict_x(const GlmmFit& fit, int subject, int slot) {
    if (subject < 0 || subject >= fit.subjects())
        throw InvalidArgument("predict_x: unknown subject " + std::to_string(subject));
    if (slot < 0 || slot >= fit.window_size) throw InvalidArgument("predict_x: slot outside the window");
    double x = fit.mu_hat + fit.rand_effects(subject, 0);
    if (fit.window_size == 1) return x;
    if (fit.coding == WindowCoding::Nested) return x + fit.rand_effects(subject, slot + 1);
    return slot > 0 ? x + fit.rand_effects(subject, slot) : x;
}

}  // namespace mfglm::glmm
