#include "flatlab/theory_replicated.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "flatlab/numerics.hpp"
#include "flatlab/parallel.hpp"

namespace flatlab {

void ReplicaConstraints::validate() const {
    if (y < 1) throw std::invalid_argument("ReplicaConstraints: y must be >= 1");
    if (!(q_norm > 0.0)) throw std::invalid_argument("ReplicaConstraints: squared norm must be positive");
    if (!(cos_theta <= 1.0 && cos_theta >= -1.0))
        throw std::invalid_argument("ReplicaConstraints: cos_theta must lie in [-1, 1]");
    if (y >= 2 && !(cos_theta > -1.0 / (y - 1)))
        throw std::invalid_argument("ReplicaConstraints: angle beyond the maximal replica angle");
}

BarycenterObservables barycenter_observables(double m, double q_norm, double q1, double y, double b) {
    if (q1 > q_norm) throw std::invalid_argument("barycenter_observables: q1 exceeds Q");
    double q_bar = (q_norm - q1) / y + q1;
    return {m, q_bar, b * std::sqrt(q_bar / q_norm)};
}

double theta_max(int y) {
    if (y < 2) throw std::invalid_argument("theta_max: need y >= 2");
    return std::acos(-1.0 / (y - 1));
}

namespace {

// State of the reduced large-beta system at a given D0 = y * dq0.
struct Reduced {
    double d0, m, b, q_bar, e1, e2;
};

Reduced reduced_state(double d0, double alpha, double delta, double rho, double b, bool learned) {
    const double s = 2.0 * rho - 1.0;
    const double k = alpha * d0 / (1.0 + delta * d0);
    Reduced r;
    r.d0 = d0;
    if (learned) {
        r.m = k * (1.0 - s * s) / (1.0 + k * (1.0 - s * s));
        r.b = (1.0 - r.m) * s;
    } else {
        r.m = k * (1.0 - b * s) / (1.0 + k);
        r.b = b;
    }
    r.e1 = r.m - 1.0 + r.b * s;
    r.e2 = (r.m - 1.0) * (r.m - 1.0) + r.b * r.b + 2.0 * r.b * s * (r.m - 1.0);
    const double cp = d0 * d0 / ((1.0 + delta * d0) * (1.0 + delta * d0));
    r.q_bar = (alpha * delta * r.e2 + alpha * alpha * r.e1 * r.e1) * cp / (1.0 - alpha * delta * delta * cp);
    return r;
}

// Upper end of the admissible D0 range (pole of q_bar when alpha > 1).
double d0_upper(double alpha, double delta) {
    if (alpha > 1.0) return 1.0 / (delta * (std::sqrt(alpha) - 1.0));
    return std::numeric_limits<double>::infinity();
}

Reduced solve_reduced(double q_bar_target, double alpha, double delta, double rho, double b, bool learned) {
    auto f = [&](double t) { return reduced_state(std::exp(t), alpha, delta, rho, b, learned).q_bar - q_bar_target; };
    double hi_d0 = d0_upper(alpha, delta);
    double t_hi = std::isfinite(hi_d0) ? std::log(hi_d0) - 1e-12 : 60.0;
    double t_lo = -60.0;
    if (f(t_hi) < 0.0) {
        throw std::range_error("solve_replicated_mse: barycenter norm " + std::to_string(q_bar_target) +
                               " exceeds the largest attainable value " +
                               std::to_string(q_bar_target + f(t_hi)));
    }
    if (f(t_lo) > 0.0) throw std::range_error("solve_replicated_mse: barycenter norm too small to resolve");
    double t = bracket_root(f, t_lo, t_hi, 1e-15);
    return reduced_state(std::exp(t), alpha, delta, rho, b, learned);
}

ReplicaSolution assemble(const Reduced& r, double alpha, double delta, double rho, double q_norm, double y,
                         bool large_y) {
    ReplicaSolution sol;
    sol.large_y = large_y;
    sol.m = r.m;
    sol.bias = r.b;
    const double g = 1.0 + delta * r.d0;
    sol.dm_hat = -alpha * r.e1 / g;
    sol.dq0_hat = alpha * delta * (delta * r.q_bar + r.e2) / (g * g);
    if (large_y) {
        sol.dq0 = r.d0;
        sol.dq1_hat = 1.0 / r.d0;
    } else {
        sol.dq0 = r.d0 / y;
        sol.dq1_hat = 1.0 / (y * r.d0);
    }
    sol.m_bar = r.m;
    sol.q_bar = r.q_bar;
    sol.b_bar = r.b * std::sqrt(r.q_bar / q_norm);
    sol.gen_err_center = rho * gauss_tail((sol.m_bar + sol.b_bar) / std::sqrt(delta * sol.q_bar)) +
                         (1.0 - rho) * gauss_tail((sol.m_bar - sol.b_bar) / std::sqrt(delta * sol.q_bar));
    double err = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        err += ws * gauss_tail((delta * r.d0 + r.m + r.b * sigma) / std::sqrt(delta * r.q_bar));
    }
    sol.train_err = alpha * err;
    sol.converged = true;
    return sol;
}

// Zero-norm barycenter at infinite y: only the ratios M/sqrt(Q_bar) and D0/sqrt(Q_bar) survive.
ReplicaSolution zero_barycenter_limit(double alpha, double delta, double rho, double q_norm, double b,
                                      bool learned) {
    const double s = 2.0 * rho - 1.0;
    const double bb = learned ? s : b;
    const double e1 = -1.0 + bb * s;
    const double e2 = 1.0 - 2.0 * bb * s + bb * bb;
    const double norm = std::sqrt(alpha * delta * e2 + alpha * alpha * e1 * e1);
    const double m_ratio = -alpha * e1 / norm;
    const double d_ratio = 1.0 / norm;
    ReplicaSolution sol;
    sol.large_y = true;
    sol.bias = bb;
    sol.dm_hat = -alpha * e1;
    sol.dq0_hat = alpha * delta * e2;
    sol.converged = true;
    const double bc = bb / std::sqrt(q_norm);  // b_bar / sqrt(Q_bar)
    sol.gen_err_center = rho * gauss_tail((m_ratio + bc) / std::sqrt(delta)) +
                         (1.0 - rho) * gauss_tail((m_ratio - bc) / std::sqrt(delta));
    double err = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        double finite = (delta * d_ratio + m_ratio) / std::sqrt(delta);
        double arg = bb == 0.0 ? finite : (bb * sigma > 0 ? INFINITY : -INFINITY);
        err += ws * (std::isinf(arg) ? (arg > 0 ? 0.0 : 1.0) : gauss_tail(arg));
    }
    sol.train_err = alpha * err;
    return sol;
}

void validate_model(double alpha, double delta, double rho) {
    if (!(alpha > 0.0) || !(delta > 0.0) || !(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("replicated solver: invalid model parameters");
}

}  // namespace

ReplicaSolution solve_replicated_mse(double alpha, double delta, double rho, const ReplicaConstraints& c) {
    validate_model(alpha, delta, rho);
    c.validate();
    const double q_bar = (c.q_norm - c.q1()) / c.y + c.q1();
    Reduced r = solve_reduced(q_bar, alpha, delta, rho, c.bias, c.learned_bias);
    ReplicaSolution sol = assemble(r, alpha, delta, rho, c.q_norm, c.y, false);
    sol.q_bar = q_bar;
    sol.residual = replicated_stationarity_residual(alpha, delta, rho, c, sol);
    return sol;
}

ReplicaSolution solve_large_y(double alpha, double delta, double rho, double q_norm, double q1, double b,
                              bool learned_bias) {
    validate_model(alpha, delta, rho);
    if (!(q_norm > 0.0) || q1 > q_norm || q1 < 0.0)
        throw std::invalid_argument("solve_large_y: need 0 <= q1 <= Q");
    if (q1 == 0.0) return zero_barycenter_limit(alpha, delta, rho, q_norm, b, learned_bias);
    Reduced r = solve_reduced(q1, alpha, delta, rho, b, learned_bias);
    ReplicaSolution sol = assemble(r, alpha, delta, rho, q_norm, 0.0, true);
    sol.q_bar = q1;
    return sol;
}

double replica_train_error(const ReplicaSolution& sol, double, double, double, const ReplicaConstraints&) {
    return sol.train_err;
}

double max_barycenter_norm(double alpha, double delta, double rho, double b, bool learned_bias) {
    if (alpha >= 1.0) return std::numeric_limits<double>::infinity();
    return reduced_state(1e30, alpha, delta, rho, b, learned_bias).q_bar;
}

double replicated_free_entropy(double alpha, double delta, double rho, const ReplicaConstraints& c,
                               const std::vector<double>& v) {
    const double m = v[0], dq0 = v[1], dm_hat = v[2], dq0_hat = v[3], dq1_hat = v[4];
    const double b = c.learned_bias ? v.at(5) : c.bias;
    const double y = c.y, q = c.q_norm, q1 = c.q1();
    const double q_bar = (q - q1) / y + q1;
    const double s = 2.0 * rho - 1.0;
    const double e2 = (m - 1.0) * (m - 1.0) + b * b + 2.0 * b * s * (m - 1.0);
    return 0.5 * (q - q1) * dq1_hat + 0.5 * y * (q1 * dq1_hat - dq0 * dq0_hat) - m * dm_hat +
           0.5 * (dq0_hat + dm_hat * dm_hat) / (y * dq1_hat) -
           alpha * 0.5 * (delta * q_bar + e2) / (1.0 + y * delta * dq0);
}

double replicated_stationarity_residual(double alpha, double delta, double rho, const ReplicaConstraints& c,
                                        const ReplicaSolution& sol) {
    std::vector<double> v{sol.m, sol.dq0, sol.dm_hat, sol.dq0_hat, sol.dq1_hat};
    if (c.learned_bias) v.push_back(sol.bias);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(v[i]));
        auto plus = v, minus = v;
        plus[i] += h;
        minus[i] -= h;
        double g = (replicated_free_entropy(alpha, delta, rho, c, plus) -
                    replicated_free_entropy(alpha, delta, rho, c, minus)) / (2.0 * h);
        worst = std::max(worst, std::abs(g));
    }
    return worst;
}

std::vector<ReplicatedRow> sweep_replicated(const ReplicatedSweepSpec& spec, int threads) {
    if (spec.ys.empty() || spec.cos_thetas.empty() || spec.norms.empty())
        throw std::invalid_argument("sweep_replicated: empty grid");
    const std::size_t nc = spec.cos_thetas.size(), nn = spec.norms.size();
    std::vector<ReplicatedRow> rows(spec.ys.size() * nc * nn);
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        const int y = spec.ys[i / (nc * nn)];
        const double cos_theta = spec.cos_thetas[(i / nn) % nc];
        const double n = spec.norms[i % nn];
        ReplicatedRow row{spec.alpha, spec.delta, spec.rho, y, cos_theta, n, spec.bias,
                          NAN, NAN, NAN, NAN, NAN, NAN, false};
        try {
            ReplicaSolution sol;
            if (y == 0) {
                sol = solve_large_y(spec.alpha, spec.delta, spec.rho, n * n, n * n * cos_theta, spec.bias,
                                    spec.learned_bias);
            } else {
                ReplicaConstraints c{y, n * n, cos_theta, spec.bias, spec.learned_bias};
                sol = solve_replicated_mse(spec.alpha, spec.delta, spec.rho, c);
                sol.converged = sol.residual < 1e-6;
            }
            row.b = sol.bias;
            row.m = sol.m;
            row.dq0 = sol.dq0;
            row.q_bar = sol.q_bar;
            row.b_bar = sol.b_bar;
            row.train_err = sol.train_err / spec.alpha;
            row.gen_err_center = sol.gen_err_center;
            row.converged = sol.converged;
        } catch (const std::range_error&) {
            row.converged = false;
        }
        rows[i] = row;
    });
    return rows;
}

}  // namespace flatlab
