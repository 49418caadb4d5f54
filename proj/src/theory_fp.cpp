#include "flatlab/theory_fp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "flatlab/parallel.hpp"

namespace flatlab {

FpReference FpReference::from_rs(const RsSolution& sol, double alpha, double delta, double rho) {
    return {alpha, delta, rho, sol.lambda, sol.m, sol.q_norm, sol.dq, sol.dm_hat, sol.dq_hat_Q, sol.dq_hat, sol.bias};
}

void FpParams::validate() const {
    const double q = reference.q_norm;
    if (!(q > 0.0)) throw std::invalid_argument("FpParams: reference norm must be positive");
    if (!(std::abs(overlap_s) < q)) throw std::invalid_argument("FpParams: |S| must be below sqrt(P Q)");
    if (!(beta > 0.0)) throw std::invalid_argument("FpParams: beta must be positive");
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

struct Energetic {
    double ge = 0.0;     // E ln H_beta
    double d_o = 0.0;    // d/dO
    double d_dt = 0.0;   // d/d(dt)
    double d_p = 0.0;    // d/dp
    double train = 0.0;  // e^-beta E[H(a)/H_beta(-a)]
};

// Accumulates the integrand at a = A/c for weight w; dadt is dA/d(dt).
struct Accumulator {
    double beta, eb, log1m_eb, c;
    Energetic e;

    void add(double w, double a, double dadt) {
        const double lh = log_gauss_tail(-a);
        const double l1 = log1m_eb + lh;
        const double lhb = (-beta > l1) ? -beta + std::log1p(std::exp(l1 + beta)) : l1 + std::log1p(std::exp(-beta - l1));
        const double gp = std::exp(log1m_eb - 0.5 * a * a - 0.5 * kLog2Pi - lhb) / c;
        e.ge += w * lhb;
        e.d_o += w * gp;
        e.d_dt += w * gp * dadt;
        e.d_p += w * gp * gp;
        e.train += w * std::exp(-beta + log_gauss_tail(a) - lhb);
    }
};

const QuadratureRule& legendre16() {
    static const QuadratureRule rule = gauss_legendre(16);
    return rule;
}

// Gaussian-weighted panel rule for a step located where c t = mu + s z, t in the transition window.
void panel_rule(double mu, double s, double c, double beta, std::vector<double>& z, std::vector<double>& w) {
    const double lim = 12.0;
    std::vector<double> breaks;
    for (int i = -12; i <= 12; ++i) breaks.push_back(i);
    if (s > 0.0 && c / s < 2.0) {
        const double t_lo = -std::sqrt(2.0 * beta) - 8.0, t_hi = 8.0;
        double za = std::max((c * t_lo - mu) / s, -lim);
        double zb = std::min((c * t_hi - mu) / s, lim);
        if (za < zb) {
            const double width = 0.5 * c / s;
            const long n = long(std::ceil((zb - za) / width));
            for (long i = 0; i <= n; ++i) breaks.push_back(za + (zb - za) * double(i) / double(n));
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    const QuadratureRule& gl = legendre16();
    z.clear();
    w.clear();
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double half = 0.5 * (breaks[k + 1] - breaks[k]);
        const double mid = 0.5 * (breaks[k + 1] + breaks[k]);
        for (std::size_t i = 0; i < gl.size(); ++i) {
            const double zz = mid + half * gl.nodes[i];
            z.push_back(zz);
            w.push_back(half * gl.weights[i] * gauss_pdf(zz));
        }
    }
}

Energetic energetic(const FpParams& prm, double p, double o, double dt, const FpOptions& opts) {
    const FpReference& r = prm.reference;
    const double D = r.delta, q = r.q_norm, s_ov = prm.overlap_s, beta = prm.beta;
    const double gamma = p - s_ov * s_ov / q;
    const double c = std::sqrt(D * (q - p));
    const double g = 1.0 + D * r.dq;
    Accumulator acc{beta, std::exp(-beta), std::log(-std::expm1(-beta)), c, {}};
    Energetic out;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? r.rho : 1.0 - r.rho;
        acc.e = {};
        if (opts.quadrature == FpQuadrature::Panels) {
            // h* is linear in x, so the field is mu + a_x x + sqrt(D gamma) y: one Gaussian direction.
            const double ax = std::sqrt(D / q) * s_ov - D * dt * std::sqrt(D * q) / g;
            const double s = std::sqrt(ax * ax + D * std::max(gamma, 0.0));
            const double mu = sigma * r.bias + o - D * dt * (r.m + r.bias * sigma - 1.0) / g;
            const double dmu = -D * (r.m + r.bias * sigma - 1.0) / g;
            const double dax = -D * std::sqrt(D * q) / g;
            const double ds = s > 0.0 ? ax * dax / s : 0.0;
            thread_local std::vector<double> z, w;
            panel_rule(mu, s, c, beta, z, w);
            for (std::size_t i = 0; i < z.size(); ++i) acc.add(w[i], (mu + s * z[i]) / c, dmu + z[i] * ds);
        } else {
            const QuadratureRule rule = opts.hermite_nodes == kDefaultQuadratureNodes ? default_gauss_hermite()
                                                                                  : gauss_hermite(opts.hermite_nodes);
            for (std::size_t i = 0; i < rule.size(); ++i) {
                const double x = rule.nodes[i];
                const double h = h_star_mse(x, sigma, r.m, q, r.dq, r.bias, D);
                const double dadt = std::sqrt(D / r.dq) * h;
                for (std::size_t j = 0; j < rule.size(); ++j) {
                    const double y = rule.nodes[j];
                    const double A = sigma * r.bias + o + std::sqrt(D * std::max(gamma, 0.0)) * y +
                                     std::sqrt(D / q) * s_ov * x + dadt * dt;
                    acc.add(rule.weights[i] * rule.weights[j], A / c, dadt);
                }
            }
        }
        out.ge += ws * acc.e.ge;
        out.d_o += ws * acc.e.d_o;
        out.d_dt += ws * acc.e.d_dt;
        out.d_p += ws * acc.e.d_p;
        out.train += ws * acc.e.train;
    }
    out.d_p *= -0.5 * D;
    return out;
}

double reference_k(const FpReference& r) {
    const double l = r.dq_hat + r.lambda;
    return (r.dq_hat_Q + r.dm_hat * r.dm_hat) / (l * l);
}

double entropic(const FpParams& prm, const std::vector<double>& v) {
    const FpReference& r = prm.reference;
    const double p = v[0], p_hat = v[1], P_hat = v[2], o = v[3], o_hat = v[4], dt = v[5], dt_hat = v[6], dS = v[7];
    const double P = prm.norm_p(), S = prm.overlap_s;
    const double l = r.dq_hat + r.lambda;
    const double K = reference_k(r);
    const double D = p_hat - 2.0 * P_hat;
    return p * p_hat / 2.0 - dt * dt_hat - P * P_hat - o * o_hat - S * dS + 0.5 * std::log(2.0 * std::numbers::pi / D) +
           ((p_hat + o_hat * o_hat) / 2.0 + dS * dS * K / 2.0 + dS * (dt_hat + r.dm_hat * o_hat) / l) / D;
}

}  // namespace

double fp_free_entropy_at(const FpParams& params, const std::vector<double>& v, const FpOptions& opts) {
    const double ge = params.reference.alpha > 0.0 ? energetic(params, v[0], v[3], v[5], opts).ge : 0.0;
    return entropic(params, v) + params.reference.alpha * ge;
}

std::vector<double> fp_variables(const FpSolution& s) {
    return {s.p, s.p_hat, s.P_hat, s.o, s.o_hat, s.delta_t, s.dt_hat, s.dS_hat};
}

FpSolution fp_free_entropy(const FpParams& params, const FpOptions& opts) {
    params.validate();
    const FpReference& r = params.reference;
    const double P = params.norm_p(), S = params.overlap_s, q = r.q_norm;
    const double K = reference_k(r);
    const double alpha = r.alpha;
    double p = S * S / q + 0.5 * (P - S * S / q);
    double o = S * r.m / q;
    double dt = S * r.dq / q;
    FpSolution sol;
    double p_hat = 0, o_hat = 0, dt_hat = 0, D = 0, dS = 0;
    Energetic e;
    for (long it = 1; it <= opts.max_iters; ++it) {
        e = alpha > 0.0 ? energetic(params, p, o, dt, opts) : Energetic{};
        p_hat = -2.0 * alpha * e.d_p;
        o_hat = alpha * e.d_o;
        dt_hat = alpha * e.d_dt;
        const double c = r.dq * dt_hat + r.m * o_hat;
        const double g0 = P - S * S / K;
        const double R = p_hat + o_hat * o_hat - c * c / K;
        D = (1.0 + std::sqrt(1.0 + 4.0 * g0 * R)) / (2.0 * g0);
        dS = (S * D - c) / K;
        const double np = P - 1.0 / D, no = (o_hat + dS * r.m) / D, ndt = dS * r.dq / D;
        if (!std::isfinite(np) || !std::isfinite(no) || !std::isfinite(ndt))
            throw DivergenceError("fp_free_entropy: non-finite iterate", {p, o, dt});
        const double diff = std::max({std::abs(np - p), std::abs(no - o), std::abs(ndt - dt)});
        p = (1.0 - opts.damping) * p + opts.damping * np;
        o = (1.0 - opts.damping) * o + opts.damping * no;
        dt = (1.0 - opts.damping) * dt + opts.damping * ndt;
        sol.iterations = it;
        sol.residual = diff;
        if (diff < opts.tol) {
            sol.converged = true;
            break;
        }
    }
    // Conjugates consistent with the final order parameters.
    e = alpha > 0.0 ? energetic(params, p, o, dt, opts) : Energetic{};
    p_hat = -2.0 * alpha * e.d_p;
    o_hat = alpha * e.d_o;
    dt_hat = alpha * e.d_dt;
    {
        const double c = r.dq * dt_hat + r.m * o_hat;
        const double g0 = P - S * S / K;
        const double R = p_hat + o_hat * o_hat - c * c / K;
        D = (1.0 + std::sqrt(1.0 + 4.0 * g0 * R)) / (2.0 * g0);
        dS = (S * D - c) / K;
    }
    sol.p = p;
    sol.o = o;
    sol.delta_t = dt;
    sol.gamma = p - S * S / q;
    sol.p_hat = p_hat;
    sol.P_hat = (p_hat - D) / 2.0;
    sol.o_hat = o_hat;
    sol.dt_hat = dt_hat;
    sol.dS_hat = dS;
    sol.free_entropy = entropic(params, fp_variables(sol)) + alpha * e.ge;
    sol.train_err_w = alpha * e.train;
    if (sol.gamma < 0.0 || p > P) sol.converged = false;
    return sol;
}

double fp_train_error(const FpSolution& sol, const FpParams&) { return sol.train_err_w; }

double fp_stationarity_residual(const FpParams& params, const FpSolution& sol, const FpOptions& opts) {
    const std::vector<double> v = fp_variables(sol);
    auto f = [&](std::vector<double> x, std::size_t i, double shift) {
        x[i] += shift;
        return fp_free_entropy_at(params, x, opts);
    };
    // p is confined to (S^2/Q, P) and the free entropy is singular at both ends,
    // so its scale is the distance to the nearer one.
    const double room = std::min(sol.p - params.overlap_s * params.overlap_s / params.reference.q_norm,
                                 params.norm_p() - sol.p);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double scale = i == 0 ? room : std::max(1e-3, std::abs(v[i]));
        if (!(scale > 0.0)) return INFINITY;
        const double h = 1e-4 * scale;
        const double g = (8.0 * (f(v, i, h) - f(v, i, -h)) - (f(v, i, 2.0 * h) - f(v, i, -2.0 * h))) / (12.0 * h);
        worst = std::max(worst, std::abs(g) * scale);
    }
    return worst;
}

double total_log_volume(double q_norm, double s) {
    return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi) + std::log(q_norm - s * s / q_norm));
}

double total_log_volume_lambda(double lambda, double s) {
    return 0.5 * (1.0 + std::log(2.0 * std::numbers::pi) + std::log(1.0 / lambda - lambda * s * s));
}

double oracle_train_error(double alpha, double delta) { return alpha * gauss_tail(1.0 / std::sqrt(delta)); }

std::string CutoffPolicy::name() const {
    switch (kind) {
        case Kind::ReferenceTrainError: return "reference";
        case Kind::Oracle: return "oracle";
        case Kind::Value: return "value";
    }
    return "unknown";
}

double CutoffPolicy::cutoff(const FpReference& r) const {
    switch (kind) {
        case Kind::ReferenceTrainError: {
            RsSolution sol;
            sol.m = r.m;
            sol.q_norm = r.q_norm;
            sol.dq = r.dq;
            sol.bias = r.bias;
            return rs_train_error(sol, r.alpha, r.delta, r.rho);
        }
        case Kind::Oracle: return oracle_train_error(r.alpha, r.delta);
        case Kind::Value: return value;
    }
    return value;
}

BetaCalibration calibrate_beta(const FpReference& ref, double overlap_s, double target, const FpOptions& opts,
                               double log_beta_lo, double log_beta_hi) {
    auto solve_at = [&](double lb) {
        FpSolution s = fp_free_entropy({ref, overlap_s, std::exp(lb)}, opts);
        if (!s.converged) throw ConvergenceError("calibrate_beta: free-entropy solve failed");
        return s;
    };
    const double hi_err = solve_at(log_beta_lo).train_err_w;  // small beta, large error
    const double lo_err = solve_at(log_beta_hi).train_err_w;
    if (!(target <= hi_err && target >= lo_err)) {
        throw std::range_error("calibrate_beta: cutoff " + std::to_string(target) + " outside attainable [" +
                               std::to_string(lo_err) + ", " + std::to_string(hi_err) + "]");
    }
    auto f = [&](double lb) { return solve_at(lb).train_err_w - target; };
    const double lb = bracket_root(f, log_beta_lo, log_beta_hi, 1e-12);
    return {std::exp(lb), solve_at(lb)};
}

FpCurvePoint fp_curve_point(const FpReference& ref, const CutoffPolicy& policy, double d, const FpOptions& opts) {
    FpCurvePoint pt;
    pt.d = d;
    pt.s = ref.q_norm * (1.0 - d);
    pt.eps_bar = policy.cutoff(ref);
    try {
        if (!(d > 0.0 && d <= 1.0)) throw std::invalid_argument("distance must lie in (0, 1]");
        BetaCalibration cal = calibrate_beta(ref, pt.s, pt.eps_bar, opts);
        pt.beta = cal.beta;
        const double h = 1e-4 * cal.beta;
        FpSolution plus = fp_free_entropy({ref, pt.s, cal.beta + h}, opts);
        FpSolution minus = fp_free_entropy({ref, pt.s, cal.beta - h}, opts);
        pt.free_entropy = cal.solution.free_entropy;
        pt.local_energy = -(plus.free_entropy - minus.free_entropy) / (2.0 * h);
        pt.local_entropy = pt.free_entropy + cal.beta * pt.local_energy;
        pt.local_entropy_norm = pt.local_entropy - total_log_volume(ref.q_norm, pt.s);
        pt.train_err = cal.solution.train_err_w;
        pt.converged = cal.solution.converged && plus.converged && minus.converged;
    } catch (const std::exception& e) {
        pt.converged = false;
        pt.failure = e.what();
        pt.beta = pt.free_entropy = pt.local_energy = pt.local_entropy = pt.local_entropy_norm = pt.train_err = NAN;
    }
    return pt;
}

std::vector<FpCurvePoint> normalized_local_entropy_curve(const FpReference& ref, const CutoffPolicy& policy,
                                                         const std::vector<double>& d_grid, int threads,
                                                         const FpOptions& opts) {
    if (d_grid.empty()) throw std::invalid_argument("normalized_local_entropy_curve: empty distance grid");
    std::vector<FpCurvePoint> out(d_grid.size());
    parallel_for(d_grid.size(), threads, [&](std::size_t i) { out[i] = fp_curve_point(ref, policy, d_grid[i], opts); });
    return out;
}

std::vector<double> default_distance_grid() {
    std::vector<double> d(24);
    const double lo = std::log(1e-3), hi = std::log(0.9);
    for (int i = 0; i < 24; ++i) d[i] = std::exp(lo + (hi - lo) * i / 23.0);
    return d;
}

}  // namespace flatlab
