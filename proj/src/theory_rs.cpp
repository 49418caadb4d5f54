#include "flatlab/theory_rs.hpp"

#include <cmath>
#include <stdexcept>

#include "flatlab/model.hpp"
#include "flatlab/parallel.hpp"

namespace flatlab {

Loss Loss::mse() {
    return {"mse", [](double x) { return 0.5 * (x - 1.0) * (x - 1.0); }, true};
}

Loss Loss::generic(std::string name, std::function<double(double)> ell) { return {std::move(name), std::move(ell), false}; }

double h_star_mse(double x, double sigma, double m, double q_norm, double dq, double b, double delta) {
    double u = std::sqrt(delta * q_norm) * x + m + b * sigma - 1.0;
    return -std::sqrt(delta * dq) * u / (1.0 + delta * dq);
}

double h_star_generic(double x, double sigma, double m, double q_norm, double dq, double b, double delta,
                      const Loss& loss) {
    const double c = std::sqrt(delta * dq);
    const double shift = std::sqrt(delta * q_norm) * x + m + b * sigma;
    auto objective = [&](double h) { return 0.5 * h * h + loss.ell(c * h + shift); };
    const double width = 20.0 + 5.0 * std::abs(shift) * (1.0 + c);
    return minimize_scalar(objective, -width, width, 1e-10).argmin;
}

namespace {

struct Conjugates {
    double dm_hat, dq_hat_Q, dq_hat;
};

double h_star(double x, double sigma, double m, double q, double dq, double b, double delta, const Loss& loss) {
    return loss.closed_form_mse ? h_star_mse(x, sigma, m, q, dq, b, delta)
                                : h_star_generic(x, sigma, m, q, dq, b, delta, loss);
}

// Conjugates as Gaussian integrals of h*; the dq_hat integral uses Stein's identity
// E[x h] = E[h'] in place of the derivative form.
Conjugates conjugates(double alpha, double delta, double rho, double m, double q, double dq, double b,
                      const Loss& loss, const QuadratureRule& rule) {
    double first = 0.0, second = 0.0, stein = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        double i1 = 0.0, i2 = 0.0, i3 = 0.0;
        for (std::size_t i = 0; i < rule.size(); ++i) {
            double x = rule.nodes[i];
            double h = h_star(x, sigma, m, q, dq, b, delta, loss);
            i1 += rule.weights[i] * h;
            i2 += rule.weights[i] * h * h;
            i3 += rule.weights[i] * x * h;
        }
        first += ws * i1;
        second += ws * i2;
        stein += ws * i3;
    }
    Conjugates c;
    c.dm_hat = alpha / std::sqrt(delta * dq) * first;
    c.dq_hat_Q = alpha / dq * second;
    c.dq_hat = -alpha / std::sqrt(q * dq) * stein;
    return c;
}

RsSolution solve_fixed_bias(double alpha, double delta, double rho, double lambda, double b, const Loss& loss,
                            const RsOptions& opts, const QuadratureRule& rule) {
    // Iterate on rescaled variables so the absolute tolerance acts relatively when
    // a large lambda shrinks the solution.
    const double s = 1.0 + lambda;
    auto map = [&](const std::vector<double>& v) {
        double m = v[0] / s, q = v[1] / (s * s), dq = v[2] / s;
        if (!(q > 0.0) || !(dq > 0.0)) return std::vector<double>{NAN, NAN, NAN};
        Conjugates c = conjugates(alpha, delta, rho, m, q, dq, b, loss, rule);
        double den = lambda + c.dq_hat;
        return std::vector<double>{s * c.dm_hat / den, s * s * (c.dq_hat_Q + c.dm_hat * c.dm_hat) / (den * den),
                                   s / den};
    };
    std::vector<double> x0{0.1 * s, 1.0 * s * s, 1.0 * s};
    FixedPointResult r;
    try {
        r = fixed_point(map, x0, opts.fixed_point);
    } catch (const DivergenceError& e) {
        RsSolution bad;
        bad.m = e.last_finite()[0] / s;
        bad.q_norm = e.last_finite()[1] / (s * s);
        bad.dq = e.last_finite()[2] / s;
        bad.bias = b;
        bad.lambda = lambda;
        bad.converged = false;
        bad.residual = INFINITY;
        return bad;
    }
    RsSolution sol;
    sol.m = r.x[0] / s;
    sol.q_norm = r.x[1] / (s * s);
    sol.dq = r.x[2] / s;
    Conjugates c = conjugates(alpha, delta, rho, sol.m, sol.q_norm, sol.dq, b, loss, rule);
    sol.dm_hat = c.dm_hat;
    sol.dq_hat_Q = c.dq_hat_Q;
    sol.dq_hat = c.dq_hat;
    sol.bias = b;
    sol.lambda = lambda;
    sol.converged = r.converged;
    sol.residual = r.residual;
    sol.iterations = r.iterations;
    return sol;
}

void validate(double alpha, double delta, double rho, double lambda) {
    if (!(alpha > 0.0)) throw std::invalid_argument("solve_rs: alpha must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("solve_rs: delta must be positive");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("solve_rs: rho must lie in (0,1)");
    if (lambda < 0.0) throw std::invalid_argument("solve_rs: lambda must be nonnegative");
    if (lambda == 0.0 && alpha <= 1.0)
        throw std::invalid_argument("solve_rs: lambda = 0 requires alpha > 1 for a unique minimizer");
}

}  // namespace

double rs_bias_stationarity(const RsSolution& sol, double delta, double rho, const Loss& loss, int quad_nodes) {
    const QuadratureRule rule = quad_nodes == kDefaultQuadratureNodes ? default_gauss_hermite() : gauss_hermite(quad_nodes);
    double acc = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        acc += ws * sigma * rule.integrate([&](double x) {
            return h_star(x, sigma, sol.m, sol.q_norm, sol.dq, sol.bias, delta, loss);
        });
    }
    return acc;
}

RsSolution solve_rs(double alpha, double delta, double rho, double lambda, BiasPolicy bias, const Loss& loss,
                    const RsOptions& opts) {
    validate(alpha, delta, rho, lambda);
    opts.fixed_point.validate();
    const QuadratureRule rule =
        opts.quad_nodes == kDefaultQuadratureNodes ? default_gauss_hermite() : gauss_hermite(opts.quad_nodes);
    if (!bias.is_learned()) return solve_fixed_bias(alpha, delta, rho, lambda, bias.value, loss, opts, rule);

    // E_sigma sigma int h* decreases in b; bisect it to zero with a fresh inner solve per probe.
    auto stationarity = [&](double b) {
        RsSolution s = solve_fixed_bias(alpha, delta, rho, lambda, b, loss, opts, rule);
        if (!s.converged) throw ConvergenceError("solve_rs: inner solve failed during bias search");
        return rs_bias_stationarity(s, delta, rho, loss, opts.quad_nodes);
    };
    double b = bisect_root(stationarity, opts.bias_lo, opts.bias_hi, opts.bias_tol);
    return solve_fixed_bias(alpha, delta, rho, lambda, b, loss, opts, rule);
}

namespace {

// Signed post-minimization field at Gaussian coordinate x.
double relaxed_field(double x, double sigma, const RsSolution& sol, double delta, const Loss& loss) {
    double h = h_star(x, sigma, sol.m, sol.q_norm, sol.dq, sol.bias, delta, loss);
    return std::sqrt(delta * sol.dq) * h + std::sqrt(delta * sol.q_norm) * x + sol.m + sigma * sol.bias;
}

}  // namespace

double rs_train_error_rate(const RsSolution& sol, double /*alpha*/, double delta, double rho, const Loss& loss) {
    double rate = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        double p;
        if (loss.closed_form_mse) {
            p = gauss_tail((delta * sol.dq + sol.m + sol.bias * sigma) / std::sqrt(delta * sol.q_norm));
        } else {
            // The relaxed field is nondecreasing in x; errors are the mass below its zero.
            auto f = [&](double x) { return relaxed_field(x, sigma, sol, delta, loss); };
            const double lim = 40.0;
            if (f(-lim) >= 0.0) {
                p = 0.0;
            } else if (f(lim) < 0.0) {
                p = 1.0;
            } else {
                double x0 = bisect_root(f, -lim, lim, 1e-12);
                p = gauss_tail(-x0);
            }
        }
        rate += ws * p;
    }
    return rate;
}

double rs_train_error(const RsSolution& sol, double alpha, double delta, double rho, const Loss& loss) {
    return alpha * rs_train_error_rate(sol, alpha, delta, rho, loss);
}

double rs_train_loss(const RsSolution& sol, double alpha, double delta, double rho, const Loss& loss) {
    if (!loss.closed_form_mse) return rs_train_loss_quadrature(sol, alpha, delta, rho, loss);
    const double s = 2.0 * rho - 1.0;
    const double e2 = (sol.m - 1.0) * (sol.m - 1.0) + sol.bias * sol.bias + 2.0 * sol.bias * s * (sol.m - 1.0);
    const double g = 1.0 + delta * sol.dq;
    return alpha * 0.5 * (delta * sol.q_norm + e2) / (g * g);
}

double rs_train_loss_quadrature(const RsSolution& sol, double alpha, double delta, double rho, const Loss& loss,
                                int quad_nodes) {
    const QuadratureRule rule = gauss_hermite(quad_nodes);
    double acc = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sigma = k == 0 ? 1.0 : -1.0;
        const double ws = k == 0 ? rho : 1.0 - rho;
        acc += ws * rule.integrate([&](double x) { return loss.ell(relaxed_field(x, sigma, sol, delta, loss)); });
    }
    return alpha * acc;
}

double rs_gen_error(const RsSolution& sol, double delta, double rho) {
    return gen_error_closed_form({sol.m, sol.q_norm}, sol.bias, delta, rho);
}

double rs_test_loss(const RsSolution& sol, double delta, double rho) {
    return test_loss_mse({sol.m, sol.q_norm}, sol.bias, delta, rho);
}

RsRow rs_row(double alpha, double delta, double rho, double lambda, BiasPolicy bias, const RsOptions& opts) {
    RsRow row{alpha, delta, rho, lambda, bias.name(), bias.value, NAN, NAN, NAN, NAN, NAN, NAN, NAN, false, 0};
    RsSolution sol;
    try {
        sol = solve_rs(alpha, delta, rho, lambda, bias, Loss::mse(), opts);
    } catch (const std::runtime_error&) {
        return row;
    }
    row.b = sol.bias;
    row.m = sol.m;
    row.q_norm = sol.q_norm;
    row.dq = sol.dq;
    row.converged = sol.converged;
    row.iters = sol.iterations;
    if (sol.converged) {
        row.gen_err = rs_gen_error(sol, delta, rho);
        row.train_err = rs_train_error_rate(sol, alpha, delta, rho);
        row.train_loss = rs_train_loss(sol, alpha, delta, rho) / alpha;
        row.test_loss = rs_test_loss(sol, delta, rho);
    }
    return row;
}

std::vector<RsRow> sweep_rs(const RsSweepSpec& spec, int threads) {
    if (spec.lambdas.empty()) throw std::invalid_argument("sweep_rs: empty lambda grid");
    if (spec.fixed_biases.empty() && !spec.learned) throw std::invalid_argument("sweep_rs: no bias grid");
    std::vector<BiasPolicy> policies;
    for (double b : spec.fixed_biases) policies.push_back(BiasPolicy::fixed(b));
    if (spec.learned) policies.push_back(BiasPolicy::learned());
    const std::size_t nl = spec.lambdas.size();
    std::vector<RsRow> rows(policies.size() * nl);
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        rows[i] = rs_row(spec.alpha, spec.delta, spec.rho, spec.lambdas[i % nl], policies[i / nl], spec.options);
    });
    return rows;
}

}  // namespace flatlab
