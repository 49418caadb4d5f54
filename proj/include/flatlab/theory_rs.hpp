#pragma once

#include <functional>
#include <string>
#include <vector>

#include "flatlab/numerics.hpp"

namespace flatlab {

struct BiasPolicy {
    enum class Mode { Fixed, Learned };
    Mode mode = Mode::Fixed;
    double value = 0.0;  // used when Fixed

    static BiasPolicy fixed(double b) { return {Mode::Fixed, b}; }
    static BiasPolicy learned() { return {Mode::Learned, 0.0}; }
    bool is_learned() const { return mode == Mode::Learned; }
    std::string name() const { return is_learned() ? "learned" : "fixed"; }
};

// Single-pattern loss of the signed field. MSE takes the closed-form path.
struct Loss {
    std::string name = "mse";
    std::function<double(double)> ell;
    bool closed_form_mse = true;

    static Loss mse();
    // Any convex loss; solved through the scalar minimizer and quadrature.
    static Loss generic(std::string name, std::function<double(double)> ell);
};

struct RsSolution {
    double m = 0.0;
    double q_norm = 1.0;
    double dq = 1.0;
    double dm_hat = 0.0;
    double dq_hat_Q = 0.0;
    double dq_hat = 0.0;
    double bias = 0.0;
    double lambda = 0.0;
    bool converged = false;
    double residual = 0.0;
    long iterations = 0;
};

struct RsOptions {
    FixedPointConfig fixed_point{};
    int quad_nodes = kDefaultQuadratureNodes;
    double bias_lo = -5.0;
    double bias_hi = 5.0;
    double bias_tol = 1e-12;
};

double h_star_mse(double x, double sigma, double m, double q_norm, double dq, double b, double delta);

// argmin_h [h^2/2 + loss(sqrt(delta dq) h + sqrt(delta Q) x + M + sigma b)] by the scalar minimizer.
double h_star_generic(double x, double sigma, double m, double q_norm, double dq, double b, double delta,
                      const Loss& loss);

RsSolution solve_rs(double alpha, double delta, double rho, double lambda, BiasPolicy bias,
                    const Loss& loss = Loss::mse(), const RsOptions& opts = {});

// Training errors per N (alpha * rate) and the per-pattern rate.
double rs_train_error(const RsSolution& sol, double alpha, double delta, double rho,
                      const Loss& loss = Loss::mse());
double rs_train_error_rate(const RsSolution& sol, double alpha, double delta, double rho,
                           const Loss& loss = Loss::mse());

// Training loss per N: closed form for MSE, quadrature otherwise.
double rs_train_loss(const RsSolution& sol, double alpha, double delta, double rho, const Loss& loss = Loss::mse());
double rs_train_loss_quadrature(const RsSolution& sol, double alpha, double delta, double rho, const Loss& loss,
                                int quad_nodes = kDefaultQuadratureNodes);

double rs_gen_error(const RsSolution& sol, double delta, double rho);
double rs_test_loss(const RsSolution& sol, double delta, double rho);

// E_sigma sigma int Dx h*: zero at the learned bias.
double rs_bias_stationarity(const RsSolution& sol, double delta, double rho, const Loss& loss = Loss::mse(),
                            int quad_nodes = kDefaultQuadratureNodes);

struct RsRow {
    double alpha, delta, rho, lambda;
    std::string bias_policy;
    double b, m, q_norm, dq;
    double gen_err, train_err, train_loss, test_loss;  // errors and losses per pattern
    bool converged;
    long iters;
};

struct RsSweepSpec {
    double alpha = 0.7, delta = 1.0, rho = 0.5;
    std::vector<double> lambdas;
    std::vector<double> fixed_biases;
    bool learned = false;
    RsOptions options{};
};

RsRow rs_row(double alpha, double delta, double rho, double lambda, BiasPolicy bias, const RsOptions& opts = {});

// One row per (lambda, b) plus one learned-bias row per lambda; sorted by (bias_policy, b, lambda).
std::vector<RsRow> sweep_rs(const RsSweepSpec& spec, int threads = 1);

}  // namespace flatlab
