#pragma once

#include <string>
#include <vector>

#include "flatlab/theory_rs.hpp"

namespace flatlab {

// Reference minimizer of the regularized MSE loss, with its model parameters.
struct FpReference {
    double alpha, delta, rho, lambda;
    double m, q_norm, dq, dm_hat, dq_hat_Q, dq_hat, bias;

    static FpReference from_rs(const RsSolution& sol, double alpha, double delta, double rho);
};

struct FpParams {
    FpReference reference;
    double overlap_s;  // S = w.w_ref / N
    double beta;       // inverse temperature of the constrained error-counting measure

    double norm_p() const { return reference.q_norm; }
    void validate() const;
};

enum class FpQuadrature {
    Panels,           // 1D Gauss-Legendre panels, refined where the integrand steps
    GaussHermite2D,   // tensor Gauss-Hermite over (x, y); inaccurate at small distance
};

struct FpOptions {
    double damping = 0.5;
    double tol = 1e-11;
    long max_iters = 20000;
    FpQuadrature quadrature = FpQuadrature::Panels;
    int hermite_nodes = kDefaultQuadratureNodes;
};

struct FpSolution {
    double p = 0.0, o = 0.0, delta_t = 0.0, gamma = 0.0;
    double p_hat = 0.0, P_hat = 0.0, o_hat = 0.0, dS_hat = 0.0, dt_hat = 0.0;
    double free_entropy = 0.0;  // -beta f
    double local_energy = 0.0;  // filled by the curve driver (finite difference in beta)
    double local_entropy = 0.0;
    double train_err_w = 0.0;  // per N
    bool converged = false;
    long iterations = 0;
    double residual = 0.0;
};

FpSolution fp_free_entropy(const FpParams& params, const FpOptions& opts = {});
double fp_train_error(const FpSolution& sol, const FpParams& params);

// Free entropy at arbitrary values of {p, p_hat, P_hat, O, O_hat, dt, dt_hat, dS_hat}.
double fp_free_entropy_at(const FpParams& params, const std::vector<double>& vars, const FpOptions& opts = {});
std::vector<double> fp_variables(const FpSolution& sol);
// Largest |dF/dv| * scale(v) over the variables, by finite differences. The scale is
// |v| (at least 1e-3), and for p its distance to the nearer end of (S^2/Q, P).
double fp_stationarity_residual(const FpParams& params, const FpSolution& sol, const FpOptions& opts = {});

// Log-volume of norm-Q vectors at overlap S with a norm-Q reference, no data.
double total_log_volume(double q_norm, double s);
// The same volume written for a reference of squared norm 1/lambda.
double total_log_volume_lambda(double lambda, double s);

// Training error per N of the oracle classifier w = v*, b = 0.
double oracle_train_error(double alpha, double delta);

struct CutoffPolicy {
    enum class Kind { ReferenceTrainError, Oracle, Value };
    Kind kind = Kind::ReferenceTrainError;
    double value = 0.0;  // per N, used when kind == Value

    std::string name() const;
    double cutoff(const FpReference& ref) const;
};

struct BetaCalibration {
    double beta;
    FpSolution solution;
};

// beta with fp_train_error = target (per N) to 1e-4, by bracketing in log beta.
BetaCalibration calibrate_beta(const FpReference& ref, double overlap_s, double target, const FpOptions& opts = {},
                               double log_beta_lo = -8.0, double log_beta_hi = 6.0);

struct FpCurvePoint {
    double d = 0, s = 0, beta = 0, eps_bar = 0;
    double free_entropy = 0, local_energy = 0, local_entropy = 0, local_entropy_norm = 0;
    double train_err = 0;
    bool converged = false;
    std::string failure;
};

FpCurvePoint fp_curve_point(const FpReference& ref, const CutoffPolicy& policy, double d, const FpOptions& opts = {});

std::vector<FpCurvePoint> normalized_local_entropy_curve(const FpReference& ref, const CutoffPolicy& policy,
                                                         const std::vector<double>& d_grid, int threads = 1,
                                                         const FpOptions& opts = {});

std::vector<double> default_distance_grid();

}  // namespace flatlab
