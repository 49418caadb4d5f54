#pragma once

#include <string>
#include <vector>

namespace flatlab {

struct ReplicaConstraints {
    int y = 1;
    double q_norm = 1.0;     // Q = n^2
    double cos_theta = 0.0;  // q1 / Q
    double bias = 0.0;       // shared bias when not learned
    bool learned_bias = false;

    double q1() const { return q_norm * cos_theta; }
    void validate() const;
};

struct ReplicaSolution {
    double m = 0.0;
    double dq0 = 0.0;  // for the large-y solution, the rescaled y * dq0
    double dq0_hat = 0.0;
    double dq1_hat = 0.0;  // for the large-y solution, the rescaled y * dq1_hat
    double dm_hat = 0.0;
    double m_bar = 0.0;
    double q_bar = 0.0;
    double b_bar = 0.0;
    double bias = 0.0;
    double train_err = 0.0;  // per N (alpha times the per-pattern rate)
    double gen_err_center = 0.0;
    bool converged = false;
    bool large_y = false;
    double residual = 0.0;
};

struct BarycenterObservables {
    double m_bar, q_bar, b_bar;
};

BarycenterObservables barycenter_observables(double m, double q_norm, double q1, double y, double b);

double theta_max(int y);

ReplicaSolution solve_replicated_mse(double alpha, double delta, double rho, const ReplicaConstraints& c);

// y -> infinity with the rescaled (y dq0, y dq1_hat); center uses Q_bar = q1.
ReplicaSolution solve_large_y(double alpha, double delta, double rho, double q_norm, double q1, double b,
                              bool learned_bias = false);

double replica_train_error(const ReplicaSolution& sol, double alpha, double delta, double rho,
                           const ReplicaConstraints& c);

// Largest barycenter norm with a large-beta solution (infinite when alpha >= 1).
double max_barycenter_norm(double alpha, double delta, double rho, double b, bool learned_bias);

// Negative free energy of the replicated system as a function of
// {M, dq0, dm_hat, dq0_hat, dq1_hat} (and b when learned) at fixed (Q, q1, y).
double replicated_free_entropy(double alpha, double delta, double rho, const ReplicaConstraints& c,
                               const std::vector<double>& vars);

// Max-abs centered finite-difference gradient of replicated_free_entropy at the solution.
double replicated_stationarity_residual(double alpha, double delta, double rho, const ReplicaConstraints& c,
                                        const ReplicaSolution& sol);

struct ReplicatedRow {
    double alpha, delta, rho;
    int y;  // 0 marks the large-y solution
    double cos_theta, norm, b, m, dq0, q_bar, b_bar, train_err, gen_err_center;
    bool converged;
};

struct ReplicatedSweepSpec {
    double alpha = 0.7, delta = 1.0, rho = 0.5;
    std::vector<int> ys;  // 0 requests the large-y solution
    std::vector<double> cos_thetas;
    std::vector<double> norms;
    double bias = 0.0;
    bool learned_bias = false;
};

// Rows ordered by (y, cos_theta, norm); train_err per pattern.
std::vector<ReplicatedRow> sweep_replicated(const ReplicatedSweepSpec& spec, int threads = 1);

}  // namespace flatlab
