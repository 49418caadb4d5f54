#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "flatlab/model.hpp"
#include "flatlab/theory_rs.hpp"

namespace flatlab {

enum class Optimizer { PlainMomentum, AdaptiveMoment };

struct TrainConfig {
    long epochs = 20000;
    double lr = 1e-4;
    double momentum = 0.5;
    Optimizer optimizer = Optimizer::PlainMomentum;
    double lambda0 = 1e-4;
    double lambda1 = 5e-3;
    double lambda_max = 1e2;
    double d0 = 0.0;
    std::optional<double> norm_target;
    bool couple_bias = false;
    std::uint64_t seed = 0;
    long log_every = 0;  // 0 logs only the final epoch
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    // With a norm target, drop the radial part of each replica's gradient
    // before the optimizer sees it. The projection discards it anyway, and
    // keeping it biases the fixed point of coordinate-wise optimizers.
    bool tangent_gradient = true;

    void validate() const;
    double coupling(long epoch) const;
};

struct TrajectoryRow {
    long epoch;
    int replica;  // -1 marks the center model
    double train_loss, train_err, gen_err, norm, bias, mean_pairwise_d, lambda_t;
};

struct ReplicaEnsemble {
    std::vector<LinearClassifier> replicas;
    LinearClassifier center;
};

struct TrainResult {
    ReplicaEnsemble ensemble;
    std::vector<TrajectoryRow> trajectory;
};

class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(const std::string& what, ReplicaEnsemble last) : std::runtime_error(what), last_(std::move(last)) {}
    const ReplicaEnsemble& last_finite() const { return last_; }

private:
    ReplicaEnsemble last_;
};

// Full-batch descent on sum_mu l(sigma f_mu) + (lambda_reg/2)|w|^2, MSE loss.
TrainResult train_gd_mse(const Dataset& data, double lambda_reg, BiasPolicy bias, const TrainConfig& cfg);

// y coupled replicas with the scheduled distance penalty; y = 1 reduces to train_gd_mse.
TrainResult train_rsgd(const Dataset& data, int y, BiasPolicy bias, const TrainConfig& cfg, double lambda_reg = 0.0);

LinearClassifier center_model(const std::vector<LinearClassifier>& replicas);

// Equal norms: d = 1 - cos(theta). Explicit norms use d = |w_a - w_b|^2 / (2 |w_a|^2).
double distance_from_cos(double cos_theta);
double cos_from_distance(double d);
double cos_from_distance(double d, double norm_a, double norm_b);

// Normalized squared distance |w_a - w_b|^2 / (2 N n^2).
double replica_distance(const Vector& wa, const Vector& wb, double norm);

// Loss pieces exposed for gradient checks.
struct ReplicaLossTerms {
    double lambda_reg = 0.0;
    double coupling = 0.0;
    double d0 = 0.0;
    double norm = 1.0;
    bool couple_bias = false;
};

// Total objective sum_a [L_mse^a + lambda_reg/2 |w_a|^2] + coupling * sum_{a != b} [(d_ab - d0)^2 (+ (b_a - b_b)^2)].
double replicated_objective(const Dataset& data, const Matrix& w, const Vector& b, const ReplicaLossTerms& t);
void replicated_gradient(const Dataset& data, const Matrix& w, const Vector& b, const ReplicaLossTerms& t,
                         Matrix& grad_w, Vector& grad_b);

}  // namespace flatlab
