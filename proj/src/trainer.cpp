#include "flatlab/trainer.hpp"

#include <cmath>

#include "flatlab/numerics.hpp"

namespace flatlab {

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be nonnegative");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("TrainConfig: momentum must lie in [0,1)");
    if (!(lambda0 > 0.0 && lambda1 >= 0.0 && lambda_max > 0.0))
        throw std::invalid_argument("TrainConfig: coupling schedule parameters must be positive");
    if (d0 < 0.0) throw std::invalid_argument("TrainConfig: d0 must be nonnegative");
    if (norm_target && !(*norm_target > 0.0)) throw std::invalid_argument("TrainConfig: norm_target must be positive");
    if (log_every < 0) throw std::invalid_argument("TrainConfig: log_every must be nonnegative");
}

double TrainConfig::coupling(long epoch) const {
    return std::min(lambda0 * std::pow(1.0 + lambda1, double(epoch)), lambda_max);
}

double distance_from_cos(double cos_theta) { return 1.0 - cos_theta; }
double cos_from_distance(double d) { return 1.0 - d; }
double cos_from_distance(double d, double norm_a, double norm_b) {
    if (!(norm_a > 0.0 && norm_b > 0.0)) throw std::invalid_argument("cos_from_distance: norms must be positive");
    return (norm_a * norm_a + norm_b * norm_b - 2.0 * d * norm_a * norm_a) / (2.0 * norm_a * norm_b);
}

double replica_distance(const Vector& wa, const Vector& wb, double norm) {
    return 0.5 * (wa - wb).squaredNorm() / (double(wa.size()) * norm * norm);
}

LinearClassifier center_model(const std::vector<LinearClassifier>& replicas) {
    if (replicas.empty()) throw std::invalid_argument("center_model: no replicas");
    const long n = replicas[0].weights.size();
    LinearClassifier c;
    c.weights = Vector::Zero(n);
    double ratio = 0.0;
    for (const auto& r : replicas) {
        if (r.weights.size() != n) throw std::invalid_argument("center_model: inconsistent dimensions");
        const double norm = r.weights.norm();
        if (!(norm > 0.0)) throw DegenerateClassifier("center_model: zero-norm replica");
        c.weights += r.weights;
        ratio += r.bias / norm;
    }
    const double y = double(replicas.size());
    c.weights /= y;
    const double center_norm = c.weights.norm();
    if (!(center_norm > 1e-12 * std::sqrt(double(n))))
        throw DegenerateClassifier("center_model: replicas average to the zero vector");
    c.bias = center_norm * ratio / y;
    return c;
}

namespace {

// Pairwise (d_ab - d0) matrix from the Gram matrix of the replica weights.
Matrix distance_offsets(const Matrix& w, double norm, double d0, double* mean_d) {
    const long y = w.rows();
    const double n = double(w.cols());
    Matrix gram = w * w.transpose();
    Matrix c = Matrix::Zero(y, y);
    double total = 0.0;
    for (long a = 0; a < y; ++a)
        for (long b = 0; b < y; ++b) {
            if (a == b) continue;
            const double d = 0.5 * (gram(a, a) + gram(b, b) - 2.0 * gram(a, b)) / (n * norm * norm);
            c(a, b) = d - d0;
            total += d;
        }
    if (mean_d) *mean_d = y > 1 ? total / double(y * (y - 1)) : 0.0;
    return c;
}

}  // namespace

double replicated_objective(const Dataset& data, const Matrix& w, const Vector& b, const ReplicaLossTerms& t) {
    const double sqrt_n = std::sqrt(double(data.n_dim()));
    Matrix f = w * data.patterns.transpose() / sqrt_n;
    double total = 0.0;
    for (long a = 0; a < w.rows(); ++a) {
        for (long mu = 0; mu < f.cols(); ++mu) {
            const double r = data.labels[mu] * (f(a, mu) + b[a]) - 1.0;
            total += 0.5 * r * r;
        }
        total += 0.5 * t.lambda_reg * w.row(a).squaredNorm();
    }
    if (w.rows() > 1 && t.coupling > 0.0) {
        Matrix c = distance_offsets(w, t.norm, t.d0, nullptr);
        for (long a = 0; a < w.rows(); ++a)
            for (long bb = 0; bb < w.rows(); ++bb) {
                if (a == bb) continue;
                total += t.coupling * c(a, bb) * c(a, bb);
                if (t.couple_bias) total += t.coupling * (b[a] - b[bb]) * (b[a] - b[bb]);
            }
    }
    return total;
}

void replicated_gradient(const Dataset& data, const Matrix& w, const Vector& b, const ReplicaLossTerms& t,
                         Matrix& grad_w, Vector& grad_b) {
    const long y = w.rows();
    const double sqrt_n = std::sqrt(double(data.n_dim()));
    Matrix r = w * data.patterns.transpose();
    r *= 1.0 / sqrt_n;
    for (long a = 0; a < y; ++a) {
        r.row(a).array() += b[a];
        // residual times label: (sigma f - 1) sigma = f - sigma
        r.row(a) -= data.labels.transpose();
    }
    grad_w.noalias() = r * data.patterns;
    grad_w *= 1.0 / sqrt_n;
    grad_b = r.rowwise().sum();
    if (t.lambda_reg != 0.0) grad_w += t.lambda_reg * w;
    if (y > 1 && t.coupling > 0.0) {
        Matrix c = distance_offsets(w, t.norm, t.d0, nullptr);
        Matrix lap = -c;
        for (long a = 0; a < y; ++a) lap(a, a) = c.row(a).sum();
        const double scale = 4.0 * t.coupling / (double(w.cols()) * t.norm * t.norm);
        grad_w.noalias() += scale * (lap * w);
        if (t.couple_bias)
            for (long a = 0; a < y; ++a) grad_b[a] += 4.0 * t.coupling * (double(y) * b[a] - b.sum());
    }
}

namespace {

void project(Matrix& w, double norm) {
    const double target = norm * std::sqrt(double(w.cols()));
    for (long a = 0; a < w.rows(); ++a) w.row(a) *= target / w.row(a).norm();
}

ReplicaEnsemble to_ensemble(const Matrix& w, const Vector& b) {
    ReplicaEnsemble e;
    for (long a = 0; a < w.rows(); ++a) e.replicas.push_back({w.row(a).transpose(), b[a]});
    if (w.rows() == 1) {
        e.center = e.replicas[0];
    } else {
        try {
            e.center = center_model(e.replicas);
        } catch (const DegenerateClassifier&) {
            e.center = {Vector::Zero(w.cols()), 0.0};
        }
    }
    return e;
}

void log_state(const Dataset& data, const Matrix& w, const Vector& b, long epoch, double lambda_t, double norm_ref,
               std::vector<TrajectoryRow>& out) {
    const double n = double(data.n_dim());
    const double p = double(data.n_patterns());
    double mean_d = 0.0;
    if (w.rows() > 1) distance_offsets(w, norm_ref, 0.0, &mean_d);
    auto row_for = [&](const LinearClassifier& clf, int index) {
        Overlaps ov = measure_overlaps(clf, data.centroid);
        double gen = ov.q_norm > 0.0 ? gen_error_closed_form(ov, clf.bias, data.delta, data.rho) : NAN;
        out.push_back({epoch, index, mse_loss(clf, data) / p, double(count_errors(clf, data)) / p, gen,
                       clf.weights.norm() / std::sqrt(n), clf.bias, mean_d, lambda_t});
    };
    ReplicaEnsemble e = to_ensemble(w, b);
    for (long a = 0; a < w.rows(); ++a) row_for(e.replicas[a], int(a));
    if (w.rows() > 1) row_for(e.center, -1);
}

TrainResult run_engine(const Dataset& data, int y, BiasPolicy bias, const TrainConfig& cfg, double lambda_reg) {
    cfg.validate();
    if (y < 1) throw std::invalid_argument("train: need at least one replica");
    if (y > 1 && !cfg.norm_target) throw std::invalid_argument("train_rsgd: coupled replicas need a norm_target");
    if (lambda_reg < 0.0) throw std::invalid_argument("train: lambda_reg must be nonnegative");
    const long n = data.n_dim();
    const double limit = std::sqrt(6.0 / double(n));
    Matrix w(y, n);
    for (int a = 0; a < y; ++a) {
        Rng rng(cfg.seed, streams::kInit + std::uint64_t(a));
        for (long i = 0; i < n; ++i) w(a, i) = rng.uniform(-limit, limit);
    }
    if (cfg.norm_target) project(w, *cfg.norm_target);
    Vector b = Vector::Constant(y, bias.value);
    const double norm_ref = cfg.norm_target ? *cfg.norm_target : 1.0;

    Matrix grad_w(y, n), vel_w = Matrix::Zero(y, n), sq_w = Matrix::Zero(y, n);
    Vector grad_b(y), vel_b = Vector::Zero(y), sq_b = Vector::Zero(y);
    TrainResult result;
    ReplicaLossTerms terms{lambda_reg, 0.0, cfg.d0, norm_ref, cfg.couple_bias};
    const bool adam = cfg.optimizer == Optimizer::AdaptiveMoment;
    auto should_log = [&](long epoch) {
        return epoch == cfg.epochs || (cfg.log_every > 0 && epoch % cfg.log_every == 0);
    };
    if (should_log(0)) log_state(data, w, b, 0, y > 1 ? cfg.coupling(0) : 0.0, norm_ref, result.trajectory);

    for (long t = 0; t < cfg.epochs; ++t) {
        terms.coupling = y > 1 ? cfg.coupling(t) : 0.0;
        replicated_gradient(data, w, b, terms, grad_w, grad_b);
        if (cfg.norm_target && cfg.tangent_gradient)
            for (long a = 0; a < y; ++a) grad_w.row(a) -= (grad_w.row(a).dot(w.row(a)) / w.row(a).squaredNorm()) * w.row(a);
        Matrix prev_w = w;
        Vector prev_b = b;
        if (adam) {
            const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(t + 1));
            const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(t + 1));
            vel_w = cfg.adam_beta1 * vel_w + (1.0 - cfg.adam_beta1) * grad_w;
            sq_w = cfg.adam_beta2 * sq_w + (1.0 - cfg.adam_beta2) * grad_w.cwiseAbs2();
            w.array() -= cfg.lr * (vel_w.array() / c1) / ((sq_w.array() / c2).sqrt() + cfg.adam_eps);
            if (bias.is_learned()) {
                vel_b = cfg.adam_beta1 * vel_b + (1.0 - cfg.adam_beta1) * grad_b;
                sq_b = cfg.adam_beta2 * sq_b + (1.0 - cfg.adam_beta2) * grad_b.cwiseAbs2();
                b.array() -= cfg.lr * (vel_b.array() / c1) / ((sq_b.array() / c2).sqrt() + cfg.adam_eps);
            }
        } else {
            vel_w = cfg.momentum * vel_w + grad_w;
            w -= cfg.lr * vel_w;
            if (bias.is_learned()) {
                vel_b = cfg.momentum * vel_b + grad_b;
                b -= cfg.lr * vel_b;
            }
        }
        if (cfg.norm_target) project(w, *cfg.norm_target);
        if (!w.allFinite() || !b.allFinite())
            throw TrainingDivergence("train: non-finite parameters at epoch " + std::to_string(t + 1),
                                     to_ensemble(prev_w, prev_b));
        if (should_log(t + 1))
            log_state(data, w, b, t + 1, y > 1 ? cfg.coupling(t + 1) : 0.0, norm_ref, result.trajectory);
    }
    result.ensemble = to_ensemble(w, b);
    return result;
}

}  // namespace

TrainResult train_gd_mse(const Dataset& data, double lambda_reg, BiasPolicy bias, const TrainConfig& cfg) {
    return run_engine(data, 1, bias, cfg, lambda_reg);
}

TrainResult train_rsgd(const Dataset& data, int y, BiasPolicy bias, const TrainConfig& cfg, double lambda_reg) {
    if (y == 1) return train_gd_mse(data, lambda_reg, bias, cfg);
    return run_engine(data, y, bias, cfg, lambda_reg);
}

}  // namespace flatlab
