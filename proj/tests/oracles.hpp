#pragma once

// Independent reference computations used only by the test suites.

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "flatlab/model.hpp"

namespace flatlab::oracle {

// Exact minimizer of sum_mu (w.xi/sqrt(N) + b - sigma)^2 / 2 + lambda |w|^2 / 2,
// solved in the P-dimensional dual: w = X^T a / sqrt(N), (K + lambda) a = sigma - b.
class Ridge {
public:
    explicit Ridge(const Dataset& data) : data_(data) {
        const long p = data.n_patterns();
        gram_ = Eigen::MatrixXd::Zero(p, p);
        gram_.selfadjointView<Eigen::Lower>().rankUpdate(Eigen::MatrixXd(data.patterns), 1.0 / double(data.n_dim()));
    }

    // Fixed bias when given, otherwise the unregularized optimal bias.
    LinearClassifier solve(double lambda, std::optional<double> bias = std::nullopt) const {
        const long p = data_.n_patterns();
        Eigen::MatrixXd k = gram_;
        k.diagonal().array() += lambda;
        Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(k);
        Eigen::VectorXd sigma = data_.labels;
        double b;
        if (bias) {
            b = *bias;
        } else {
            Eigen::VectorXd ks = llt.solve(sigma);
            Eigen::VectorXd k1 = llt.solve(Eigen::VectorXd::Ones(p));
            b = ks.sum() / k1.sum();
        }
        Eigen::VectorXd a = llt.solve(sigma - Eigen::VectorXd::Constant(p, b));
        LinearClassifier c;
        c.weights = data_.patterns.transpose() * a / std::sqrt(double(data_.n_dim()));
        c.bias = b;
        return c;
    }

private:
    const Dataset& data_;
    Eigen::MatrixXd gram_;
};

}  // namespace flatlab::oracle
