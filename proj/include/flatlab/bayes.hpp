#pragma once

#include <optional>

#include "flatlab/model.hpp"

namespace flatlab {

struct BayesBaseline {
    double m_opt;
    double q_opt;
    double b_opt;
    double gen_err;
};

BayesBaseline bayes_baseline(double alpha, double delta, double rho);
double bayes_gen_error(double alpha, double delta, double rho);
double bayes_bias(double delta, double rho);

// Plug-in weights (delta + alpha)^-1 sum_mu xi^mu sigma^mu / sqrt(N). Without a
// supplied rho the bias uses the empirical fraction of positive labels.
LinearClassifier bayes_weights(const Dataset& data, double delta, double alpha,
                               std::optional<double> rho = std::nullopt);

}  // namespace flatlab
