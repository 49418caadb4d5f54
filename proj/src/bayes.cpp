#include "flatlab/bayes.hpp"

#include <cmath>
#include <stdexcept>

#include "flatlab/numerics.hpp"

namespace flatlab {

double bayes_bias(double delta, double rho) { return 0.5 * delta * std::log(rho / (1.0 - rho)); }

BayesBaseline bayes_baseline(double alpha, double delta, double rho) {
    if (!(alpha > 0.0) || !(delta > 0.0) || !(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("bayes_baseline: invalid parameters");
    BayesBaseline out;
    out.m_opt = alpha / (delta + alpha);
    out.q_opt = out.m_opt;
    out.b_opt = bayes_bias(delta, rho);
    const double scale = std::sqrt(delta * out.q_opt);
    if (scale < 1e-150) {
        // No data: the classifier reduces to the sign of the bias, i.e. the majority class.
        if (out.b_opt > 0) out.gen_err = 1.0 - rho;
        else if (out.b_opt < 0) out.gen_err = rho;
        else out.gen_err = 0.5;
        return out;
    }
    out.gen_err = rho * gauss_tail((out.m_opt + out.b_opt) / scale) +
                  (1.0 - rho) * gauss_tail((out.m_opt - out.b_opt) / scale);
    return out;
}

double bayes_gen_error(double alpha, double delta, double rho) { return bayes_baseline(alpha, delta, rho).gen_err; }

LinearClassifier bayes_weights(const Dataset& data, double delta, double alpha, std::optional<double> rho) {
    if (data.n_patterns() == 0) throw std::invalid_argument("bayes_weights: empty dataset");
    LinearClassifier clf;
    clf.weights = data.patterns.transpose() * data.labels;
    clf.weights *= 1.0 / ((delta + alpha) * std::sqrt(double(data.n_dim())));
    double r = rho ? *rho : (data.labels.array() > 0.0).cast<double>().mean();
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("bayes_weights: label fraction must lie in (0,1)");
    clf.bias = bayes_bias(delta, r);
    return clf;
}

}  // namespace flatlab
