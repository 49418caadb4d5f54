#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flatlab {

// Nodes and weights for expectations under the standard Gaussian measure.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    template <class F>
    double integrate(F&& f) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
        return acc;
    }
};

QuadratureRule gauss_hermite(int k);

// Plain Gauss-Legendre rule on [-1, 1] (weights sum to 2).
QuadratureRule gauss_legendre(int k);

constexpr int kDefaultQuadratureNodes = 61;

// Shared rule of the default order, built once.
const QuadratureRule& default_gauss_hermite();

// H(x) = P(z > x) for standard normal z.
double gauss_tail(double x);
double log_gauss_tail(double x);
double gauss_pdf(double x);

struct FixedPointConfig {
    double damping = 0.5;
    double tol = 1e-10;
    long max_iters = 100000;

    void validate() const;
};

struct FixedPointResult {
    std::vector<double> x;
    long iterations = 0;
    bool converged = false;
    double residual = 0.0;
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::vector<double> last_finite)
        : std::runtime_error(what), last_finite_(std::move(last_finite)) {}
    const std::vector<double>& last_finite() const { return last_finite_; }

private:
    std::vector<double> last_finite_;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using VectorMap = std::function<std::vector<double>(const std::vector<double>&)>;

FixedPointResult fixed_point(const VectorMap& map, std::vector<double> x0,
                             const FixedPointConfig& cfg = {});

struct ScalarMinimum {
    double argmin;
    double value;
};

// Brent's bracketing minimizer; tol bounds the argmin error.
ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double lo, double hi,
                              double tol = 1e-9);

// Root of a sign-changing function on [lo, hi] by bisection.
double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol);

// Root of a sign-changing function on [lo, hi] by TOMS 748.
double bracket_root(const std::function<double(double)>& f, double lo, double hi,
                    double rel_tol = 1e-14);

// Deterministic per-(seed, stream) generator.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream);

    double normal() { return normal_(engine_); }
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }
    bool bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p; }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

namespace streams {
constexpr std::uint64_t kCentroid = 1;
constexpr std::uint64_t kTraining = 2;
constexpr std::uint64_t kTest = 3;
constexpr std::uint64_t kInit = 100;  // plus replica index
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace flatlab
