#include "flatlab/numerics.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

namespace flatlab {

namespace {

// Orthonormal probabilists' Hermite polynomials p_n and p_{n-1} at x.
std::pair<double, double> hermite_pair(int n, double x) {
    double prev = 0.0;
    double cur = 1.0;
    for (int k = 0; k < n; ++k) {
        double next = (x * cur - std::sqrt(double(k)) * prev) / std::sqrt(double(k + 1));
        prev = cur;
        cur = next;
    }
    return {cur, prev};
}

}  // namespace

QuadratureRule gauss_hermite(int k) {
    if (k < 2) throw std::invalid_argument("gauss_hermite: need at least 2 nodes");
    QuadratureRule rule;
    rule.nodes.resize(k);
    rule.weights.resize(k);
    // Initial guesses in the physicists' scale, refined by Newton on p_k.
    std::vector<double> t;
    std::vector<double> roots;
    const int half = (k + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double g;
        if (i == 0) {
            g = std::sqrt(2.0 * k + 1) - 1.85575 * std::pow(2.0 * k + 1, -0.16667);
        } else if (i == 1) {
            g = t[0] - 1.14 * std::pow(double(k), 0.426) / t[0];
        } else if (i == 2) {
            g = 1.86 * t[1] - 0.86 * t[0];
        } else if (i == 3) {
            g = 1.91 * t[2] - 0.91 * t[1];
        } else {
            g = 2.0 * t[i - 1] - t[i - 2];
        }
        double z = g * std::numbers::sqrt2;
        for (int it = 0; it < 200; ++it) {
            auto [pn, pm] = hermite_pair(k, z);
            double step = pn / (std::sqrt(double(k)) * pm);
            z -= step;
            if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
        }
        t.push_back(z / std::numbers::sqrt2);
        roots.push_back(z);
    }
    for (int i = 0; i < half; ++i) {
        double x = roots[i];
        auto [pn, pm] = hermite_pair(k, x);
        (void)pn;
        double w = 1.0 / (k * pm * pm);
        rule.nodes[i] = -x;
        rule.nodes[k - 1 - i] = x;
        rule.weights[i] = w;
        rule.weights[k - 1 - i] = w;
    }
    if (k % 2 == 1) rule.nodes[k / 2] = 0.0;
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

QuadratureRule gauss_legendre(int k) {
    if (k < 1) throw std::invalid_argument("gauss_legendre: need at least 1 node");
    QuadratureRule rule;
    rule.nodes.resize(k);
    rule.weights.resize(k);
    for (int i = 0; i < (k + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (k + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < k; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
            }
            dp = k * (z * p1 - p2) / (z * z - 1.0);
            double step = p1 / dp;
            z -= step;
            if (std::abs(step) < 1e-16) break;
        }
        rule.nodes[i] = -z;
        rule.nodes[k - 1 - i] = z;
        rule.weights[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.weights[k - 1 - i] = rule.weights[i];
    }
    return rule;
}

const QuadratureRule& default_gauss_hermite() {
    static const QuadratureRule rule = gauss_hermite(kDefaultQuadratureNodes);
    return rule;
}

namespace {

// Mills ratio H(x)/phi(x) for x > 0 by continued fraction (modified Lentz).
double mills_ratio(double x) {
    const double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 500; ++n) {
        double a = n;
        d = x + a * d;
        if (std::abs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return 1.0 / f;
}

}  // namespace

double gauss_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double gauss_tail(double x) {
    if (std::isnan(x)) return x;
    if (x > 8.0) return gauss_pdf(x) * mills_ratio(x);
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double log_gauss_tail(double x) {
    if (x > 8.0) return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(x));
    if (x < -8.0) return std::log1p(-gauss_tail(-x));
    return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
}

void FixedPointConfig::validate() const {
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("fixed_point: damping must lie in (0,1]");
    if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("fixed_point: max_iters must be positive");
}

FixedPointResult fixed_point(const VectorMap& map, std::vector<double> x0, const FixedPointConfig& cfg) {
    cfg.validate();
    FixedPointResult out;
    std::vector<double> x = std::move(x0);
    for (long it = 1; it <= cfg.max_iters; ++it) {
        std::vector<double> fx = map(x);
        if (fx.size() != x.size()) throw std::invalid_argument("fixed_point: map changed the dimension");
        double change = 0.0;
        std::vector<double> next(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            next[i] = (1.0 - cfg.damping) * x[i] + cfg.damping * fx[i];
            if (!std::isfinite(next[i])) throw DivergenceError("fixed_point: non-finite iterate", x);
            change = std::max(change, std::abs(next[i] - x[i]));
        }
        x = std::move(next);
        out.iterations = it;
        out.residual = change;
        if (change < cfg.tol) {
            out.converged = true;
            break;
        }
    }
    out.x = std::move(x);
    return out;
}

ScalarMinimum minimize_scalar(const std::function<double(double)>& f, double lo, double hi, double tol) {
    if (!(lo < hi)) throw std::invalid_argument("minimize_scalar: need lo < hi");
    auto guarded = [&](double h) {
        double v = f(h);
        if (!std::isfinite(v)) throw std::domain_error("minimize_scalar: non-finite objective");
        return v;
    };
    // Brent's x-tolerance is about 2^(1-bits) relative; ask for the tighter of tol and float precision.
    int bits = std::numeric_limits<double>::digits / 2;
    if (tol > 0) bits = std::min(bits, std::max(8, int(std::ceil(-std::log2(tol))) + 2));
    std::uintmax_t max_iter = 500;
    auto r = boost::math::tools::brent_find_minima(guarded, lo, hi, bits, max_iter);
    return {r.first, r.second};
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw std::range_error("bisect_root: no sign change on bracket");
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double bracket_root(const std::function<double(double)>& f, double lo, double hi, double rel_tol) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0) == (fhi > 0)) throw std::range_error("bracket_root: no sign change on bracket");
    std::uintmax_t max_iter = 500;
    auto tol = [rel_tol](double a, double b) { return std::abs(b - a) <= rel_tol * std::max(std::abs(a), std::abs(b)); };
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
    return 0.5 * (r.first + r.second);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x5bd1e995ULL));
    std::seed_seq seq{std::uint32_t(s), std::uint32_t(s >> 32), std::uint32_t(stream), std::uint32_t(seed)};
    engine_.seed(seq);
}

}  // namespace flatlab
