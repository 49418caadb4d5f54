#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flatlab/numerics.hpp"
#include "flatlab/theory_fp.hpp"
#include "oracles.hpp"

using namespace flatlab;

namespace {

FpReference reference(double lambda, double rho = 0.5, double b = 0.0) {
    RsSolution s = solve_rs(0.7, 1.0, rho, lambda, BiasPolicy::fixed(b));
    REQUIRE(s.converged);
    return FpReference::from_rs(s, 0.7, 1.0, rho);
}

// A reference carrying no data: the free entropy must reduce to the bare volume.
FpReference empty_reference(double lambda) {
    FpReference r{};
    r.alpha = 0.0;
    r.delta = 1.0;
    r.rho = 0.5;
    r.lambda = lambda;
    r.m = 0.0;
    r.q_norm = 1.0 / lambda;
    r.dq = 1.0 / lambda;
    r.dm_hat = 0.0;
    r.dq_hat_Q = lambda;
    r.dq_hat = 0.0;
    r.bias = 0.0;
    return r;
}

// Importance-weighted training error per N of w drawn uniformly at overlap S with a
// sampled ridge reference, weighted by exp(-beta * errors). Averaged over datasets.
double sampled_train_error(double lambda, double d, double beta, int datasets, int samples) {
    const long n = 1000;
    double total = 0.0;
    for (int k = 0; k < datasets; ++k) {
        Dataset data = sample_dataset({n, 0.7, 1.0, 0.5}, 500 + k);
        oracle::Ridge ridge(data);
        LinearClassifier ref = ridge.solve(lambda, 0.0);
        const double q = ref.weights.squaredNorm() / n;
        const double s = q * (1.0 - d);
        const Eigen::VectorXd unit = ref.weights.normalized();
        Rng rng(900 + k, 0);
        double wsum = 0.0, esum = 0.0;
        const int batch = 250;
        for (int done = 0; done < samples; done += batch) {
            Eigen::MatrixXd u(n, batch);
            for (long j = 0; j < batch; ++j)
                for (long i = 0; i < n; ++i) u(i, j) = rng.normal();
            for (long j = 0; j < batch; ++j) {
                u.col(j) -= unit.dot(u.col(j)) * unit;
                u.col(j) *= std::sqrt((q - s * s / q) * n) / u.col(j).norm();
                u.col(j) += (s / q) * ref.weights;
            }
            Eigen::MatrixXd f = data.patterns * u / std::sqrt(double(n));
            for (long j = 0; j < batch; ++j) {
                long errors = 0;
                for (long mu = 0; mu < data.n_patterns(); ++mu)
                    if ((f(mu, j) >= 0.0 ? 1.0 : -1.0) != data.labels[mu]) ++errors;
                const double w = std::exp(-beta * errors);
                wsum += w;
                esum += w * errors;
            }
        }
        total += esum / wsum / n;
    }
    return total / datasets;
}

}  // namespace

TEST_CASE("bare volume at fixed overlap") {
    for (double lambda : {0.5, 1.0, 4.0}) {
        for (double s : {0.0, 0.1, 0.3}) {
            if (s * s >= 1.0 / (lambda * lambda)) continue;
            CHECK(total_log_volume_lambda(lambda, s) == doctest::Approx(total_log_volume(1.0 / lambda, s)).epsilon(1e-14));
        }
        CHECK(total_log_volume_lambda(lambda, 0.0) ==
              doctest::Approx(0.5 * (1.0 + std::log(2.0 * std::numbers::pi) - std::log(lambda))).epsilon(1e-14));
    }
}

TEST_CASE("without data the free entropy is the bare volume") {
    for (double lambda : {0.5, 1.0, 3.0}) {
        for (double frac : {0.2, 0.6, 0.95}) {
            FpReference r = empty_reference(lambda);
            const double s = frac * r.q_norm;
            FpSolution sol = fp_free_entropy({r, s, 1.0});
            REQUIRE(sol.converged);
            CHECK(std::abs(sol.free_entropy - total_log_volume_lambda(lambda, s)) < 1e-8);
        }
    }
}

TEST_CASE("constrained training error limits") {
    FpReference r = reference(0.1);
    // beta large around a reference with no training errors
    FpSolution hot = fp_free_entropy({r, r.q_norm * 0.99, 40.0});
    CHECK(fp_train_error(hot, {r, r.q_norm * 0.99, 40.0}) < 1e-6);

    FpReference r1 = reference(1.0);
    double prev = 1.0;
    for (double beta : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        FpParams p{r1, r1.q_norm * 0.8, beta};
        FpSolution s = fp_free_entropy(p);
        REQUIRE(s.converged);
        const double e = fp_train_error(s, p);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("constrained training error matches sampling around a ridge reference") {
    FpReference r = reference(1.0);
    for (double d : {0.1, 0.5}) {
        for (double beta : {1e-9, 0.1}) {
            FpParams p{r, r.q_norm * (1.0 - d), beta};
            FpSolution s = fp_free_entropy(p);
            REQUIRE(s.converged);
            const double mc = sampled_train_error(1.0, d, beta, 3, 1500);
            CHECK(std::abs(fp_train_error(s, p) - mc) < 2e-2);
        }
    }
}

TEST_CASE("oracle cutoff uses the correct sign") {
    // Monte Carlo: classify fresh patterns with w = v*, b = 0
    Dataset d = sample_dataset({200, 0.01, 1.0, 0.5}, 31);
    LinearClassifier oracle{d.centroid, 0.0};
    long errors = 0, total = 0;
    for (int batch = 0; batch < 50; ++batch) {
        Dataset t = sample_test_set(d, 20000, 1000 + batch);
        errors += count_errors(oracle, t);
        total += t.n_patterns();
    }
    const double rate = double(errors) / double(total);
    const double exact = gen_error_closed_form(measure_overlaps(oracle, d.centroid), 0.0, 1.0, 0.5);
    CHECK(std::abs(rate - exact) < 4.0 * std::sqrt(exact * (1 - exact) / total));
    // the sampled centroid has |v|^2/N close to 1, so the error sits near H(1), far from 1 - H(1)
    CHECK(exact == doctest::Approx(gauss_tail(d.centroid.norm() / std::sqrt(200.0))).epsilon(1e-10));
    CHECK(rate < 0.5);
    CHECK(oracle_train_error(0.7, 1.0) == doctest::Approx(0.7 * gauss_tail(1.0)));
    CHECK(oracle_train_error(0.7, 1.0) < 0.2);
}

TEST_CASE("stationarity at converged solutions") {
    for (double lambda : {0.1, 1.0, 10.0}) {
        FpReference r = reference(lambda);
        for (double d : {0.05, 0.3}) {
            FpParams p{r, r.q_norm * (1.0 - d), 2.0};
            FpSolution s = fp_free_entropy(p);
            REQUIRE(s.converged);
            CHECK(fp_stationarity_residual(p, s) < 1e-6);
        }
    }
    // the measure does see a displaced solution
    {
        FpReference r = reference(1.0);
        FpParams p{r, r.q_norm * 0.9, 2.0};
        FpSolution s = fp_free_entropy(p);
        FpSolution moved = s;
        moved.o *= 1.001;
        CHECK(fp_stationarity_residual(p, moved) > 1e-5);
        moved = s;
        const double floor = p.overlap_s * p.overlap_s / r.q_norm;
        moved.p = 0.5 * (s.p + floor);
        CHECK(fp_stationarity_residual(p, moved) > 1e-5);
    }
    // at small distance and small beta, p sits near its lower end
    {
        FpReference r = reference(10.0);
        FpParams p{r, r.q_norm * 0.999, 0.1};
        FpSolution s = fp_free_entropy(p);
        REQUIRE(s.converged);
        CHECK(fp_stationarity_residual(p, s) < 1e-6);
    }
    FpReference u = reference(1.0, 0.2, -0.4);
    FpParams p{u, u.q_norm * 0.7, 3.0};
    FpSolution s = fp_free_entropy(p);
    REQUIRE(s.converged);
    CHECK(fp_stationarity_residual(p, s) < 1e-6);
}

TEST_CASE("panel quadrature agrees with tensor Gauss-Hermite at moderate distance") {
    FpReference r = reference(1.0);
    FpParams p{r, r.q_norm * 0.6, 1.5};
    FpOptions gh;
    gh.quadrature = FpQuadrature::GaussHermite2D;
    FpSolution a = fp_free_entropy(p);
    FpSolution b = fp_free_entropy(p, gh);
    CHECK(std::abs(a.free_entropy - b.free_entropy) < 1e-5);
    CHECK(std::abs(fp_train_error(a, p) - fp_train_error(b, p)) < 1e-5);
}

TEST_CASE("normalized local entropy properties") {
    FpReference r = reference(1.0);
    CutoffPolicy policy;
    auto curve = normalized_local_entropy_curve(r, policy, {1e-3, 0.05, 0.2, 0.5}, 2);
    for (const auto& pt : curve) {
        REQUIRE(pt.converged);
        CHECK(pt.local_entropy_norm <= 0.0);
        CHECK(pt.eps_bar == doctest::Approx(rs_train_error(solve_rs(0.7, 1.0, 0.5, 1.0, BiasPolicy::fixed(0.0)), 0.7, 1.0, 0.5)));
        CHECK(std::abs(pt.train_err - pt.eps_bar) < 1e-4);
    }
    CHECK(std::abs(curve[0].local_entropy_norm) < 1e-2);
    CHECK(curve[3].local_entropy_norm < curve[1].local_entropy_norm);
    // bounded above by the data-free volume
    CHECK(curve[3].local_entropy <= total_log_volume(r.q_norm, curve[3].s));
}

TEST_CASE("unattainable cutoffs are reported, not silently clamped") {
    FpReference r = reference(1.0);
    CutoffPolicy oracle{CutoffPolicy::Kind::Oracle, 0.0};
    FpCurvePoint pt = fp_curve_point(r, oracle, 0.01);
    CHECK_FALSE(pt.converged);
    CHECK(pt.failure.find("attainable") != std::string::npos);
    CHECK_THROWS_AS(calibrate_beta(r, r.q_norm * 0.99, 0.5), std::range_error);
    FpCurvePoint bad = fp_curve_point(r, CutoffPolicy{}, 1.5);
    CHECK_FALSE(bad.converged);
}

TEST_CASE("default distance grid") {
    auto g = default_distance_grid();
    CHECK(g.size() == 24);
    CHECK(g.front() == doctest::Approx(1e-3));
    CHECK(g.back() == doctest::Approx(0.9));
}
