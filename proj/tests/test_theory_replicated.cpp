#include <doctest.h>

#include <cmath>
#include <numbers>

#include "flatlab/bayes.hpp"
#include "flatlab/config.hpp"
#include "flatlab/theory_replicated.hpp"
#include "flatlab/theory_rs.hpp"

using namespace flatlab;

TEST_CASE("maximal replica angle") {
    CHECK(theta_max(2) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
    CHECK(std::abs(theta_max(3) - 2.0 * std::numbers::pi / 3.0) < 1e-15);
    CHECK(theta_max(10) == doctest::Approx(1.68213).epsilon(1e-5));
    CHECK_THROWS_AS(theta_max(1), std::invalid_argument);
    ReplicaConstraints c{3, 1.0, -0.5, 0.0, false};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("barycenter observables") {
    auto same = barycenter_observables(0.3, 0.8, 0.8, 7, -0.2);
    CHECK(same.q_bar == 0.8);
    CHECK(same.b_bar == doctest::Approx(-0.2).epsilon(1e-15));
    auto tri = barycenter_observables(0.3, 1.0, 0.0, 3, 0.6);
    CHECK(tri.q_bar == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(tri.b_bar == doctest::Approx(0.6 / std::sqrt(3.0)).epsilon(1e-14));
    auto many = barycenter_observables(0.3, 1.0, 0.4, 1e6, 0.0);
    CHECK(std::abs(many.q_bar - 0.4) < 1e-5);
    for (double y : {2.0, 5.0, 10.0})
        for (double q1 : {-0.1, 0.0, 0.3})
            CHECK(std::abs(barycenter_observables(0.1, 0.9, q1, y, 0.0).q_bar - ((0.9 - q1) / y + q1)) < 1e-12);
    CHECK_THROWS(barycenter_observables(0.1, 0.5, 0.6, 2, 0.0));
}

TEST_CASE("a single replica is the unreplicated system at the same norm") {
    for (double rho : {0.5, 0.2}) {
        for (bool learned : {false, true}) {
            BiasPolicy bias = learned ? BiasPolicy::learned() : BiasPolicy::fixed(rho == 0.5 ? 0.0 : -0.4);
            RsSolution rs = solve_rs(0.7, 1.0, rho, 1.0, bias);
            ReplicaConstraints c{1, rs.q_norm, 0.3, rs.bias, learned};
            ReplicaSolution r = solve_replicated_mse(0.7, 1.0, rho, c);
            CHECK(std::abs(r.m - rs.m) < 1e-6);
            CHECK(std::abs(r.bias - rs.bias) < 1e-6);
            CHECK(std::abs(r.gen_err_center - rs_gen_error(rs, 1.0, rho)) < 1e-6);
            CHECK(std::abs(r.dq0 - rs.dq) < 1e-6);
            CHECK(std::abs(r.train_err - rs_train_error(rs, 0.7, 1.0, rho)) < 1e-6);
            // coincident replicas behave like one
            ReplicaConstraints co{10, rs.q_norm, 1.0, rs.bias, learned};
            ReplicaSolution rc = solve_replicated_mse(0.7, 1.0, rho, co);
            CHECK(std::abs(rc.gen_err_center - rs_gen_error(rs, 1.0, rho)) < 1e-6);
            CHECK(std::abs(rc.m - rs.m) < 1e-6);
        }
    }
}

TEST_CASE("stationarity of the replicated free entropy") {
    for (int y : {1, 3, 10})
        for (double cos_theta : {0.9, 0.1})
            for (bool learned : {false, true}) {
                ReplicaConstraints c{y, 0.3, cos_theta, learned ? 0.0 : -0.1, learned};
                ReplicaSolution s = solve_replicated_mse(0.7, 1.0, 0.2, c);
                CHECK(s.residual < 1e-6);
            }
}

TEST_CASE("training error grows with the replica angle") {
    double prev = -1.0;
    for (double cos_theta : {0.99, 0.9, 0.7, 0.5, 0.3, 0.1, 0.0, -0.05}) {
        ReplicaConstraints c{10, 0.5, cos_theta, 0.0, false};
        ReplicaSolution s = solve_replicated_mse(0.7, 1.0, 0.5, c);
        CHECK(s.train_err >= prev);
        prev = s.train_err;
    }
}

TEST_CASE("balanced, wide replicas: the barycenter sits near the Bayes error") {
    const double bayes = bayes_gen_error(0.7, 1.0, 0.5);
    for (double n : {0.2, 0.27, 0.34, 0.41, 0.48, 0.55}) {
        ReplicaConstraints c{10, n * n, 0.1, 0.0, false};
        ReplicaSolution s = solve_replicated_mse(0.7, 1.0, 0.5, c);
        CHECK(std::abs(s.gen_err_center - bayes) < 5e-3);
    }
}

TEST_CASE("barycenter norm has a ceiling below capacity") {
    const double top = max_barycenter_norm(0.7, 1.0, 0.5, 0.0, false);
    CHECK(top == doctest::Approx(1.373).epsilon(1e-3));
    ReplicaConstraints c{1, 1.5, 1.0, 0.0, false};
    CHECK_THROWS_AS(solve_replicated_mse(0.7, 1.0, 0.5, c), std::range_error);
    CHECK(std::isinf(max_barycenter_norm(1.5, 1.0, 0.5, 0.0, false)));
}

TEST_CASE("large-y solution agrees with a very large finite y") {
    for (double cos_theta : {0.5, 0.1}) {
        for (double n : {0.4, 0.8}) {
            ReplicaSolution inf = solve_large_y(0.7, 1.0, 0.2, n * n, n * n * cos_theta, 0.0, true);
            ReplicaConstraints c{1000, n * n, cos_theta, 0.0, true};
            ReplicaSolution fin = solve_replicated_mse(0.7, 1.0, 0.2, c);
            CHECK(std::abs(inf.gen_err_center - fin.gen_err_center) < 1e-4);
        }
    }
    // orthogonal replicas: the barycenter shrinks to zero and only ratios survive
    ReplicaSolution zero = solve_large_y(0.7, 1.0, 0.2, 0.36, 0.0, 0.0, true);
    ReplicaConstraints c{100000, 0.36, 0.0, 0.0, true};
    ReplicaSolution fin = solve_replicated_mse(0.7, 1.0, 0.2, c);
    CHECK(std::abs(zero.gen_err_center - fin.gen_err_center) < 1e-4);
    // q1 -> Q: a single replica at norm Q
    ReplicaSolution full = solve_large_y(0.7, 1.0, 0.5, 0.25, 0.25, 0.0, false);
    ReplicaSolution one = solve_replicated_mse(0.7, 1.0, 0.5, {1, 0.25, 1.0, 0.0, false});
    CHECK(std::abs(full.gen_err_center - one.gen_err_center) < 1e-12);
    CHECK(std::abs(full.m - one.m) < 1e-12);
}

TEST_CASE("replicated sweep layout") {
    ReplicatedSweepSpec spec;
    spec.rho = 0.2;
    spec.ys = {1, 3, 0};
    spec.cos_thetas = {0.0};
    spec.norms = linspace(0.4, 1.0, 4);
    spec.learned_bias = true;
    auto rows = sweep_replicated(spec, 2);
    REQUIRE(rows.size() == 12);
    CHECK(rows[0].y == 1);
    CHECK(rows[8].y == 0);
    CHECK(rows[5].norm == doctest::Approx(0.6));
    for (const auto& r : rows) CHECK(r.converged);
    // per-pattern training error in the rows
    ReplicaSolution s = solve_replicated_mse(0.7, 1.0, 0.2, {3, 0.16, 0.0, 0.0, true});
    CHECK(rows[4].train_err == doctest::Approx(s.train_err / 0.7));
    spec.norms = {3.0};
    spec.ys = {1};
    auto bad = sweep_replicated(spec, 1);
    CHECK_FALSE(bad[0].converged);
}
