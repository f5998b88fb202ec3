#include <doctest.h>

#include <cmath>

#include "rexplain/error.hpp"
#include "rexplain/pareto.hpp"
#include "rexplain/rng.hpp"

using namespace rexplain;

namespace {

double objective_at(const GradientSet& grads, const std::vector<double>& w) {
  const std::size_t dim = grads[0].size();
  double obj = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    double g = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i) g += w[i] * grads[i][k];
    obj += g * g;
  }
  return obj;
}

// 0.01-step grid search over the feasible region (one-hot floors only).
double grid_minimum(const GradientSet& grads, const std::vector<double>& floors,
                    double step = 0.01) {
  const std::size_t m = grads.size();
  double best = std::numeric_limits<double>::max();
  const int n = static_cast<int>(std::llround(1.0 / step));
  if (m == 2) {
    for (int i = 0; i <= n; ++i) {
      const double w0 = i * step;
      const std::vector<double> w = {w0, 1.0 - w0};
      if (w[0] < floors[0] - 1e-12 || w[1] < floors[1] - 1e-12) continue;
      best = std::min(best, objective_at(grads, w));
    }
  } else if (m == 3) {
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const std::vector<double> w = {i * step, j * step, 1.0 - (i + j) * step};
        if (w[0] < floors[0] - 1e-12 || w[1] < floors[1] - 1e-12 || w[2] < floors[2] - 1e-12) {
          continue;
        }
        best = std::min(best, objective_at(grads, w));
      }
    }
  }
  return best;
}

GradientSet random_grads(Rng& rng, std::size_t m, std::size_t dim) {
  GradientSet grads(m, std::vector<double>(dim));
  for (auto& g : grads) {
    for (double& x : g) x = rng.uniform(-1.0, 1.0);
  }
  return grads;
}

void check_feasible(const ParetoSolution& s, const std::vector<double>& floors) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.weights.size(); ++i) {
    CHECK(s.weights[i] >= floors[i] - 1e-8);
    sum += s.weights[i];
  }
  CHECK(std::abs(sum - 1.0) <= 1e-8);
}

}  // namespace

TEST_SUITE("pareto") {

TEST_CASE("symmetric orthogonal gradients split evenly") {
  const GradientSet grads = {{1, 0}, {0, 1}};
  const ParetoSolution s = solve_weights(grads);
  CHECK(s.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.weights[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("asymmetric instance lands at the stationarity point") {
  // f(w) = ||w(2,0) + (1-w)(0,1)||^2 -> 8w - 2(1-w) = 0 -> w = 0.2
  const GradientSet grads = {{2, 0}, {0, 1}};
  const ParetoSolution s = solve_weights(grads);
  CHECK(s.weights[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(s.weights[1] == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("a one-hot floor pins the boundary solution") {
  // unconstrained optimum w0 = 1/101 violates the 0.2 floor
  const GradientSet grads = {{10, 0}, {0, 1}};
  const ParetoSolution s = solve_weights(grads, one_hot_floors(2, 0.2));
  CHECK(s.weights[0] == doctest::Approx(0.2).epsilon(1e-8));
  CHECK(s.weights[1] == doctest::Approx(0.8).epsilon(1e-8));
  const double expected = objective_at(grads, {0.2, 0.8});
  CHECK(s.objective == doctest::Approx(expected).epsilon(1e-9));
  CHECK(s.objective <= grid_minimum(grads, {0.2, 0.2}) + 1e-6);
}

TEST_CASE("opposing gradients certify a stationary point") {
  const GradientSet grads = {{1, 0}, {-1, 0}};
  const ParetoSolution s = solve_weights(grads);
  CHECK(s.objective <= 1e-10);
  CHECK(s.certificate.kind == CertificateKind::stationary);
}

TEST_CASE("orthogonal gradients report the min-norm inner products") {
  const GradientSet grads = {{1, 0}, {0, 1}};
  const ParetoSolution s = solve_weights(grads);
  REQUIRE(s.certificate.kind == CertificateKind::descent_direction);
  REQUIRE(s.certificate.inner_products.size() == 2);
  CHECK(s.certificate.inner_products[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.certificate.inner_products[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.certificate.inner_products[0] >= s.objective - 1e-6);
}

TEST_CASE("min-norm inequality holds on random unconstrained instances") {
  Rng rng(71);
  for (int trial = 0; trial < 100; ++trial) {
    const GradientSet grads = random_grads(rng, 3, 8);
    const ParetoSolution s = solve_weights(grads);
    check_feasible(s, {0, 0, 0});
    if (s.certificate.kind == CertificateKind::stationary) continue;
    for (double ip : s.certificate.inner_products) {
      CHECK(ip >= s.objective - 1e-6);
    }
  }
}

TEST_CASE("objective matches the grid oracle on random instances") {
  Rng rng(72);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const GradientSet grads = random_grads(rng, m, 8);
    const bool floored = trial % 3 == 0;
    const std::vector<double> floors(m, floored ? 0.2 : 0.0);
    const ParetoSolution s =
        solve_weights(grads, floored ? one_hot_floors(m, 0.2)
                                     : std::vector<PreferenceConstraint>{});
    check_feasible(s, floors);
    CHECK(s.objective <= grid_minimum(grads, floors) + 1e-6);
  }
}

TEST_CASE("scaling all gradients leaves the weights unchanged") {
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const GradientSet grads = random_grads(rng, 2, 8);
    GradientSet scaled = grads;
    for (auto& g : scaled) {
      for (double& x : g) x *= 3.7;
    }
    const ParetoSolution a = solve_weights(grads);
    const ParetoSolution b = solve_weights(scaled);
    CHECK(a.weights[0] == doctest::Approx(b.weights[0]).epsilon(1e-6));
    CHECK(b.objective == doctest::Approx(a.objective * 3.7 * 3.7).epsilon(1e-6));
  }
}

TEST_CASE("m = 1 short-circuits to weight 1") {
  const ParetoSolution s = solve_weights({{0.3, -0.2, 0.5}});
  CHECK(s.weights == std::vector<double>{1.0});
  CHECK(s.combined_gradient == std::vector<double>{0.3, -0.2, 0.5});
}

TEST_CASE("infeasible floors are rejected with the constraint list") {
  const GradientSet grads = {{1, 0}, {0, 1}};
  CHECK_THROWS_AS(solve_weights(grads, one_hot_floors(2, 0.6)), InfeasibleError);
  try {
    solve_weights(grads, one_hot_floors(2, 0.6));
  } catch (const InfeasibleError& e) {
    CHECK(std::string(e.what()).find("beta=0.6") != std::string::npos);
  }
}

TEST_CASE("general half-space constraints are honored") {
  // require 0.7 * w0 + 0.3 * w1 >= 0.6, i.e. w0 >= 0.75
  const GradientSet grads = {{10, 0}, {0, 1}};
  const ParetoSolution s = solve_weights(grads, {{{0.7, 0.3}, 0.6}});
  CHECK(0.7 * s.weights[0] + 0.3 * s.weights[1] >= 0.6 - 1e-8);
  CHECK(s.weights[0] == doctest::Approx(0.75).epsilon(1e-6));
}

TEST_CASE("simplex projection with floors") {
  const auto p1 = project_simplex_with_floors({0.9, 0.9}, {});
  CHECK(p1[0] == doctest::Approx(0.5));
  CHECK(p1[1] == doctest::Approx(0.5));

  const auto p2 = project_simplex_with_floors({1.5, -0.5}, {});
  CHECK(p2[0] == doctest::Approx(1.0));
  CHECK(p2[1] == doctest::Approx(0.0));

  const auto p3 = project_simplex_with_floors({1.0, 0.0}, {0.2, 0.2});
  CHECK(p3[0] == doctest::Approx(0.8));
  CHECK(p3[1] == doctest::Approx(0.2));
}

}  // TEST_SUITE
