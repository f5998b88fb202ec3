#pragma once

#include <string>
#include <vector>

namespace rexplain {

// M gradient vectors of equal dimension, one per objective.
using GradientSet = std::vector<std::vector<double>>;

// Half-space h^T w >= beta with h on the simplex (non-negative, summing to 1).
struct PreferenceConstraint {
  std::vector<double> h;
  double beta = 0.0;
};

// One-hot floors for every objective: w_i >= beta (the shipped default).
std::vector<PreferenceConstraint> one_hot_floors(std::size_t m, double beta);

enum class CertificateKind { stationary, descent_direction };

struct Certificate {
  CertificateKind kind = CertificateKind::descent_direction;
  // g^T grad_m for every objective; meaningful when kind == descent_direction.
  std::vector<double> inner_products;
};

struct ParetoSolution {
  std::vector<double> weights;            // on the simplex, constraints satisfied
  std::vector<double> combined_gradient;  // sum_i w_i grad_i
  double objective = 0.0;                 // ||combined||^2
  Certificate certificate;
};

struct ParetoSolverOptions {
  int max_iterations = 20000;   // accelerated projected-gradient budget
  double grad_tolerance = 1e-12;
  bool polish = true;           // exact active-set refinement for small M
};

// Minimizes ||sum_i w_i grad_i||^2 over the simplex intersected with the
// preference half-spaces. Accelerated projected gradient on the M-dim Gram
// form, then an exact active-set polish (KKT systems over candidate active
// sets) for small M. Throws InfeasibleError when the constraints exclude the
// whole simplex.
ParetoSolution solve_weights(const GradientSet& grads,
                             const std::vector<PreferenceConstraint>& constraints = {},
                             const ParetoSolverOptions& options = {});

// Stationary when ||g||^2 <= 1e-10; otherwise reports the per-objective
// inner products g^T grad_m. With only simplex constraints active these
// satisfy the min-norm bound g^T grad_m >= ||g||^2 (up to solver tolerance);
// with active preference constraints the raw values are reported without
// asserting a sign.
Certificate certify(const ParetoSolution& solution, const GradientSet& grads);

// Euclidean projection onto {w : sum w = 1, w_i >= floor_i}; exposed for
// tests. floors may be empty (plain simplex).
std::vector<double> project_simplex_with_floors(const std::vector<double>& point,
                                                const std::vector<double>& floors);

}  // namespace rexplain
