#include "rexplain/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "rexplain/error.hpp"

namespace rexplain {

namespace {

constexpr double kFeasTol = 1e-9;

bool is_one_hot(const std::vector<double>& h, std::size_t& which) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (std::abs(h[i] - 1.0) < 1e-12) {
      which = i;
      ++ones;
    } else if (std::abs(h[i]) > 1e-12) {
      return false;
    }
  }
  return ones == 1;
}

std::string describe_constraints(const std::vector<PreferenceConstraint>& constraints) {
  std::ostringstream out;
  for (std::size_t q = 0; q < constraints.size(); ++q) {
    if (q > 0) out << ", ";
    out << "h" << q << "=[";
    for (std::size_t i = 0; i < constraints[q].h.size(); ++i) {
      if (i > 0) out << " ";
      out << constraints[q].h[i];
    }
    out << "] beta=" << constraints[q].beta;
  }
  return out.str();
}

struct Problem {
  std::size_t m = 0;
  Eigen::MatrixXd gram;                 // m x m
  std::vector<double> floors;           // per-coordinate lower bound (>= 0)
  std::vector<PreferenceConstraint> halfspaces;  // non-one-hot constraints
  double lipschitz = 1.0;

  double objective(const Eigen::VectorXd& w) const { return w.dot(gram * w); }

  bool feasible(const Eigen::VectorXd& w, double tol) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (w[i] < floors[i] - tol) return false;
      sum += w[i];
    }
    if (std::abs(sum - 1.0) > tol) return false;
    for (const auto& c : halfspaces) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += c.h[i] * w[i];
      if (dot < c.beta - tol) return false;
    }
    return true;
  }
};

// Projection onto {sigma >= 0, sum sigma = s}; the usual sort-and-threshold.
void project_scaled_simplex(Eigen::VectorXd& z, double s) {
  const std::size_t n = z.size();
  if (s <= 0.0) {  // the feasible set is the single point 0
    z.setZero();
    return;
  }
  std::vector<double> u(z.data(), z.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  std::size_t rho = 0;
  double cum_at_rho = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += u[k];
    if (u[k] - (cum - s) / static_cast<double>(k + 1) > 0.0) {
      rho = k + 1;
      cum_at_rho = cum;
    }
  }
  const double tau = (cum_at_rho - s) / static_cast<double>(rho);
  for (std::size_t i = 0; i < n; ++i) z[i] = std::max(z[i] - tau, 0.0);
}

Eigen::VectorXd project_floors(const Problem& p, Eigen::VectorXd w) {
  double floor_sum = 0.0;
  for (std::size_t i = 0; i < p.m; ++i) {
    w[i] -= p.floors[i];
    floor_sum += p.floors[i];
  }
  project_scaled_simplex(w, 1.0 - floor_sum);
  for (std::size_t i = 0; i < p.m; ++i) w[i] += p.floors[i];
  return w;
}

// Dykstra's alternating projections when general half-spaces are present;
// converges to the exact projection onto the intersection.
Eigen::VectorXd project_feasible(const Problem& p, const Eigen::VectorXd& point) {
  if (p.halfspaces.empty()) return project_floors(p, point);

  const std::size_t sets = 1 + p.halfspaces.size();
  Eigen::VectorXd x = point;
  std::vector<Eigen::VectorXd> correction(sets, Eigen::VectorXd::Zero(p.m));
  for (int round = 0; round < 300; ++round) {
    Eigen::VectorXd before_round = x;
    for (std::size_t s = 0; s < sets; ++s) {
      Eigen::VectorXd y = x + correction[s];
      Eigen::VectorXd projected;
      if (s == 0) {
        projected = project_floors(p, y);
      } else {
        const auto& c = p.halfspaces[s - 1];
        Eigen::Map<const Eigen::VectorXd> h(c.h.data(), p.m);
        const double violation = c.beta - h.dot(y);
        projected = violation > 0.0 ? (y + h * (violation / h.squaredNorm())).eval() : y;
      }
      correction[s] = y - projected;
      x = projected;
    }
    if ((x - before_round).norm() < 1e-14) break;
  }
  return x;
}

// A polytope inside the simplex is bounded, so if non-empty it has a vertex
// where m-1 inequality constraints (floors or half-spaces) are active.
bool feasibility_by_vertex_enumeration(const Problem& p) {
  const std::size_t m = p.m;
  Eigen::VectorXd probe(m);
  double floor_sum = std::accumulate(p.floors.begin(), p.floors.end(), 0.0);
  if (floor_sum > 1.0 + kFeasTol) return false;
  if (m == 1) {
    probe[0] = 1.0;
    return p.feasible(probe, kFeasTol);
  }

  // All inequality normals.
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    e[i] = 1.0;
    normals.push_back(e);
    offsets.push_back(p.floors[i]);
  }
  for (const auto& c : p.halfspaces) {
    normals.push_back(Eigen::Map<const Eigen::VectorXd>(c.h.data(), m));
    offsets.push_back(c.beta);
  }

  const std::size_t total = normals.size();
  const std::size_t choose = m - 1;
  std::vector<std::size_t> idx(choose);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    Eigen::MatrixXd A(m, m);
    Eigen::VectorXd b(m);
    A.row(0).setOnes();
    b[0] = 1.0;
    for (std::size_t r = 0; r < choose; ++r) {
      A.row(static_cast<Eigen::Index>(r + 1)) = normals[idx[r]].transpose();
      b[static_cast<Eigen::Index>(r + 1)] = offsets[idx[r]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (lu.isInvertible()) {
      Eigen::VectorXd vertex = lu.solve(b);
      if (p.feasible(vertex, 1e-7)) return true;
    }
    // next (m-1)-combination of [0, total)
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(choose) - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] ==
                         total - (choose - static_cast<std::size_t>(k))) {
      --k;
    }
    if (k < 0) return false;
    ++idx[static_cast<std::size_t>(k)];
    for (std::size_t j = static_cast<std::size_t>(k) + 1; j < choose; ++j) {
      idx[j] = idx[j - 1] + 1;
    }
  }
}

// FISTA with function-value restart; per-iteration cost O(m^2) on the Gram
// form, so a generous budget is cheap.
Eigen::VectorXd accelerated_pg(const Problem& p, Eigen::VectorXd x,
                               const ParetoSolverOptions& options) {
  const double step = 1.0 / std::max(p.lipschitz, 1e-12);
  Eigen::VectorXd y = x;
  double t = 1.0;
  Eigen::VectorXd best = x;
  double best_obj = p.objective(x);

  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd x_next = project_feasible(p, y - step * 2.0 * (p.gram * y));
    const double obj_next = p.objective(x_next);
    if (obj_next < best_obj) {
      best_obj = obj_next;
      best = x_next;
    }
    if (obj_next > p.objective(x)) {
      // momentum overshot: restart extrapolation from the current point;
      // the following plain step cannot increase the objective
      y = x;
      t = 1.0;
      continue;
    }
    const bool converged = (x_next - x).norm() < options.grad_tolerance;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = x_next;
    t = t_next;
    if (converged) break;
  }
  return best_obj < p.objective(x) ? best : x;
}

// Exact refinement: for each candidate active set solve the equality-
// constrained KKT system and keep the best feasible point.
void active_set_polish(const Problem& p, Eigen::VectorXd& w, double& obj) {
  const std::size_t m = p.m;
  std::vector<Eigen::VectorXd> normals;
  std::vector<double> offsets;
  for (std::size_t i = 0; i < m; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
    e[i] = 1.0;
    normals.push_back(e);
    offsets.push_back(p.floors[i]);
  }
  for (const auto& c : p.halfspaces) {
    normals.push_back(Eigen::Map<const Eigen::VectorXd>(c.h.data(), m));
    offsets.push_back(c.beta);
  }
  const std::size_t total = normals.size();
  if (total > 16) return;  // enumeration would explode; APG result stands

  for (std::uint32_t mask = 0; mask < (1u << total); ++mask) {
    const int active = __builtin_popcount(mask);
    if (active >= static_cast<int>(m)) continue;  // plus the sum constraint

    const std::size_t rows = 1 + static_cast<std::size_t>(active);
    Eigen::MatrixXd A(rows, m);
    Eigen::VectorXd b(rows);
    A.row(0).setOnes();
    b[0] = 1.0;
    std::size_t r = 1;
    for (std::size_t j = 0; j < total; ++j) {
      if (mask & (1u << j)) {
        A.row(static_cast<Eigen::Index>(r)) = normals[j].transpose();
        b[static_cast<Eigen::Index>(r)] = offsets[j];
        ++r;
      }
    }

    // KKT system: [2G A^T; A 0] [w; mu] = [0; b]
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + rows, m + rows);
    kkt.topLeftCorner(m, m) = 2.0 * p.gram;
    kkt.topRightCorner(m, rows) = A.transpose();
    kkt.bottomLeftCorner(rows, m) = A;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + rows);
    rhs.tail(rows) = b;

    const Eigen::VectorXd sol = kkt.colPivHouseholderQr().solve(rhs);
    const double scale = 1.0 + rhs.norm() + kkt.norm() * sol.norm();
    if ((kkt * sol - rhs).norm() > 1e-9 * scale) continue;  // singular / inconsistent
    Eigen::VectorXd candidate = sol.head(m);
    if (!p.feasible(candidate, kFeasTol)) continue;
    const double cand_obj = p.objective(candidate);
    if (cand_obj < obj - 1e-15) {
      obj = cand_obj;
      w = candidate;
    }
  }
}

}  // namespace

std::vector<PreferenceConstraint> one_hot_floors(std::size_t m, double beta) {
  std::vector<PreferenceConstraint> out;
  for (std::size_t i = 0; i < m; ++i) {
    PreferenceConstraint c;
    c.h.assign(m, 0.0);
    c.h[i] = 1.0;
    c.beta = beta;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<double> project_simplex_with_floors(const std::vector<double>& point,
                                                const std::vector<double>& floors) {
  Problem p;
  p.m = point.size();
  p.floors = floors.empty() ? std::vector<double>(p.m, 0.0) : floors;
  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(point.data(), point.size());
  Eigen::VectorXd projected = project_floors(p, w);
  return {projected.data(), projected.data() + projected.size()};
}

Certificate certify(const ParetoSolution& solution, const GradientSet& grads) {
  Certificate cert;
  if (solution.objective <= 1e-10) {
    cert.kind = CertificateKind::stationary;
    return cert;
  }
  cert.kind = CertificateKind::descent_direction;
  for (const auto& g : grads) {
    double dot = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) dot += solution.combined_gradient[j] * g[j];
    cert.inner_products.push_back(dot);
  }
  return cert;
}

ParetoSolution solve_weights(const GradientSet& grads,
                             const std::vector<PreferenceConstraint>& constraints,
                             const ParetoSolverOptions& options) {
  if (grads.empty()) throw Error("solve_weights: no gradients");
  const std::size_t m = grads.size();
  const std::size_t dim = grads[0].size();
  for (const auto& g : grads) {
    if (g.size() != dim) throw Error("solve_weights: gradient dimensions differ");
  }
  for (const auto& c : constraints) {
    if (c.h.size() != m) throw Error("solve_weights: constraint dimension mismatch");
    double sum = 0.0;
    for (double v : c.h) {
      if (v < -1e-12) throw Error("solve_weights: constraint directions must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error("solve_weights: constraint direction entries must sum to 1");
    }
  }

  Problem p;
  p.m = m;
  p.floors.assign(m, 0.0);
  for (const auto& c : constraints) {
    std::size_t which = 0;
    if (is_one_hot(c.h, which)) {
      p.floors[which] = std::max(p.floors[which], c.beta);
    } else {
      p.halfspaces.push_back(c);
    }
  }
  for (double& f : p.floors) f = std::max(f, 0.0);

  if (!feasibility_by_vertex_enumeration(p)) {
    throw InfeasibleError("preference constraints exclude the whole simplex: " +
                          describe_constraints(constraints));
  }

  ParetoSolution solution;
  if (m == 1) {
    solution.weights = {1.0};
  } else {
    p.gram.resize(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += grads[i][k] * grads[j][k];
        p.gram(i, j) = dot;
        p.gram(j, i) = dot;
      }
    }
    p.lipschitz = 2.0 * p.gram.trace();  // trace bounds the top eigenvalue

    Eigen::VectorXd w0 = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    Eigen::VectorXd w = accelerated_pg(p, project_feasible(p, w0), options);
    double obj = p.objective(w);
    if (options.polish) active_set_polish(p, w, obj);
    solution.weights.assign(w.data(), w.data() + m);
  }

  solution.combined_gradient.assign(dim, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      solution.combined_gradient[k] += solution.weights[i] * grads[i][k];
    }
  }
  solution.objective = 0.0;
  for (double v : solution.combined_gradient) solution.objective += v * v;
  solution.certificate = certify(solution, grads);
  return solution;
}

}  // namespace rexplain
