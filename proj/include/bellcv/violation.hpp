#ifndef BELLCV_VIOLATION_HPP
#define BELLCV_VIOLATION_HPP

// Entanglement criteria built from a correlation tensor and four unit
// directions r1, r2 (mode A) and s1, s2 (mode B), plus a multi-start
// Nelder-Mead search for the largest violation ratio.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"

namespace bellcv {

struct DirectionSet {
  UnitVector3 r1, r2, s1, s2;
};

/// r^T T3 s over the spatial block.
inline double sandwich(const CorrelationTensor& t, const Vec3& r, const Vec3& s) {
  double acc = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) acc += r[i] * t.t3(i, j) * s[j];
  return acc;
}

struct ViolationResult {
  double V = 0;
  double lhs = 0;
  double rhs = 0;
  DirectionSet directions;
  Provenance provenance = Provenance::Analytic;
};

namespace detail {

struct RatioParts {
  double lhs, rhs;
};

inline RatioParts ratio_parts(const CorrelationTensor& t, const Vec3& r1, const Vec3& r2, const Vec3& s1,
                              const Vec3& s2) {
  const double c11 = sandwich(t, r1, s1), c12 = sandwich(t, r1, s2);
  const double c21 = sandwich(t, r2, s1), c22 = sandwich(t, r2, s2);
  const double lhs = 4 * t(Axis::Zero, Axis::Zero) - (c11 * c11 + c12 * c12 + c21 * c21 + c22 * c22);
  const double rhs = 4 * std::abs(sandwich(t, cross(r1, r2), cross(s1, s2)));
  return {lhs, rhs};
}

}  // namespace detail

/// V = 4 |(r1 x r2) T3 (s1 x s2)| / (4 T00 - sum_ij (r_i T3 s_j)^2). Separable
/// states give V <= 1.
inline ViolationResult violation_ratio(const CorrelationTensor& t, const DirectionSet& d) {
  const auto parts =
      detail::ratio_parts(t, d.r1.components(), d.r2.components(), d.s1.components(), d.s2.components());
  if (!(parts.lhs > 0)) {
    throw std::domain_error("violation_ratio: non-positive denominator " + std::to_string(parts.lhs) +
                            " (tensor inconsistent with a physical state)");
  }
  return {parts.rhs / parts.lhs, parts.lhs, parts.rhs, d, t.provenance};
}

enum class Relation { LessEqual, GreaterEqual };

struct InequalityCheck {
  std::string name;
  double lhs = 0;
  double rhs = 0;
  Relation relation = Relation::LessEqual;
  /// Distance to the boundary, positive when the inequality holds.
  double slack = 0;
  bool satisfied = true;
};

/// Evaluates the separability-type inequalities for one tensor and direction
/// set. `tolerance` absorbs rounding in the satisfied flag.
inline std::vector<InequalityCheck> check_inequalities(const CorrelationTensor& t, const DirectionSet& d,
                                                       double tolerance = 1e-12) {
  const Vec3 r1 = d.r1.components(), r2 = d.r2.components(), s1 = d.s1.components(), s2 = d.s2.components();
  const double c11 = sandwich(t, r1, s1), c12 = sandwich(t, r1, s2);
  const double c21 = sandwich(t, r2, s1), c22 = sandwich(t, r2, s2);
  const double squares = c11 * c11 + c12 * c12 + c21 * c21 + c22 * c22;
  const double t00 = t(Axis::Zero, Axis::Zero);
  const double uv = sandwich(t, cross(r1, r2), cross(s1, s2));
  const double product = (c11 - c22) * (c11 - c22) + (c12 + c21) * (c12 + c21);

  std::vector<InequalityCheck> out;
  const auto add = [&](std::string name, double lhs, Relation rel, double rhs) {
    InequalityCheck c{std::move(name), lhs, rhs, rel, 0, true};
    c.slack = rel == Relation::LessEqual ? rhs - lhs : lhs - rhs;
    c.satisfied = c.slack >= -tolerance;
    out.push_back(std::move(c));
  };
  // <A1B1 - A2B2>^2 + <A1B2 + A2B1>^2 <= sum_ij <A_i^2 B_j^2>
  add("product_moment", product, Relation::LessEqual, 4 * t00);
  // the same with dichotomic observables, A_i^2 = B_j^2 = 1
  add("product_moment_dichotomic", product, Relation::LessEqual, 4);
  // <(A1B1 - A2B2)^2 + (A1B2 + A2B1)^2> >= sum_ij <A_i B_j>^2
  add("separability", 4 * t00 + 4 * uv, Relation::GreaterEqual, squares);
  // sum_ij Var(A_i B_j) >= |<[A1, A2][B1, B2]>|
  add("variance_commutator", 4 * t00 - squares, Relation::GreaterEqual, 4 * std::abs(uv));
  // the qubit-projected form with half the commutator weight
  add("qubit_commutator", 4 * t00 - squares, Relation::GreaterEqual, 2 * std::abs(uv));
  return out;
}

struct OptimizerSettings {
  int starts = 32;
  int max_iterations = 2000;
  double tolerance = 1e-8;
  std::uint64_t seed = 0x0B5E55EDULL;
};

namespace detail {

using Angles = std::array<double, 8>;

inline Vec3 angle_vector(double polar, double azimuth) {
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)};
}

/// Relative floor on the denominator. When T00 equals a diagonal correlation
/// the supremum is a limit with lhs -> 0; below the floor rounding dominates.
inline constexpr double kDenominatorFloor = 1e-9;

/// Objective to minimize: -V, or +inf where the denominator is below the floor.
inline double negative_ratio(const CorrelationTensor& t, const Angles& a) {
  const auto parts = ratio_parts(t, angle_vector(a[0], a[1]), angle_vector(a[2], a[3]), angle_vector(a[4], a[5]),
                                 angle_vector(a[6], a[7]));
  if (!(parts.lhs > kDenominatorFloor * 4 * std::abs(t(Axis::Zero, Axis::Zero)))) {
    return std::numeric_limits<double>::infinity();
  }
  return -parts.rhs / parts.lhs;
}

struct SimplexResult {
  Angles x;
  double f;
  int iterations;
};

/// Nelder-Mead with standard coefficients. Stops when both the simplex
/// diameter (max-norm) and the spread of values drop below tol.
template <class F>
SimplexResult nelder_mead(F&& f, const Angles& start, double step, int max_iter, double tol) {
  constexpr int n = 8;
  std::array<Angles, n + 1> pts;
  std::array<double, n + 1> val;
  pts[0] = start;
  for (int i = 0; i < n; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += step;
  }
  for (int i = 0; i <= n; ++i) val[i] = f(pts[i]);

  std::array<int, n + 1> order;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return val[a] < val[b]; });
    const int best = order[0], worst = order[n], second = order[n - 1];

    double diameter = 0;
    for (int i = 1; i <= n; ++i)
      for (int k = 0; k < n; ++k) diameter = std::max(diameter, std::abs(pts[order[i]][k] - pts[best][k]));
    if (diameter < tol && std::abs(val[worst] - val[best]) < tol) break;

    Angles centroid{};
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) centroid[k] += pts[order[i]][k] / n;
    const auto along = [&](double c) {
      Angles p;
      for (int k = 0; k < n; ++k) p[k] = centroid[k] + c * (pts[worst][k] - centroid[k]);
      return p;
    };

    const Angles xr = along(-1.0);
    const double fr = f(xr);
    if (fr < val[best]) {
      const Angles xe = along(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Angles xc = along(outside ? -0.5 : 0.5);
    const double fc = f(xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (int i = 1; i <= n; ++i) {
      const int idx = order[i];
      for (int k = 0; k < n; ++k) pts[idx][k] = pts[best][k] + 0.5 * (pts[idx][k] - pts[best][k]);
      val[idx] = f(pts[idx]);
    }
  }
  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (val[i] < val[best]) best = i;
  return {pts[best], val[best], iter};
}

}  // namespace detail

/// Largest V over all direction sets, from `starts` seeded random starts on
/// the sphere, each followed by a short restart around its optimum. Ties keep
/// the lowest start index, so the result depends only on the tensor and seed.
inline ViolationResult maximize_violation(const CorrelationTensor& t, const OptimizerSettings& opt = {}) {
  if (opt.starts < 1 || opt.max_iterations < 1 || !(opt.tolerance > 0)) {
    throw std::invalid_argument("maximize_violation: invalid optimizer settings");
  }
  const auto objective = [&](const detail::Angles& a) { return detail::negative_ratio(t, a); };

  detail::Angles best_x{};
  double best_f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < opt.starts; ++s) {
    Rng rng(derive_seed(opt.seed, 0x5eedULL, static_cast<std::uint64_t>(s)));
    detail::Angles start;
    for (int v = 0; v < 4; ++v) {
      start[2 * v] = std::acos(1 - 2 * rng.uniform());
      start[2 * v + 1] = 2 * std::numbers::pi * rng.uniform();
    }
    auto res = detail::nelder_mead(objective, start, 0.6, opt.max_iterations, opt.tolerance);
    const auto polish = detail::nelder_mead(objective, res.x, 1e-3, opt.max_iterations, opt.tolerance);
    if (polish.f <= res.f) res = polish;
    if (res.f < best_f) {
      best_f = res.f;
      best_x = res.x;
    }
  }
  if (!std::isfinite(best_f)) {
    throw std::domain_error("maximize_violation: no direction set with a positive denominator");
  }
  const DirectionSet d{UnitVector3::from_angles(best_x[0], best_x[1]), UnitVector3::from_angles(best_x[2], best_x[3]),
                       UnitVector3::from_angles(best_x[4], best_x[5]), UnitVector3::from_angles(best_x[6], best_x[7])};
  return violation_ratio(t, d);
}

inline nlohmann::json to_json(const UnitVector3& u) { return nlohmann::json::array({u.x(), u.y(), u.z()}); }

inline nlohmann::json to_json(const ViolationResult& r) {
  return {{"V", r.V},
          {"lhs", r.lhs},
          {"rhs", r.rhs},
          {"r1", to_json(r.directions.r1)},
          {"r2", to_json(r.directions.r2)},
          {"s1", to_json(r.directions.s1)},
          {"s2", to_json(r.directions.s2)},
          {"provenance", provenance_name(r.provenance)}};
}

inline nlohmann::json to_json(const CorrelationTensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (Axis a : kAllAxes) {
    nlohmann::json row = nlohmann::json::array();
    for (Axis b : kAllAxes) row.push_back(t(a, b));
    rows.push_back(row);
  }
  return {{"T", rows}, {"N", level_name(t.level)}, {"provenance", provenance_name(t.provenance)}};
}

/// Inverse of to_json(CorrelationTensor): {"T": 4x4 rows, "N": level, "provenance": name}.
inline CorrelationTensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("T")) throw std::invalid_argument("tensor JSON: missing field 'T'");
  const auto& rows = j.at("T");
  if (!rows.is_array() || rows.size() != 4) throw std::invalid_argument("tensor JSON: 'T' must be 4x4");
  CorrelationTensor t;
  for (std::size_t a = 0; a < 4; ++a) {
    if (!rows[a].is_array() || rows[a].size() != 4) throw std::invalid_argument("tensor JSON: 'T' must be 4x4");
    for (std::size_t b = 0; b < 4; ++b) {
      if (!rows[a][b].is_number()) throw std::invalid_argument("tensor JSON: non-numeric entry");
      t.T[a][b] = rows[a][b].get<double>();
    }
  }
  if (j.contains("N")) {
    const auto& n = j.at("N");
    if (n.is_number_integer()) t.level = n.get<int>();
    else if (n.is_string() && n.get<std::string>() == "inf") t.level = std::nullopt;
    else if (n.is_string()) t.level = std::stoi(n.get<std::string>());
  }
  if (j.contains("provenance")) t.provenance = provenance_from_name(j.at("provenance").get<std::string>());
  return t;
}

}  // namespace bellcv

#endif  // BELLCV_VIOLATION_HPP
