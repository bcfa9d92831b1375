#ifndef BELLCV_VERIFY_HPP
#define BELLCV_VERIFY_HPP

// Self-check suite behind `bellcv verify`: algebraic identities, operator
// algebra, the kernel Wronskian and the ceilings on the violation ratio.

#include <cmath>
#include <complex>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "bellcv/kernels.hpp"
#include "bellcv/operators.hpp"
#include "bellcv/random.hpp"
#include "bellcv/states.hpp"
#include "bellcv/violation.hpp"

namespace bellcv {

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace detail

/// (a-d)^2 + (b+c)^2 = a^2 + b^2 + c^2 + d^2 whenever ad = bc.
inline CheckOutcome check_product_identity(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = 2 * rng.uniform() - 1, y = 2 * rng.uniform() - 1;
    const double u = 2 * rng.uniform() - 1, v = 2 * rng.uniform() - 1;
    const double a = x * u, b = x * v, c = y * u, d = y * v;
    const double lhs = (a - d) * (a - d) + (b + c) * (b + c);
    const double rhs = a * a + b * b + c * c + d * d;
    if (rhs > 0) worst = std::max(worst, std::abs(lhs - rhs) / rhs);
  }
  return {"product_identity", worst <= 1e-12, "max rel err " + detail::sci(worst)};
}

/// [S_i, S_j] = 2i eps_ijk S_k and S_i^2 = S_0 for N = 0..max_level.
inline CheckOutcome check_spin_algebra(int max_level) {
  double worst = 0;
  const cplx two_i{0, 2};
  for (int n = 0; n <= max_level; ++n) {
    const FockMatrix sx = pseudo_spin(Axis::X, n), sy = pseudo_spin(Axis::Y, n);
    const FockMatrix sz = pseudo_spin(Axis::Z, n), s0 = pseudo_spin(Axis::Zero, n);
    worst = std::max(worst, (commutator(sx, sy) - two_i * sz).norm());
    worst = std::max(worst, (commutator(sy, sz) - two_i * sx).norm());
    worst = std::max(worst, (commutator(sz, sx) - two_i * sy).norm());
    for (const auto* s : {&sx, &sy, &sz}) worst = std::max(worst, ((*s) * (*s) - s0).norm());
  }
  return {"spin_algebra", worst <= 1e-13, "max residual " + detail::sci(worst)};
}

/// psi_m phi_m' - psi_m' phi_m = 2 on [-5, 5] for m <= max_m.
inline CheckOutcome check_wronskian(int max_m) {
  double worst = 0;
  for (int m = 0; m <= max_m; ++m) {
    for (int k = 0; k <= 200; ++k) {
      const double x = -5 + 0.05 * k;
      const double w = psi(m, x) * phi_derivative(m, x) - psi_derivative(m, x) * phi(m, x);
      worst = std::max(worst, std::abs(w - 2));
    }
  }
  return {"wronskian", worst <= 1e-9, "max deviation " + detail::sci(worst)};
}

/// V* <= 2 for the Bell tensor (attaining 2) and for squeezed-vacuum tensors.
inline CheckOutcome check_ceiling() {
  double worst = maximize_violation(bell_qubit_tensor()).V;
  const double bell = worst;
  for (double z : {0.3, 0.8, 1.15, 2.0, 3.0}) {
    for (Level lvl : std::vector<Level>{0, 1, 5, std::nullopt}) {
      worst = std::max(worst, maximize_violation(tmsv_tensor_analytic(z, lvl)).V);
    }
  }
  const bool ok = worst <= 2 + 1e-6 && std::abs(bell - 2) <= 1e-6;
  return {"violation_ceiling", ok, "Bell " + detail::sci(bell) + ", max " + detail::sci(worst)};
}

/// Random pure product states on the truncated space never exceed V = 1.
inline CheckOutcome check_separable_ceiling(int samples, std::uint64_t seed) {
  double worst = 0;
  for (int s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, 0, static_cast<std::uint64_t>(s)));
    const int level = s % 3;
    const int dim = single_mode_dim(level);
    const auto random_ket = [&] {
      FockVector v(dim);
      for (int i = 0; i < dim; ++i) v(i) = cplx(rng.normal(), rng.normal());
      return FockVector(v / v.norm());
    };
    const FockVector a = random_ket(), b = random_ket();
    FockVector ket(static_cast<Eigen::Index>(dim) * dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) ket(static_cast<Eigen::Index>(two_mode_index(i, j, dim))) = a(i) * b(j);
    OptimizerSettings opt;
    opt.starts = 8;
    worst = std::max(worst, maximize_violation(correlation_tensor_exact(ket, dim, level), opt).V);
  }
  return {"separable_ceiling", worst <= 1 + 1e-6, "max V " + detail::sci(worst)};
}

inline std::vector<CheckOutcome> run_verification_suite(std::uint64_t seed = 1) {
  return {check_product_identity(100000, seed), check_spin_algebra(6), check_wronskian(12), check_ceiling(),
          check_separable_ceiling(30, seed)};
}

}  // namespace bellcv

#endif  // BELLCV_VERIFY_HPP
