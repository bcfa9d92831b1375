#ifndef BELLCV_OPERATORS_HPP
#define BELLCV_OPERATORS_HPP

// Truncated pseudo-spin operators on Fock space and bipartite correlation
// tensors <S^A_mu S^B_nu>, mu, nu in {X, Y, Z, 0}.
//
// Two-mode vectors and matrices use the composite index n * D + m for
// |n>_A |m>_B, where D is the single-mode dimension.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bellcv {

using cplx = std::complex<double>;
using FockMatrix = Eigen::MatrixXcd;
using FockVector = Eigen::VectorXcd;

enum class Axis { X = 0, Y = 1, Z = 2, Zero = 3 };

inline constexpr std::array<Axis, 4> kAllAxes{Axis::X, Axis::Y, Axis::Z, Axis::Zero};

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "X";
    case Axis::Y: return "Y";
    case Axis::Z: return "Z";
    case Axis::Zero: return "0";
  }
  return "?";
}

/// Truncation level N of the pseudo-spin family; std::nullopt means N = infinity.
using Level = std::optional<int>;

inline std::string level_name(const Level& level) {
  return level ? std::to_string(*level) : std::string("inf");
}

inline int single_mode_dim(int level) { return 2 * level + 2; }

inline std::size_t two_mode_index(int n, int m, int dim) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(m);
}

inline std::pair<int, int> two_mode_split(std::size_t index, int dim) {
  return {static_cast<int>(index / static_cast<std::size_t>(dim)),
          static_cast<int>(index % static_cast<std::size_t>(dim))};
}

/// A direction on the unit sphere. Construction checks normalization to 1e-12.
class UnitVector3 {
 public:
  UnitVector3() : v_{0, 0, 1} {}
  UnitVector3(double x, double y, double z) : v_{x, y, z} {
    const double n2 = x * x + y * y + z * z;
    if (!(std::abs(n2 - 1.0) <= 1e-12)) {
      throw std::invalid_argument("UnitVector3: |r|^2 = " + std::to_string(n2) + " is not 1");
    }
  }

  /// Normalizes an arbitrary nonzero vector.
  static UnitVector3 normalized(double x, double y, double z) {
    const double n = std::sqrt(x * x + y * y + z * z);
    if (!(n > 0)) throw std::invalid_argument("UnitVector3::normalized: zero vector");
    UnitVector3 u;
    u.v_ = {x / n, y / n, z / n};
    return u;
  }

  static UnitVector3 from_angles(double polar, double azimuth) {
    UnitVector3 u;
    u.v_ = {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)};
    return u;
  }

  double x() const { return v_[0]; }
  double y() const { return v_[1]; }
  double z() const { return v_[2]; }
  double operator[](std::size_t i) const { return v_[i]; }
  const std::array<double, 3>& components() const { return v_; }

 private:
  std::array<double, 3> v_;
};

using Vec3 = std::array<double, 3>;

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline Vec3 cross(const UnitVector3& a, const UnitVector3& b) { return cross(a.components(), b.components()); }

/// Pseudo-spin operator S_{axis,N} on dimension 2N+2, or a larger dimension
/// when `dim` is given (the operator is then zero on levels above 2N+1).
inline FockMatrix pseudo_spin(Axis axis, int level, int dim = -1) {
  if (level < 0) throw std::invalid_argument("pseudo_spin: level must be >= 0");
  const int d = single_mode_dim(level);
  if (dim < 0) dim = d;
  if (dim < d) throw std::invalid_argument("pseudo_spin: dimension smaller than 2N+2");
  FockMatrix s = FockMatrix::Zero(dim, dim);
  const cplx i{0.0, 1.0};
  for (int k = 0; k <= level; ++k) {
    const int a = 2 * k, b = 2 * k + 1;
    switch (axis) {
      case Axis::X:
        s(a, b) = 1.0;
        s(b, a) = 1.0;
        break;
      case Axis::Y:
        s(a, b) = -i;
        s(b, a) = i;
        break;
      case Axis::Z:
        s(a, a) = 1.0;
        s(b, b) = -1.0;
        break;
      case Axis::Zero:
        s(a, a) = 1.0;
        s(b, b) = 1.0;
        break;
    }
  }
  return s;
}

/// r_x S_X + r_y S_Y + r_z S_Z at level N.
inline FockMatrix spin_direction(const UnitVector3& r, int level, int dim = -1) {
  return r.x() * pseudo_spin(Axis::X, level, dim) + r.y() * pseudo_spin(Axis::Y, level, dim) +
         r.z() * pseudo_spin(Axis::Z, level, dim);
}

/// Same combination for an arbitrary (not necessarily unit) vector.
inline FockMatrix spin_combination(const Vec3& r, int level, int dim = -1) {
  return r[0] * pseudo_spin(Axis::X, level, dim) + r[1] * pseudo_spin(Axis::Y, level, dim) +
         r[2] * pseudo_spin(Axis::Z, level, dim);
}

inline FockMatrix commutator(const FockMatrix& a, const FockMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols()) {
    throw std::invalid_argument("commutator: dimension mismatch (" + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
  return a * b - b * a;
}

enum class Provenance { Analytic, ExactFock, Tomographic };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Analytic: return "analytic";
    case Provenance::ExactFock: return "exact-Fock";
    case Provenance::Tomographic: return "tomographic";
  }
  return "?";
}

inline Provenance provenance_from_name(const std::string& s) {
  if (s == "analytic") return Provenance::Analytic;
  if (s == "exact-Fock") return Provenance::ExactFock;
  if (s == "tomographic") return Provenance::Tomographic;
  throw std::invalid_argument("unknown provenance '" + s + "'");
}

using Matrix4 = std::array<std::array<double, 4>, 4>;

/// T[mu][nu] = <S^A_mu S^B_nu>, indexed in the order X, Y, Z, 0.
struct CorrelationTensor {
  Matrix4 T{};
  Level level;
  Provenance provenance = Provenance::Analytic;
  /// Largest |Im| discarded when the tensor was formed.
  double imag_residue = 0;

  double operator()(Axis a, Axis b) const {
    return T[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  double& operator()(Axis a, Axis b) { return T[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; }

  /// Spatial block T3[i][j], i, j in {X, Y, Z}.
  double t3(std::size_t i, std::size_t j) const { return T[i][j]; }
  double norm() const { return T[3][3]; }
};

namespace detail {

struct SparseEntry {
  int row;
  int col;
  cplx value;
};

inline std::vector<SparseEntry> pseudo_spin_entries(Axis axis, int level) {
  std::vector<SparseEntry> out;
  const FockMatrix s = pseudo_spin(axis, level);
  for (int r = 0; r < s.rows(); ++r) {
    for (int c = 0; c < s.cols(); ++c) {
      if (s(r, c) != cplx{}) out.push_back({r, c, s(r, c)});
    }
  }
  return out;
}

inline void check_level_fits(int dim, int level) {
  if (level < 0) throw std::invalid_argument("correlation_tensor_exact: level must be >= 0");
  if (dim < single_mode_dim(level)) {
    throw std::invalid_argument("correlation_tensor_exact: truncation too small, D = " + std::to_string(dim) +
                                " < 2N+2 = " + std::to_string(single_mode_dim(level)));
  }
}

template <class Expect>
CorrelationTensor assemble_tensor(int level, Expect&& expect) {
  CorrelationTensor t;
  t.level = level;
  t.provenance = Provenance::ExactFock;
  std::array<std::vector<SparseEntry>, 4> ops;
  for (Axis a : kAllAxes) ops[static_cast<std::size_t>(a)] = pseudo_spin_entries(a, level);
  for (std::size_t mu = 0; mu < 4; ++mu) {
    for (std::size_t nu = 0; nu < 4; ++nu) {
      const cplx v = expect(ops[mu], ops[nu]);
      t.T[mu][nu] = v.real();
      t.imag_residue = std::max(t.imag_residue, std::abs(v.imag()));
    }
  }
  return t;
}

}  // namespace detail

/// Tr[rho (S_mu x S_nu)] over a two-mode matrix of dimension D^2 without any
/// validation; `rho` may be the leading block of a larger state.
inline CorrelationTensor correlation_tensor_from_block(const FockMatrix& rho, int dim, int level) {
  if (rho.rows() != rho.cols() || rho.rows() != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("correlation_tensor_from_block: matrix is not D^2 x D^2");
  }
  detail::check_level_fits(dim, level);
  return detail::assemble_tensor(level, [&](const auto& a, const auto& b) {
    // sum over rho[(a_c, b_c), (a_r, b_r)] * A[a_r][a_c] * B[b_r][b_c]
    cplx acc{};
    for (const auto& ea : a) {
      for (const auto& eb : b) {
        acc += rho(static_cast<Eigen::Index>(two_mode_index(ea.col, eb.col, dim)),
                   static_cast<Eigen::Index>(two_mode_index(ea.row, eb.row, dim))) *
               ea.value * eb.value;
      }
    }
    return acc;
  });
}

/// Tr[rho (S_mu x S_nu)] for a two-mode density matrix of dimension D^2.
/// Validates trace (1e-10) and positivity (eigenvalues >= -1e-10).
inline CorrelationTensor correlation_tensor_exact(const FockMatrix& rho, int dim, int level) {
  if (rho.rows() != rho.cols() || rho.rows() != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("correlation_tensor_exact: state is not D^2 x D^2");
  }
  detail::check_level_fits(dim, level);
  const cplx tr = rho.trace();
  if (std::abs(tr - 1.0) > 1e-10) {
    throw std::invalid_argument("correlation_tensor_exact: trace " + std::to_string(tr.real()) + " is not 1");
  }
  const FockMatrix herm = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<FockMatrix> es(herm, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("correlation_tensor_exact: state is not positive semidefinite");
  }
  return correlation_tensor_from_block(rho, dim, level);
}

/// <psi| S_mu x S_nu |psi> for a normalized two-mode ket of dimension D^2.
inline CorrelationTensor correlation_tensor_exact(const FockVector& ket, int dim, int level) {
  if (ket.size() != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("correlation_tensor_exact: ket is not of size D^2");
  }
  detail::check_level_fits(dim, level);
  if (std::abs(ket.squaredNorm() - 1.0) > 1e-10) {
    throw std::invalid_argument("correlation_tensor_exact: ket norm " + std::to_string(ket.norm()) + " is not 1");
  }
  return detail::assemble_tensor(level, [&](const auto& a, const auto& b) {
    cplx acc{};
    for (const auto& ea : a) {
      for (const auto& eb : b) {
        acc += std::conj(ket(static_cast<Eigen::Index>(two_mode_index(ea.row, eb.row, dim)))) * ea.value *
               eb.value * ket(static_cast<Eigen::Index>(two_mode_index(ea.col, eb.col, dim)));
      }
    }
    return acc;
  });
}

/// Single-mode expectation values <S_mu>, mu in {X, Y, Z, 0}.
inline std::array<double, 4> pseudo_spin_expectations(const FockMatrix& rho, int level) {
  std::array<double, 4> out{};
  for (Axis a : kAllAxes) {
    const FockMatrix s = pseudo_spin(a, level, static_cast<int>(rho.rows()));
    out[static_cast<std::size_t>(a)] = (rho * s).trace().real();
  }
  return out;
}

}  // namespace bellcv

#endif  // BELLCV_OPERATORS_HPP
