#pragma once

// Truncated multimode Fock space: basis bookkeeping, pure vectors and
// density matrices, plus the handful of algebraic operations the scissors
// pipeline needs (tensor products, partial traces, projections, two-mode
// unitaries).
//
// Basis ordering is mixed-radix with the FIRST listed mode as the most
// significant digit: for modes (m0, m1, ..., mk) with cutoffs (c0, ..., ck)
//
//   index(n0, ..., nk) = ((n0 * (c1+1) + n1) * (c2+1) + n2) ...
//
// Every result in the library depends on this ordering; do not change it.

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qsd {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Raised for contract violations (bad labels, out-of-range occupations,
/// non-unitary operators, invalid physical parameters).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Slack allowed on probability-like quantities before they are rejected
/// rather than clamped.
inline constexpr double kProbabilitySlack = 1e-6;

/// Checks `p` against [0, 1] with kProbabilitySlack and clamps it.
double clamp_probability(double p, std::string_view what);

namespace fock {

struct Mode {
  std::string label;
  int cutoff = 0;  // highest retained photon number

  bool operator==(const Mode&) const = default;
};

class ModeLayout {
 public:
  /// Zero modes: a one-dimensional (scalar) space.
  ModeLayout() = default;
  explicit ModeLayout(std::vector<Mode> modes);

  std::size_t num_modes() const { return modes_.size(); }
  std::span<const Mode> modes() const { return modes_; }
  const Mode& mode(std::size_t i) const { return modes_.at(i); }
  std::size_t dim() const { return dim_; }

  std::optional<std::size_t> find(std::string_view label) const;
  /// Position of `label`; throws if absent.
  std::size_t position(std::string_view label) const;
  int cutoff(std::string_view label) const { return modes_[position(label)].cutoff; }
  /// Index distance between |..., n_i, ...> and |..., n_i + 1, ...>.
  std::size_t stride(std::size_t i) const { return strides_.at(i); }

  std::size_t index(std::span<const int> occupation) const;
  std::vector<int> occupation(std::size_t index) const;
  /// Occupation of a single mode inside basis element `index`.
  int occupation_of(std::size_t index, std::size_t mode_pos) const {
    return static_cast<int>((index / strides_[mode_pos]) %
                            static_cast<std::size_t>(modes_[mode_pos].cutoff + 1));
  }

  ModeLayout without(std::string_view label) const;
  ModeLayout concat(const ModeLayout& other) const;
  ModeLayout relabeled(std::string_view from, std::string_view to) const;
  ModeLayout with_cutoff(std::string_view label, int cutoff) const;

  bool operator==(const ModeLayout& other) const { return modes_ == other.modes_; }

 private:
  std::vector<Mode> modes_;
  std::vector<std::size_t> strides_;
  std::size_t dim_ = 1;
};

/// Single-mode layout helper.
ModeLayout single_mode(std::string label, int cutoff);

class FockVector {
 public:
  FockVector(ModeLayout layout, CVector amps);
  /// Basis vector |occupation>.
  static FockVector basis(ModeLayout layout, std::span<const int> occupation);

  const ModeLayout& layout() const { return layout_; }
  const CVector& amps() const { return amps_; }
  Complex amp(std::span<const int> occupation) const { return amps_[layout_.index(occupation)]; }
  double norm_sq() const { return amps_.squaredNorm(); }

 private:
  ModeLayout layout_;
  CVector amps_;
};

class DensityMatrix {
 public:
  DensityMatrix(ModeLayout layout, CMatrix elems);
  /// |v><v|, unnormalized if v is.
  static DensityMatrix pure(const FockVector& v);

  const ModeLayout& layout() const { return layout_; }
  const CMatrix& elems() const { return elems_; }
  Complex trace() const { return elems_.trace(); }

  /// max |rho - rho^dagger|.
  double hermiticity_defect() const;
  /// Smallest eigenvalue of the Hermitian part.
  double min_eigenvalue() const;

 private:
  ModeLayout layout_;
  CMatrix elems_;
};

/// Throws unless `rho` is Hermitian (1e-10), PSD (-1e-9) and has
/// trace in [0, 1 + 1e-9].
void validate(const DensityMatrix& rho);

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);
FockVector tensor(const FockVector& a, const FockVector& b);

/// Reduced state on `keep`; kept modes retain their original relative order.
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep);

/// <n|_mode v on the layout without `mode` (unnormalized).
FockVector project_mode(const FockVector& v, std::string_view mode, int n);

/// <psi|rho|psi>, clamped to [0, 1].
double fidelity_pure(const DensityMatrix& rho, const FockVector& psi);

/// Optional restriction for apply_unitary: the operator only needs to be
/// unitary on pair states with n_a + n_b <= max_photons, and the state must
/// carry no weight above that.
struct UnitaryCheck {
  std::optional<int> max_photons;
};

/// Applies a two-mode operator `u`, given on the pair space of (mode_a,
/// mode_b) with pair index n_a * (cutoff_b + 1) + n_b. Vectors map to u v,
/// density matrices to u rho u^dagger.
FockVector apply_unitary(const FockVector& v, std::string_view mode_a,
                         std::string_view mode_b, const CMatrix& u,
                         UnitaryCheck check = {});
DensityMatrix apply_unitary(const DensityMatrix& rho, std::string_view mode_a,
                            std::string_view mode_b, const CMatrix& u,
                            UnitaryCheck check = {});

/// sqrt(D) rho sqrt(D) for a non-negative diagonal operator D on one mode.
/// With D a Fock-diagonal POVM element, the trace of the result is the
/// probability of that outcome.
DensityMatrix apply_diagonal(const DensityMatrix& rho, std::string_view mode,
                             const RVector& diag);

/// Embeds into a larger cutoff (zero padding) or truncates to a smaller one.
DensityMatrix with_cutoff(const DensityMatrix& rho, std::string_view mode, int cutoff);
FockVector with_cutoff(const FockVector& v, std::string_view mode, int cutoff);

DensityMatrix relabel(const DensityMatrix& rho, std::string_view from, std::string_view to);

/// 0.5 * sum |eigenvalues(a - b)|; layouts must match.
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

}  // namespace fock
}  // namespace qsd
