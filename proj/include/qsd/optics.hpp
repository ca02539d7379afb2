#pragma once

// Physical ingredients of the scissors setup: coherent light, the
// phase-averaged down-conversion pair source, lossless beam splitters in the
// Fock basis, and binary (click / no-click) detectors with finite efficiency.

#include <numbers>
#include <string>
#include <vector>

#include "qsd/fock.hpp"

namespace qsd::optics {

struct BeamSplitterParams {
  double theta = std::numbers::pi / 4;  // mixing angle
  double psi_t = 0.0;                   // transmission phase
  double psi_r = std::numbers::pi / 2;  // reflection phase
};

struct DetectorModel {
  double eta = 1.0;  // quantum efficiency
};

struct PdcParams {
  double gamma_sq = 4e-4;  // pair probability per pulse
  int pair_cutoff = 2;     // highest pair number kept
};

/// Poisson tail 1 - sum_{n<=cutoff} e^{-mean} mean^n / n!, summed directly
/// over the tail so it stays accurate down to ~1e-300.
double coherent_tail(double mean_photons, int cutoff);

/// Smallest cutoff whose coherent tail is <= tol.
int coherent_cutoff_for(double mean_photons, double tol = 1e-10);

inline constexpr double kCoherentTailTolerance = 1e-10;

enum class TailPolicy {
  kStrict,  // reject cutoffs whose tail exceeds kCoherentTailTolerance
  kLossy,   // keep the truncated (unnormalized) amplitudes regardless
};

/// |alpha> truncated at `cutoff`: amps[n] = e^{-|alpha|^2/2} alpha^n / sqrt(n!).
fock::FockVector coherent_vector(Complex alpha, int cutoff, std::string label = "b3",
                                 TailPolicy policy = TailPolicy::kStrict);

/// Diagonal two-mode state (1 - g^2) sum_n g^{2n} |n,n><n,n| for n <= pair_cutoff.
fock::DensityMatrix pdc_density(const PdcParams& p, std::string signal = "a1",
                                std::string idler = "c1");

/// Photon-number blocks of a two-mode beam splitter, the ket action of the
/// operator conjugating density matrices as rho -> U^dagger rho U.
///
/// Block N acts on |k, N-k>, k = 0..N (k is the first mode's occupation);
/// block(N)(k_out, k_in) is the amplitude <k_out, N-k_out| U^dagger |k_in, N-k_in>.
/// Blocks are complete (N+1)x(N+1) unitaries; truncation to finite mode
/// cutoffs is done by the consumer.
class BeamSplitterBlocks {
 public:
  BeamSplitterBlocks(const BeamSplitterParams& p, int max_photons);

  int max_photons() const { return static_cast<int>(blocks_.size()) - 1; }
  const CMatrix& block(int n) const { return blocks_.at(static_cast<std::size_t>(n)); }
  const BeamSplitterParams& params() const { return params_; }

  /// Two-mode amplitudes `in` (rows: first mode, cols: second mode) mapped
  /// through the beam splitter into an array of size out_rows x out_cols.
  /// Output entries beyond the array are dropped; every nonzero input must
  /// lie in a block <= max_photons().
  CMatrix apply(const CMatrix& in, int out_rows, int out_cols) const;

 private:
  BeamSplitterParams params_;
  std::vector<CMatrix> blocks_;
};

/// Block N of the beam splitter ket action, built by exponentiating the
/// generators restricted to the N-photon subspace.
CMatrix beam_splitter_block(const BeamSplitterParams& p, int n);

/// Dense two-mode matrix on the truncated basis (pair index
/// n1 * (cutoff2 + 1) + n2). Blocks with N > min(cutoff1, cutoff2) are only
/// partially represented and are therefore not unitary.
CMatrix beam_splitter_unitary(const BeamSplitterParams& p, int cutoff1, int cutoff2);

/// Diagonal of Pi_0 = sum_m (1 - eta)^m |m><m|, m = 0..cutoff.
RVector povm_no_click(const DetectorModel& d, int cutoff);
/// Diagonal of Pi_click = 1 - Pi_0.
RVector povm_click(const DetectorModel& d, int cutoff);

void validate(const DetectorModel& d);

}  // namespace qsd::optics
