#pragma once

// End-to-end scissors evaluation: down-conversion pair source, vacuum and
// coherent inputs, two 50:50 beam splitters, heralding on a click at D1
// (idler c1) and D2 (c2) together with no click at D3 (c3), and the
// resulting conditional state of mode b1.
//
// Mode bookkeeping:
//   BS1: (a1, a2) -> (b1, b2)
//   BS2: (b2, b3) -> (c2, c3)
// The first input label maps to the first output label.

#include <optional>

#include "qsd/fock.hpp"
#include "qsd/optics.hpp"

namespace qsd::pipeline {

/// Pulse repetition rate that turns the success probability at
/// (eta = 0.5, |alpha|^2 = 0.72, balanced target) into 4533 events/s.
/// Reproduced by `optimizer::calibrate_rep_rate` (see tests).
inline constexpr double kDefaultRepRate = 1.0007716497e8;

inline constexpr double kNoEventThreshold = 1e-15;

enum class Source {
  kPdcMixture,  // phase-averaged pair mixture
  kSinglePair,  // exactly one pair, weight 1
};

enum class Detection {
  kThreshold,        // click / no-click POVM with efficiency eta
  kNumberResolving,  // ideal projection onto idler 1, c2 = 1, c3 = 0 photons
};

struct SchemeConfig {
  Complex alpha{0.0, 0.0};
  optics::PdcParams pdc{};
  optics::DetectorModel eta1{0.5}, eta2{0.5}, eta3{0.5};
  /// Highest Fock number kept for the coherent input; nullopt = smallest
  /// value with Poisson tail <= 1e-10.
  std::optional<int> coherent_cutoff;
  /// Highest Fock number kept on c2 and c3; nullopt = coherent + pairs.
  /// Smaller values drop amplitude and need lossy_cutoff.
  std::optional<int> detected_cutoff;
  /// Accept explicit cutoffs that lose amplitude (coherent tail above
  /// 1e-10, or detected modes too small to hold every photon).
  bool lossy_cutoff = false;
  double rep_rate = kDefaultRepRate;
  Source source = Source::kPdcMixture;
  Detection detection = Detection::kThreshold;

  void set_eta(double eta) { eta1.eta = eta2.eta = eta3.eta = eta; }
  double alpha_sq() const { return std::norm(alpha); }
};

void validate(const SchemeConfig& cfg);

/// Resolved cutoffs for one configuration.
struct Cutoffs {
  int coherent = 0;  // b3
  int pairs = 0;     // a1, a2, c1
  int detected = 0;  // c2, c3 (default coherent + pairs)
  int output = 0;    // b1 (= pairs + 1)
  int blocks = 0;    // largest photon-number block entering BS2
};
Cutoffs resolve_cutoffs(const SchemeConfig& cfg);

struct TargetQubit {
  Complex c0{1.0, 0.0};
  Complex c1{0.0, 0.0};

  /// c0 = 1, c1 = ratio.
  static TargetQubit from_ratio(double ratio) { return {Complex(1.0, 0.0), Complex(ratio, 0.0)}; }
  /// (c0|0> + c1|1>) / sqrt(|c0|^2 + |c1|^2) on a single mode.
  fock::FockVector state(std::string label, int cutoff) const;
};

struct TruncationResult {
  std::optional<fock::DensityMatrix> rho_out;  // single mode b1; empty on no-event
  double probability = 0.0;
  double rate = 0.0;
  std::optional<double> fidelity;

  bool no_event() const { return !rho_out.has_value(); }
};

/// Brute-force evaluation with full density matrices (test oracle).
TruncationResult run_dense(const SchemeConfig& cfg);

/// Fast evaluation over pure-state branches of the pair mixture and the
/// Fock-diagonal detector outcomes.
TruncationResult run_branches(const SchemeConfig& cfg);
/// Same, reusing precomputed beam splitter blocks; `bs` must cover
/// resolve_cutoffs(cfg).blocks photons and use the default 50:50 params.
TruncationResult run_branches(const SchemeConfig& cfg, const optics::BeamSplitterBlocks& bs);

/// Fidelity of r.rho_out to the target; throws on a no-event result.
double fidelity_to_qubit(const TruncationResult& r, const TargetQubit& t);

/// Fills r.fidelity when an event occurred.
TruncationResult with_fidelity(TruncationResult r, const TargetQubit& t);

/// (|0> + alpha|1>) / sqrt(1 + |alpha|^2): the output of the ideal scissors.
fock::FockVector ideal_truncated_state(Complex alpha);
double ideal_fidelity(Complex alpha, const TargetQubit& t);

}  // namespace qsd::pipeline
