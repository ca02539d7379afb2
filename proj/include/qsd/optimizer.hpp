#pragma once

// One-dimensional optimization of the coherent intensity |alpha|^2.
//
// `scan` evaluates a uniform grid in parallel (OpenMP, one task per grid
// point); `scan_serial` is the single-threaded reference and must produce
// bit-identical output. `maximize` brackets every local maximum of the grid
// and refines it with golden-section search.

#include <functional>
#include <optional>
#include <vector>

#include "qsd/pipeline.hpp"

namespace qsd::optimizer {

enum class Objective { kFidelity, kRate };

struct ScanSpec {
  double lo = 0.0;
  double hi = 16.0;
  int grid_points = 161;
  Objective objective = Objective::kFidelity;
  pipeline::TargetQubit target{};
  /// alpha is ignored; it is set from each grid value with arg(alpha) = arg(c1).
  pipeline::SchemeConfig base{};
};

void validate(const ScanSpec& spec);

struct ScanPoint {
  double alpha_sq = 0.0;
  double fidelity = 0.0;  // NaN when no event
  double probability = 0.0;
  double rate = 0.0;
  bool event = false;
};

struct OptimumPoint {
  double alpha_sq = 0.0;
  double fidelity = 0.0;
  double probability = 0.0;
  double rate = 0.0;
  bool at_boundary = false;
};

/// Coherent amplitude sqrt(alpha_sq) with the phase of the target's c1.
Complex alpha_for(double alpha_sq, const pipeline::TargetQubit& t);

/// Single evaluation at one intensity.
ScanPoint evaluate(const ScanSpec& spec, double alpha_sq);
ScanPoint evaluate(const ScanSpec& spec, double alpha_sq, const optics::BeamSplitterBlocks& bs);

/// Beam splitter blocks large enough for every intensity in [spec.lo, spec.hi].
optics::BeamSplitterBlocks blocks_for(const ScanSpec& spec);

std::vector<double> grid(const ScanSpec& spec);
std::vector<ScanPoint> scan(const ScanSpec& spec);
std::vector<ScanPoint> scan_serial(const ScanSpec& spec);

/// Objective value of a scan point; no-event points give -inf for
/// fidelity and 0 for rate.
double objective_value(const ScanPoint& p, Objective o);

/// Golden-section search for a maximum of f on [a, b] to |b - a| <= tol.
double golden_section_max(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-4);

/// Every local maximum of the objective on the range, best first.
std::vector<OptimumPoint> maximize(const ScanSpec& spec);

struct CurveRow {
  double ratio = 0.0;
  std::vector<OptimumPoint> optima;  // global optimum first
};

/// Fidelity-optimal intensities for each ratio |c1/c0| at a shared eta.
std::vector<CurveRow> optimum_curve(const std::vector<double>& ratios, double eta,
                                    const ScanSpec& base = {});

struct CompareRow {
  double ratio = 0.0;
  double alpha_sq = 0.0;
  double f_experimental = 0.0;  // NaN when no event
  double f_ideal = 0.0;
};

/// Experimental vs ideal-scissors fidelity on a grid (default [0, 4]).
std::vector<CompareRow> compare_ideal(const std::vector<double>& ratios, double eta,
                                      double lo = 0.0, double hi = 4.0, int grid_points = 201,
                                      const pipeline::SchemeConfig& base = {});

/// First intensity where the experimental fidelity rises above the ideal
/// one, refined by bisection; nullopt if it never does on [lo, hi].
std::optional<double> ideal_crossover(double ratio, double eta, double lo = 0.0, double hi = 4.0,
                                      int grid_points = 201,
                                      const pipeline::SchemeConfig& base = {});

/// rep_rate such that anchor's success probability maps to published_rate.
double calibrate_rep_rate(const pipeline::SchemeConfig& anchor, double published_rate);

}  // namespace qsd::optimizer
