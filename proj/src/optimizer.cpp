#include "qsd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

namespace qsd::optimizer {

namespace {

constexpr double kRefineTol = 1e-4;
constexpr double kTieTol = 1e-6;

pipeline::SchemeConfig config_at(const ScanSpec& spec, double alpha_sq) {
  pipeline::SchemeConfig cfg = spec.base;
  cfg.alpha = alpha_for(alpha_sq, spec.target);
  return cfg;
}

}  // namespace

void validate(const ScanSpec& spec) {
  if (!(spec.lo >= 0.0)) throw Error("alpha_sq range must start at a non-negative value");
  if (!(spec.lo < spec.hi)) throw Error("empty alpha_sq range");
  if (spec.grid_points < 2) throw Error("grid_points must be at least 2");
  if (!(std::norm(spec.target.c0) + std::norm(spec.target.c1) > 0.0))
    throw Error("target qubit has c0 = c1 = 0");
  pipeline::validate(spec.base);
}

Complex alpha_for(double alpha_sq, const pipeline::TargetQubit& t) {
  if (alpha_sq < 0.0) throw Error("alpha_sq must be non-negative");
  const double phase = std::abs(t.c1) > 0.0 ? std::arg(t.c1) : 0.0;
  return std::polar(std::sqrt(alpha_sq), phase);
}

optics::BeamSplitterBlocks blocks_for(const ScanSpec& spec) {
  const auto cut = pipeline::resolve_cutoffs(config_at(spec, spec.hi));
  return optics::BeamSplitterBlocks(optics::BeamSplitterParams{}, cut.blocks);
}

ScanPoint evaluate(const ScanSpec& spec, double alpha_sq, const optics::BeamSplitterBlocks& bs) {
  const auto r = pipeline::run_branches(config_at(spec, alpha_sq), bs);
  ScanPoint p;
  p.alpha_sq = alpha_sq;
  p.probability = r.probability;
  p.rate = r.rate;
  p.event = !r.no_event();
  p.fidelity = p.event ? pipeline::fidelity_to_qubit(r, spec.target)
                       : std::numeric_limits<double>::quiet_NaN();
  return p;
}

ScanPoint evaluate(const ScanSpec& spec, double alpha_sq) {
  ScanSpec one = spec;
  one.lo = 0.0;
  one.hi = std::max(alpha_sq, 1e-12);
  return evaluate(spec, alpha_sq, blocks_for(one));
}

std::vector<double> grid(const ScanSpec& spec) {
  std::vector<double> g(static_cast<std::size_t>(spec.grid_points));
  const double step = (spec.hi - spec.lo) / (spec.grid_points - 1);
  for (int i = 0; i < spec.grid_points; ++i) g[static_cast<std::size_t>(i)] = spec.lo + i * step;
  g.back() = spec.hi;
  return g;
}

std::vector<ScanPoint> scan_serial(const ScanSpec& spec) {
  validate(spec);
  const auto xs = grid(spec);
  const auto bs = blocks_for(spec);
  std::vector<ScanPoint> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(evaluate(spec, x, bs));
  return out;
}

std::vector<ScanPoint> scan(const ScanSpec& spec) {
  validate(spec);
  const auto xs = grid(spec);
  const auto bs = blocks_for(spec);
  std::vector<ScanPoint> out(xs.size());
  std::exception_ptr failure;
  const auto n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = evaluate(spec, xs[static_cast<std::size_t>(i)], bs);
    } catch (...) {
#pragma omp critical(qsd_scan_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double objective_value(const ScanPoint& p, Objective o) {
  if (o == Objective::kRate) return p.event ? p.rate : 0.0;
  return p.event ? p.fidelity : -std::numeric_limits<double>::infinity();
}

double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

std::vector<OptimumPoint> maximize(const ScanSpec& spec) {
  validate(spec);
  const auto pts = scan(spec);
  const auto bs = blocks_for(spec);
  const auto n = pts.size();

  if (std::none_of(pts.begin(), pts.end(), [](const ScanPoint& p) { return p.event; }))
    throw Error("no heralding event anywhere on the alpha_sq range");

  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = objective_value(pts[i], spec.objective);

  auto objective_at = [&](double x) { return objective_value(evaluate(spec, x, bs), spec.objective); };

  std::vector<ScanPoint> found;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(f[i])) continue;
    const bool rises = i == 0 || f[i] > f[i - 1];
    const bool falls = i + 1 == n || f[i] >= f[i + 1];
    if (!rises || !falls) continue;

    const double a = pts[i == 0 ? 0 : i - 1].alpha_sq;
    const double b = pts[i + 1 == n ? n - 1 : i + 1].alpha_sq;
    const double x = golden_section_max(objective_at, a, b, kRefineTol);
    ScanPoint refined = evaluate(spec, x, bs);
    if (!(objective_value(refined, spec.objective) > f[i])) refined = pts[i];
    found.push_back(refined);
  }

  // Neighbouring brackets can refine onto the same peak.
  std::sort(found.begin(), found.end(),
            [](const ScanPoint& l, const ScanPoint& r) { return l.alpha_sq < r.alpha_sq; });
  std::vector<ScanPoint> unique;
  for (const auto& p : found) {
    if (!unique.empty() && std::abs(p.alpha_sq - unique.back().alpha_sq) <= 2 * kRefineTol) {
      if (objective_value(p, spec.objective) > objective_value(unique.back(), spec.objective))
        unique.back() = p;
      continue;
    }
    unique.push_back(p);
  }

  std::stable_sort(unique.begin(), unique.end(), [&](const ScanPoint& l, const ScanPoint& r) {
    return objective_value(l, spec.objective) > objective_value(r, spec.objective);
  });
  // Near-ties: prefer the higher preparation rate.
  for (std::size_t i = 0; i + 1 < unique.size(); ++i) {
    const double gap = objective_value(unique[i], spec.objective) -
                       objective_value(unique[i + 1], spec.objective);
    if (gap <= kTieTol && unique[i + 1].rate > unique[i].rate) std::swap(unique[i], unique[i + 1]);
  }

  std::vector<OptimumPoint> out;
  for (const auto& p : unique) {
    OptimumPoint o{p.alpha_sq, p.fidelity, p.probability, p.rate, false};
    o.at_boundary = p.alpha_sq - spec.lo <= kRefineTol || spec.hi - p.alpha_sq <= kRefineTol;
    out.push_back(o);
  }
  return out;
}

std::vector<CurveRow> optimum_curve(const std::vector<double>& ratios, double eta, const ScanSpec& base) {
  std::vector<CurveRow> rows;
  for (double ratio : ratios) {
    if (!(ratio >= 0.0)) throw Error("ratio |c1/c0| must be non-negative");
    ScanSpec spec = base;
    spec.objective = Objective::kFidelity;
    spec.target = pipeline::TargetQubit::from_ratio(ratio);
    spec.base.set_eta(eta);
    rows.push_back({ratio, maximize(spec)});
  }
  return rows;
}

std::vector<CompareRow> compare_ideal(const std::vector<double>& ratios, double eta, double lo,
                                      double hi, int grid_points, const pipeline::SchemeConfig& base) {
  std::vector<CompareRow> rows;
  for (double ratio : ratios) {
    if (!(ratio >= 0.0)) throw Error("ratio |c1/c0| must be non-negative");
    ScanSpec spec;
    spec.lo = lo;
    spec.hi = hi;
    spec.grid_points = grid_points;
    spec.target = pipeline::TargetQubit::from_ratio(ratio);
    spec.base = base;
    spec.base.set_eta(eta);
    for (const auto& p : scan(spec)) {
      const double fi = pipeline::ideal_fidelity(alpha_for(p.alpha_sq, spec.target), spec.target);
      rows.push_back({ratio, p.alpha_sq, p.fidelity, fi});
    }
  }
  return rows;
}

std::optional<double> ideal_crossover(double ratio, double eta, double lo, double hi, int grid_points,
                                      const pipeline::SchemeConfig& base) {
  const auto rows = compare_ideal({ratio}, eta, lo, hi, grid_points, base);
  ScanSpec spec;
  spec.lo = lo;
  spec.hi = hi;
  spec.target = pipeline::TargetQubit::from_ratio(ratio);
  spec.base = base;
  spec.base.set_eta(eta);
  const auto bs = blocks_for(spec);
  auto gap = [&](double x) {
    const auto p = evaluate(spec, x, bs);
    return p.fidelity - pipeline::ideal_fidelity(alpha_for(x, spec.target), spec.target);
  };
  constexpr double kStrictlyAbove = 1e-12;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double g0 = rows[i].f_experimental - rows[i].f_ideal;
    const double g1 = rows[i + 1].f_experimental - rows[i + 1].f_ideal;
    if (!(g0 <= kStrictlyAbove && g1 > kStrictlyAbove)) continue;
    double a = rows[i].alpha_sq;
    double b = rows[i + 1].alpha_sq;
    while (b - a > 1e-7) {
      const double m = 0.5 * (a + b);
      (gap(m) > kStrictlyAbove ? b : a) = m;
    }
    return 0.5 * (a + b);
  }
  return std::nullopt;
}

double calibrate_rep_rate(const pipeline::SchemeConfig& anchor, double published_rate) {
  if (!(published_rate > 0.0)) throw Error("published rate must be positive");
  const auto r = pipeline::run_branches(anchor);
  if (r.no_event()) throw Error("anchor configuration has zero success probability");
  return published_rate / r.probability;
}

}  // namespace qsd::optimizer
