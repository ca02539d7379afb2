#include "qsd/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace qsd::pipeline {

void validate(const SchemeConfig& cfg) {
  optics::validate(cfg.eta1);
  optics::validate(cfg.eta2);
  optics::validate(cfg.eta3);
  if (!(cfg.pdc.gamma_sq >= 0.0) || cfg.pdc.gamma_sq >= 1.0) throw Error("gamma_sq must lie in [0, 1)");
  if (cfg.pdc.pair_cutoff < 1) throw Error("pair_cutoff must be at least 1");
  if (!(cfg.rep_rate > 0.0) || !std::isfinite(cfg.rep_rate)) throw Error("rep_rate must be positive");
  if (!std::isfinite(cfg.alpha.real()) || !std::isfinite(cfg.alpha.imag()))
    throw Error("alpha must be finite");
  if (cfg.coherent_cutoff && *cfg.coherent_cutoff < 0) throw Error("coherent_cutoff must be non-negative");
  if (cfg.detected_cutoff) {
    if (*cfg.detected_cutoff < 0) throw Error("detected_cutoff must be non-negative");
    const auto cut = resolve_cutoffs(cfg);
    const int complete = cut.coherent + cut.pairs;
    if (!cfg.lossy_cutoff && *cfg.detected_cutoff < complete)
      throw Error("detected_cutoff " + std::to_string(*cfg.detected_cutoff) +
                  " drops amplitude; needs >= " + std::to_string(complete) + " or lossy_cutoff");
  }
}

Cutoffs resolve_cutoffs(const SchemeConfig& cfg) {
  Cutoffs c;
  c.pairs = cfg.source == Source::kSinglePair ? 1 : cfg.pdc.pair_cutoff;
  c.coherent = cfg.coherent_cutoff ? *cfg.coherent_cutoff : optics::coherent_cutoff_for(cfg.alpha_sq());
  c.detected = cfg.detected_cutoff.value_or(c.coherent + c.pairs);
  c.output = c.pairs + 1;
  c.blocks = std::max(c.detected, c.coherent + c.pairs);
  return c;
}

fock::FockVector TargetQubit::state(std::string label, int cutoff) const {
  const double n2 = std::norm(c0) + std::norm(c1);
  if (!(n2 > 0.0)) throw Error("target qubit has c0 = c1 = 0");
  if (cutoff < 1) throw Error("target qubit needs a mode cutoff of at least 1");
  CVector amps = CVector::Zero(cutoff + 1);
  amps[0] = c0 / std::sqrt(n2);
  amps[1] = c1 / std::sqrt(n2);
  return fock::FockVector(fock::single_mode(std::move(label), cutoff), std::move(amps));
}

namespace {

optics::TailPolicy tail_policy(const SchemeConfig& cfg) {
  return cfg.lossy_cutoff ? optics::TailPolicy::kLossy : optics::TailPolicy::kStrict;
}

// Pair-source branches: (photon pairs, weight).
std::vector<std::pair<int, double>> source_branches(const SchemeConfig& cfg) {
  if (cfg.source == Source::kSinglePair) return {{1, 1.0}};
  std::vector<std::pair<int, double>> out;
  double w = 1.0 - cfg.pdc.gamma_sq;
  for (int n = 0; n <= cfg.pdc.pair_cutoff; ++n) {
    out.emplace_back(n, w);
    w *= cfg.pdc.gamma_sq;
  }
  return out;
}

// Outcome weights for one detector as a function of photon number.
RVector herald_weights(const SchemeConfig& cfg, const optics::DetectorModel& d, int cutoff,
                       int resolved_count) {
  if (cfg.detection == Detection::kNumberResolving) {
    RVector w = RVector::Zero(cutoff + 1);
    if (resolved_count <= cutoff) w[resolved_count] = 1.0;
    return w;
  }
  return resolved_count == 0 ? optics::povm_no_click(d, cutoff) : optics::povm_click(d, cutoff);
}

TruncationResult finish(const SchemeConfig& cfg, fock::DensityMatrix unnormalized) {
  TruncationResult r;
  r.probability = clamp_probability(unnormalized.trace().real(), "success probability");
  r.rate = r.probability * cfg.rep_rate;
  if (r.probability < kNoEventThreshold) return r;
  CMatrix rho = unnormalized.elems() / r.probability;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  r.rho_out = fock::DensityMatrix(unnormalized.layout(), std::move(rho));
  return r;
}

}  // namespace

TruncationResult run_dense(const SchemeConfig& cfg) {
  validate(cfg);
  const Cutoffs cut = resolve_cutoffs(cfg);
  const int pc = cut.pairs;
  if (cut.detected < cut.coherent + pc) throw Error("run_dense needs detected_cutoff >= coherent + pairs");

  // rho(a1, c1) (x) |0><0|_a2 (x) |alpha><alpha|_b3
  fock::DensityMatrix source = [&] {
    if (cfg.source == Source::kSinglePair) {
      const int occ[] = {1, 1};
      return fock::DensityMatrix::pure(
          fock::FockVector::basis(fock::ModeLayout({{"a1", pc}, {"c1", pc}}), occ));
    }
    return optics::pdc_density(cfg.pdc, "a1", "c1");
  }();
  const int vac[] = {0};
  auto vacuum = fock::DensityMatrix::pure(fock::FockVector::basis(fock::single_mode("a2", pc), vac));
  auto coherent = fock::DensityMatrix::pure(
      optics::coherent_vector(cfg.alpha, cut.coherent, "b3", tail_policy(cfg)));
  fock::DensityMatrix rho = fock::tensor(fock::tensor(source, vacuum), coherent);

  const optics::BeamSplitterParams bs{};
  rho = fock::apply_unitary(rho, "a1", "a2", optics::beam_splitter_unitary(bs, pc, pc),
                            fock::UnitaryCheck{pc});
  rho = fock::relabel(fock::relabel(rho, "a1", "b1"), "a2", "b2");

  // D1 sees only the idler, which no later element touches: herald and
  // trace it out now to keep the remaining matrices small.
  rho = fock::apply_diagonal(rho, "c1", herald_weights(cfg, cfg.eta1, pc, 1));
  rho = fock::partial_trace(rho, std::array<std::string, 3>{"b1", "b2", "b3"});

  rho = fock::with_cutoff(rho, "b2", cut.detected);
  rho = fock::with_cutoff(rho, "b3", cut.detected);
  rho = fock::apply_unitary(rho, "b2", "b3",
                            optics::beam_splitter_unitary(bs, cut.detected, cut.detected),
                            fock::UnitaryCheck{cut.detected});
  rho = fock::relabel(fock::relabel(rho, "b2", "c2"), "b3", "c3");

  rho = fock::apply_diagonal(rho, "c2", herald_weights(cfg, cfg.eta2, cut.detected, 1));
  rho = fock::apply_diagonal(rho, "c3", herald_weights(cfg, cfg.eta3, cut.detected, 0));
  rho = fock::partial_trace(rho, std::array<std::string, 1>{"b1"});
  rho = fock::with_cutoff(rho, "b1", cut.output);
  return finish(cfg, std::move(rho));
}

TruncationResult run_branches(const SchemeConfig& cfg) {
  validate(cfg);
  const Cutoffs cut = resolve_cutoffs(cfg);
  return run_branches(cfg, optics::BeamSplitterBlocks(optics::BeamSplitterParams{}, cut.blocks));
}

TruncationResult run_branches(const SchemeConfig& cfg, const optics::BeamSplitterBlocks& bs) {
  validate(cfg);
  const Cutoffs cut = resolve_cutoffs(cfg);
  const int pc = cut.pairs;
  const int cd = cut.detected;
  if (bs.max_photons() < cut.blocks) throw Error("beam splitter blocks do not cover the detected modes");

  const CVector coh = optics::coherent_vector(cfg.alpha, cut.coherent, "b3", tail_policy(cfg)).amps();
  const RVector idler_w = herald_weights(cfg, cfg.eta1, pc, 1);
  const RVector click_w = herald_weights(cfg, cfg.eta2, cd, 1);
  const RVector dark_w = herald_weights(cfg, cfg.eta3, cd, 0);

  const Eigen::Index nout = cut.output + 1;
  CMatrix rho = CMatrix::Zero(nout, nout);
  std::vector<CMatrix> c_modes(static_cast<std::size_t>(pc + 1));  // per b1 occupation: amps on (c2, c3)

  for (const auto& [n, source_w] : source_branches(cfg)) {
    const double w = source_w * idler_w[n];
    if (w == 0.0) continue;

    // BS1 on |n, 0>: amplitude of |k, n-k> on (b1, b2).
    const CVector after_bs1 = bs.block(n).col(n);

    for (int k = 0; k <= n; ++k) {
      CMatrix in = CMatrix::Zero(n - k + 1, coh.size());
      in.row(n - k) = after_bs1[k] * coh.transpose();
      c_modes[static_cast<std::size_t>(k)] = bs.apply(in, cd + 1, cd + 1);
    }

    // rho(k, k') += w * sum_{m2, m3} W(m2, m3) T_k(m2, m3) conj(T_k'(m2, m3))
    for (int k = 0; k <= n; ++k) {
      for (int kp = 0; kp <= k; ++kp) {
        const CMatrix& tk = c_modes[static_cast<std::size_t>(k)];
        const CMatrix& tkp = c_modes[static_cast<std::size_t>(kp)];
        Complex acc = 0.0;
        for (int m3 = 0; m3 <= cd; ++m3) {
          if (dark_w[m3] == 0.0) continue;
          Complex col = 0.0;
          for (int m2 = 0; m2 <= cd; ++m2) col += click_w[m2] * tk(m2, m3) * std::conj(tkp(m2, m3));
          acc += dark_w[m3] * col;
        }
        rho(k, kp) += w * acc;
        if (kp != k) rho(kp, k) += w * std::conj(acc);
      }
    }
  }
  return finish(cfg, fock::DensityMatrix(fock::single_mode("b1", cut.output), std::move(rho)));
}

double fidelity_to_qubit(const TruncationResult& r, const TargetQubit& t) {
  if (r.no_event()) throw Error("no heralding event: output state undefined");
  const auto& layout = r.rho_out->layout();
  return fock::fidelity_pure(*r.rho_out, t.state(layout.mode(0).label, layout.mode(0).cutoff));
}

TruncationResult with_fidelity(TruncationResult r, const TargetQubit& t) {
  if (!r.no_event()) r.fidelity = fidelity_to_qubit(r, t);
  return r;
}

fock::FockVector ideal_truncated_state(Complex alpha) {
  const double n = std::sqrt(1.0 + std::norm(alpha));
  CVector amps(2);
  amps << Complex(1.0 / n, 0.0), alpha / n;
  return fock::FockVector(fock::single_mode("b1", 1), std::move(amps));
}

double ideal_fidelity(Complex alpha, const TargetQubit& t) {
  const auto target = t.state("b1", 1);
  const Complex overlap = target.amps().dot(ideal_truncated_state(alpha).amps());
  return clamp_probability(std::norm(overlap), "ideal fidelity");
}

}  // namespace qsd::pipeline
