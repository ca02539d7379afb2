#include "qsd/optics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace qsd::optics {

double coherent_tail(double mean_photons, int cutoff) {
  if (mean_photons < 0.0) throw Error("mean photon number must be non-negative");
  if (mean_photons == 0.0) return 0.0;
  const double log_mean = std::log(mean_photons);
  double tail = 0.0;
  for (int n = cutoff + 1;; ++n) {
    const double term = std::exp(-mean_photons + n * log_mean - std::lgamma(n + 1.0));
    tail += term;
    if (n > mean_photons && term < 1e-18 * tail) break;
    if (term == 0.0 && n > mean_photons) break;
  }
  return tail;
}

int coherent_cutoff_for(double mean_photons, double tol) {
  int cutoff = 0;
  while (coherent_tail(mean_photons, cutoff) > tol) ++cutoff;
  return cutoff;
}

fock::FockVector coherent_vector(Complex alpha, int cutoff, std::string label, TailPolicy policy) {
  if (cutoff < 0) throw Error("coherent cutoff must be non-negative");
  const double mean = std::norm(alpha);
  if (policy == TailPolicy::kStrict && coherent_tail(mean, cutoff) > kCoherentTailTolerance) {
    throw Error("coherent state with |alpha|^2 = " + std::to_string(mean) + " needs cutoff >= " +
                std::to_string(coherent_cutoff_for(mean)) + " (got " + std::to_string(cutoff) + ")");
  }
  CVector amps = CVector::Zero(cutoff + 1);
  if (mean == 0.0) {
    amps[0] = 1.0;
  } else {
    const double r = std::abs(alpha);
    const double phase = std::arg(alpha);
    for (int n = 0; n <= cutoff; ++n) {
      const double mag = std::exp(-0.5 * mean + n * std::log(r) - 0.5 * std::lgamma(n + 1.0));
      amps[n] = std::polar(mag, n * phase);
    }
  }
  return fock::FockVector(fock::single_mode(std::move(label), cutoff), std::move(amps));
}

fock::DensityMatrix pdc_density(const PdcParams& p, std::string signal, std::string idler) {
  if (!(p.gamma_sq >= 0.0) || p.gamma_sq >= 1.0) throw Error("gamma_sq must lie in [0, 1)");
  if (p.pair_cutoff < 1) throw Error("pair_cutoff must be at least 1");
  fock::ModeLayout layout({{std::move(signal), p.pair_cutoff}, {std::move(idler), p.pair_cutoff}});
  CMatrix rho = CMatrix::Zero(static_cast<Eigen::Index>(layout.dim()),
                              static_cast<Eigen::Index>(layout.dim()));
  double weight = 1.0 - p.gamma_sq;
  for (int n = 0; n <= p.pair_cutoff; ++n) {
    const int occ[] = {n, n};
    const auto i = static_cast<Eigen::Index>(layout.index(occ));
    rho(i, i) = weight;
    weight *= p.gamma_sq;
  }
  return fock::DensityMatrix(std::move(layout), std::move(rho));
}

CMatrix beam_splitter_block(const BeamSplitterParams& p, int n) {
  if (n < 0) throw Error("photon number must be non-negative");
  const Eigen::Index d = n + 1;
  // L2 = (a1^dag a2 - a2^dag a1) / 2i on |k, n-k>.
  CMatrix l2 = CMatrix::Zero(d, d);
  for (int k = 0; k < n; ++k) {
    const double m = std::sqrt(static_cast<double>(k + 1) * (n - k));
    l2(k + 1, k) = Complex(0.0, -0.5 * m);  // a1^dag a2 / 2i
    l2(k, k + 1) = Complex(0.0, 0.5 * m);   // -a2^dag a1 / 2i
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(l2);
  CVector rot_phase(d);
  for (Eigen::Index j = 0; j < d; ++j)
    rot_phase[j] = std::polar(1.0, -2.0 * p.theta * es.eigenvalues()[j]);
  CMatrix rotation = es.eigenvectors() * rot_phase.asDiagonal() * es.eigenvectors().adjoint();

  // L3 = (a1^dag a1 - a2^dag a2) / 2 is diagonal.
  CVector left(d), right(d);
  for (int k = 0; k <= n; ++k) {
    const double l3 = 0.5 * (2 * k - n);
    left[k] = std::polar(1.0, -(p.psi_t - p.psi_r) * l3);
    right[k] = std::polar(1.0, -(p.psi_t + p.psi_r) * l3);
  }
  CMatrix u = left.asDiagonal() * rotation * right.asDiagonal();
  return u.adjoint();
}

BeamSplitterBlocks::BeamSplitterBlocks(const BeamSplitterParams& p, int max_photons) : params_(p) {
  if (max_photons < 0) throw Error("max_photons must be non-negative");
  blocks_.reserve(static_cast<std::size_t>(max_photons + 1));
  for (int n = 0; n <= max_photons; ++n) blocks_.push_back(beam_splitter_block(p, n));
}

CMatrix BeamSplitterBlocks::apply(const CMatrix& in, int out_rows, int out_cols) const {
  CMatrix out = CMatrix::Zero(out_rows, out_cols);
  const int r1 = static_cast<int>(in.rows());
  const int r2 = static_cast<int>(in.cols());
  std::vector<Complex> x;
  for (int n = 0; n <= (r1 - 1) + (r2 - 1); ++n) {
    const int k_lo = std::max(0, n - (r2 - 1));
    const int k_hi = std::min(n, r1 - 1);
    x.assign(static_cast<std::size_t>(n + 1), Complex(0.0, 0.0));
    bool any = false;
    for (int k = k_lo; k <= k_hi; ++k) {
      x[static_cast<std::size_t>(k)] = in(k, n - k);
      any = any || x[static_cast<std::size_t>(k)] != Complex(0.0, 0.0);
    }
    if (!any) continue;
    if (n > max_photons())
      throw Error("input populates photon-number block " + std::to_string(n) +
                  " beyond the prepared beam splitter blocks");
    const CMatrix& b = blocks_[static_cast<std::size_t>(n)];
    const int o_lo = std::max(0, n - (out_cols - 1));
    const int o_hi = std::min(n, out_rows - 1);
    for (int ko = o_lo; ko <= o_hi; ++ko) {
      Complex acc = 0.0;
      for (int k = k_lo; k <= k_hi; ++k) acc += b(ko, k) * x[static_cast<std::size_t>(k)];
      out(ko, n - ko) = acc;
    }
  }
  return out;
}

CMatrix beam_splitter_unitary(const BeamSplitterParams& p, int cutoff1, int cutoff2) {
  if (cutoff1 < 0 || cutoff2 < 0) throw Error("cutoffs must be non-negative");
  const Eigen::Index d = static_cast<Eigen::Index>(cutoff1 + 1) * (cutoff2 + 1);
  CMatrix u = CMatrix::Zero(d, d);
  for (int n = 0; n <= cutoff1 + cutoff2; ++n) {
    const CMatrix b = beam_splitter_block(p, n);
    const int k_lo = std::max(0, n - cutoff2);
    const int k_hi = std::min(n, cutoff1);
    for (int ko = k_lo; ko <= k_hi; ++ko)
      for (int ki = k_lo; ki <= k_hi; ++ki)
        u(ko * (cutoff2 + 1) + (n - ko), ki * (cutoff2 + 1) + (n - ki)) = b(ko, ki);
  }
  return u;
}

void validate(const DetectorModel& d) {
  if (!(d.eta >= 0.0 && d.eta <= 1.0))
    throw Error("detector efficiency eta = " + std::to_string(d.eta) + " outside [0, 1]");
}

RVector povm_no_click(const DetectorModel& d, int cutoff) {
  validate(d);
  if (cutoff < 0) throw Error("cutoff must be non-negative");
  RVector diag(cutoff + 1);
  for (int m = 0; m <= cutoff; ++m) diag[m] = std::pow(1.0 - d.eta, m);
  return diag;
}

RVector povm_click(const DetectorModel& d, int cutoff) {
  RVector no_click = povm_no_click(d, cutoff);
  return RVector::Ones(no_click.size()) - no_click;
}

}  // namespace qsd::optics
