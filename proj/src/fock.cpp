#include "qsd/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace qsd {

double clamp_probability(double p, std::string_view what) {
  if (!std::isfinite(p) || p < -kProbabilitySlack || p > 1.0 + kProbabilitySlack) {
    std::ostringstream msg;
    msg << std::string(what) << " = " << p << " lies outside [0, 1]";
    throw Error(msg.str());
  }
  return std::clamp(p, 0.0, 1.0);
}

namespace fock {

ModeLayout::ModeLayout(std::vector<Mode> modes) : modes_(std::move(modes)) {
  std::set<std::string_view> seen;
  for (const auto& m : modes_) {
    if (m.cutoff < 0) throw Error("mode '" + m.label + "' has negative cutoff");
    if (!seen.insert(m.label).second) throw Error("duplicate mode label '" + m.label + "'");
  }
  strides_.assign(modes_.size(), 1);
  dim_ = 1;
  for (std::size_t i = modes_.size(); i-- > 0;) {
    strides_[i] = dim_;
    dim_ *= static_cast<std::size_t>(modes_[i].cutoff + 1);
  }
}

std::optional<std::size_t> ModeLayout::find(std::string_view label) const {
  for (std::size_t i = 0; i < modes_.size(); ++i)
    if (modes_[i].label == label) return i;
  return std::nullopt;
}

std::size_t ModeLayout::position(std::string_view label) const {
  if (auto p = find(label)) return *p;
  throw Error("unknown mode label '" + std::string(label) + "'");
}

std::size_t ModeLayout::index(std::span<const int> occupation) const {
  if (occupation.size() != modes_.size()) throw Error("occupation length does not match layout");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    if (occupation[i] < 0 || occupation[i] > modes_[i].cutoff)
      throw Error("occupation " + std::to_string(occupation[i]) + " out of range for mode '" +
                  modes_[i].label + "'");
    idx += static_cast<std::size_t>(occupation[i]) * strides_[i];
  }
  return idx;
}

std::vector<int> ModeLayout::occupation(std::size_t index) const {
  if (index >= dim_) throw Error("basis index out of range");
  std::vector<int> occ(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) occ[i] = occupation_of(index, i);
  return occ;
}

ModeLayout ModeLayout::without(std::string_view label) const {
  auto pos = position(label);
  std::vector<Mode> rest;
  for (std::size_t i = 0; i < modes_.size(); ++i)
    if (i != pos) rest.push_back(modes_[i]);
  return ModeLayout(std::move(rest));
}

ModeLayout ModeLayout::concat(const ModeLayout& other) const {
  std::vector<Mode> all = modes_;
  all.insert(all.end(), other.modes_.begin(), other.modes_.end());
  return ModeLayout(std::move(all));
}

ModeLayout ModeLayout::relabeled(std::string_view from, std::string_view to) const {
  auto all = modes_;
  all[position(from)].label = std::string(to);
  return ModeLayout(std::move(all));
}

ModeLayout ModeLayout::with_cutoff(std::string_view label, int cutoff) const {
  auto all = modes_;
  all[position(label)].cutoff = cutoff;
  return ModeLayout(std::move(all));
}

ModeLayout single_mode(std::string label, int cutoff) {
  return ModeLayout({Mode{std::move(label), cutoff}});
}

// ---------------------------------------------------------------------------

FockVector::FockVector(ModeLayout layout, CVector amps)
    : layout_(std::move(layout)), amps_(std::move(amps)) {
  if (static_cast<std::size_t>(amps_.size()) != layout_.dim())
    throw Error("amplitude array length does not match layout dimension");
}

FockVector FockVector::basis(ModeLayout layout, std::span<const int> occupation) {
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(layout.dim()));
  amps[static_cast<Eigen::Index>(layout.index(occupation))] = 1.0;
  return FockVector(std::move(layout), std::move(amps));
}

DensityMatrix::DensityMatrix(ModeLayout layout, CMatrix elems)
    : layout_(std::move(layout)), elems_(std::move(elems)) {
  const auto d = static_cast<Eigen::Index>(layout_.dim());
  if (elems_.rows() != d || elems_.cols() != d)
    throw Error("density matrix size does not match layout dimension");
}

DensityMatrix DensityMatrix::pure(const FockVector& v) {
  return DensityMatrix(v.layout(), v.amps() * v.amps().adjoint());
}

double DensityMatrix::hermiticity_defect() const {
  if (elems_.size() == 0) return 0.0;
  return (elems_ - elems_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  CMatrix h = 0.5 * (elems_ + elems_.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void validate(const DensityMatrix& rho) {
  if (rho.hermiticity_defect() > 1e-10) throw Error("density matrix is not Hermitian");
  if (rho.min_eigenvalue() < -1e-9) throw Error("density matrix is not positive semidefinite");
  const double tr = rho.trace().real();
  if (tr < -1e-9 || tr > 1.0 + 1e-9) throw Error("density matrix trace outside [0, 1]");
}

// ---------------------------------------------------------------------------

namespace {

void require_disjoint(const ModeLayout& a, const ModeLayout& b) {
  for (const auto& m : b.modes())
    if (a.find(m.label)) throw Error("duplicate mode label '" + m.label + "' in tensor product");
}

// Offsets of every basis element of the modes at `positions` (in the given
// order), expressed as indices into `layout`, with all other modes at 0.
std::vector<std::size_t> sub_offsets(const ModeLayout& layout,
                                     const std::vector<std::size_t>& positions) {
  std::vector<std::size_t> offs{0};
  for (auto pos : positions) {
    std::vector<std::size_t> next;
    next.reserve(offs.size() * static_cast<std::size_t>(layout.mode(pos).cutoff + 1));
    for (auto o : offs)
      for (int n = 0; n <= layout.mode(pos).cutoff; ++n)
        next.push_back(o + static_cast<std::size_t>(n) * layout.stride(pos));
    offs = std::move(next);
  }
  return offs;
}

struct PairGeometry {
  std::vector<std::size_t> pair_offsets;  // pair index -> full-index offset
  std::vector<std::size_t> bases;         // full indices with n_a = n_b = 0
  std::vector<int> photons;               // pair index -> n_a + n_b
};

PairGeometry pair_geometry(const ModeLayout& layout, std::size_t pa, std::size_t pb) {
  if (pa == pb) throw Error("two-mode operator needs two distinct modes");
  PairGeometry g;
  g.pair_offsets = sub_offsets(layout, {pa, pb});
  const int cb = layout.mode(pb).cutoff;
  for (std::size_t p = 0; p < g.pair_offsets.size(); ++p)
    g.photons.push_back(static_cast<int>(p) / (cb + 1) + static_cast<int>(p) % (cb + 1));
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < layout.num_modes(); ++i)
    if (i != pa && i != pb) rest.push_back(i);
  g.bases = sub_offsets(layout, rest);
  return g;
}

struct SparseRows {
  std::vector<std::vector<std::pair<std::size_t, Complex>>> rows;
};

SparseRows sparse_rows(const CMatrix& u) {
  SparseRows s;
  s.rows.resize(static_cast<std::size_t>(u.rows()));
  for (Eigen::Index r = 0; r < u.rows(); ++r)
    for (Eigen::Index c = 0; c < u.cols(); ++c)
      if (u(r, c) != Complex(0.0, 0.0))
        s.rows[static_cast<std::size_t>(r)].emplace_back(static_cast<std::size_t>(c), u(r, c));
  return s;
}

void check_unitary(const CMatrix& u, const PairGeometry& g, const UnitaryCheck& check) {
  const auto pd = static_cast<Eigen::Index>(g.pair_offsets.size());
  if (u.rows() != pd || u.cols() != pd)
    throw Error("two-mode operator has size " + std::to_string(u.rows()) + "x" +
                std::to_string(u.cols()) + ", expected " + std::to_string(pd));
  std::vector<Eigen::Index> sub;
  for (Eigen::Index p = 0; p < pd; ++p)
    if (!check.max_photons || g.photons[static_cast<std::size_t>(p)] <= *check.max_photons)
      sub.push_back(p);
  CMatrix cols(pd, static_cast<Eigen::Index>(sub.size()));
  for (std::size_t k = 0; k < sub.size(); ++k) cols.col(static_cast<Eigen::Index>(k)) = u.col(sub[k]);
  CMatrix gram = cols.adjoint() * cols;
  gram -= CMatrix::Identity(gram.rows(), gram.cols());
  if (gram.size() > 0 && gram.cwiseAbs().maxCoeff() > 1e-9)
    throw Error("two-mode operator is not unitary");
}

// Applies u to every column of `m` in place (columns are full-space vectors).
void apply_pair_to_columns(CMatrix& m, const PairGeometry& g, const SparseRows& s) {
  const auto ncols = m.cols();
  const std::size_t pd = g.pair_offsets.size();
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < ncols; ++j) {
    std::vector<Complex> in(pd), out(pd);
    for (auto base : g.bases) {
      for (std::size_t p = 0; p < pd; ++p)
        in[p] = m(static_cast<Eigen::Index>(base + g.pair_offsets[p]), j);
      for (std::size_t p = 0; p < pd; ++p) {
        Complex acc = 0.0;
        for (const auto& [c, val] : s.rows[p]) acc += val * in[c];
        out[p] = acc;
      }
      for (std::size_t p = 0; p < pd; ++p)
        m(static_cast<Eigen::Index>(base + g.pair_offsets[p]), j) = out[p];
    }
  }
}

double weight_above(const PairGeometry& g, const RVector& populations, int max_photons) {
  double w = 0.0;
  for (auto base : g.bases)
    for (std::size_t p = 0; p < g.pair_offsets.size(); ++p)
      if (g.photons[p] > max_photons)
        w += populations[static_cast<Eigen::Index>(base + g.pair_offsets[p])];
  return w;
}

}  // namespace

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  require_disjoint(a.layout(), b.layout());
  const auto& ea = a.elems();
  const auto& eb = b.elems();
  CMatrix out(ea.rows() * eb.rows(), ea.cols() * eb.cols());
  for (Eigen::Index i = 0; i < ea.rows(); ++i)
    for (Eigen::Index j = 0; j < ea.cols(); ++j)
      out.block(i * eb.rows(), j * eb.cols(), eb.rows(), eb.cols()) = ea(i, j) * eb;
  return DensityMatrix(a.layout().concat(b.layout()), std::move(out));
}

FockVector tensor(const FockVector& a, const FockVector& b) {
  require_disjoint(a.layout(), b.layout());
  const auto nb = b.amps().size();
  CVector out(a.amps().size() * nb);
  for (Eigen::Index i = 0; i < a.amps().size(); ++i) out.segment(i * nb, nb) = a.amps()[i] * b.amps();
  return FockVector(a.layout().concat(b.layout()), std::move(out));
}

DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const std::string> keep) {
  const auto& layout = rho.layout();
  std::vector<bool> kept(layout.num_modes(), false);
  for (const auto& label : keep) kept[layout.position(label)] = true;

  std::vector<std::size_t> keep_pos, trace_pos;
  std::vector<Mode> kept_modes;
  for (std::size_t i = 0; i < layout.num_modes(); ++i) {
    if (kept[i]) {
      keep_pos.push_back(i);
      kept_modes.push_back(layout.mode(i));
    } else {
      trace_pos.push_back(i);
    }
  }
  const auto koff = sub_offsets(layout, keep_pos);
  const auto toff = sub_offsets(layout, trace_pos);
  const auto nk = static_cast<Eigen::Index>(koff.size());
  CMatrix out = CMatrix::Zero(nk, nk);
  const auto& e = rho.elems();
  for (Eigen::Index r = 0; r < nk; ++r)
    for (Eigen::Index c = 0; c < nk; ++c) {
      Complex acc = 0.0;
      for (auto t : toff)
        acc += e(static_cast<Eigen::Index>(koff[static_cast<std::size_t>(r)] + t),
                 static_cast<Eigen::Index>(koff[static_cast<std::size_t>(c)] + t));
      out(r, c) = acc;
    }
  return DensityMatrix(ModeLayout(std::move(kept_modes)), std::move(out));
}

FockVector project_mode(const FockVector& v, std::string_view mode, int n) {
  const auto& layout = v.layout();
  const auto pos = layout.position(mode);
  if (n < 0 || n > layout.mode(pos).cutoff)
    throw Error("projection onto |" + std::to_string(n) + "> outside cutoff of mode '" +
                std::string(mode) + "'");
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < layout.num_modes(); ++i)
    if (i != pos) rest.push_back(i);
  const auto roff = sub_offsets(layout, rest);
  CVector out(static_cast<Eigen::Index>(roff.size()));
  const std::size_t shift = static_cast<std::size_t>(n) * layout.stride(pos);
  for (std::size_t r = 0; r < roff.size(); ++r)
    out[static_cast<Eigen::Index>(r)] = v.amps()[static_cast<Eigen::Index>(roff[r] + shift)];
  return FockVector(layout.without(mode), std::move(out));
}

double fidelity_pure(const DensityMatrix& rho, const FockVector& psi) {
  if (!(rho.layout() == psi.layout())) throw Error("fidelity: layout mismatch");
  if (std::abs(psi.norm_sq() - 1.0) > 1e-9) throw Error("fidelity: target state is not normalized");
  if (std::abs(rho.trace().real() - 1.0) > 1e-9) throw Error("fidelity: density matrix is not normalized");
  const Complex f = psi.amps().dot(rho.elems() * psi.amps());  // dot() conjugates the left side
  if (std::abs(f.imag()) > 1e-10) throw Error("fidelity: non-negligible imaginary part");
  return clamp_probability(f.real(), "fidelity");
}

FockVector apply_unitary(const FockVector& v, std::string_view mode_a, std::string_view mode_b,
                         const CMatrix& u, UnitaryCheck check) {
  const auto& layout = v.layout();
  const auto g = pair_geometry(layout, layout.position(mode_a), layout.position(mode_b));
  check_unitary(u, g, check);
  if (check.max_photons &&
      weight_above(g, v.amps().cwiseAbs2(), *check.max_photons) > 1e-20)
    throw Error("state has amplitude in photon-number blocks the operator does not cover");
  CMatrix m = v.amps();
  apply_pair_to_columns(m, g, sparse_rows(u));
  return FockVector(layout, m.col(0));
}

DensityMatrix apply_unitary(const DensityMatrix& rho, std::string_view mode_a,
                            std::string_view mode_b, const CMatrix& u, UnitaryCheck check) {
  const auto& layout = rho.layout();
  const auto g = pair_geometry(layout, layout.position(mode_a), layout.position(mode_b));
  check_unitary(u, g, check);
  if (check.max_photons &&
      weight_above(g, rho.elems().diagonal().real().cwiseAbs(), *check.max_photons) > 1e-20)
    throw Error("state has weight in photon-number blocks the operator does not cover");
  const auto rows = sparse_rows(u);
  CMatrix m = rho.elems();
  apply_pair_to_columns(m, g, rows);  // u rho
  m.adjointInPlace();
  apply_pair_to_columns(m, g, rows);  // u (u rho)^dagger = u rho^dagger u^dagger
  m.adjointInPlace();                 // (u rho^dagger u^dagger)^dagger = u rho u^dagger
  return DensityMatrix(layout, std::move(m));
}

DensityMatrix apply_diagonal(const DensityMatrix& rho, std::string_view mode, const RVector& diag) {
  const auto& layout = rho.layout();
  const auto pos = layout.position(mode);
  if (diag.size() != layout.mode(pos).cutoff + 1) throw Error("diagonal operator size mismatch");
  if (diag.size() > 0 && diag.minCoeff() < 0.0) throw Error("diagonal operator has negative entries");
  const auto d = static_cast<Eigen::Index>(layout.dim());
  RVector scale(d);
  for (Eigen::Index i = 0; i < d; ++i)
    scale[i] = std::sqrt(diag[layout.occupation_of(static_cast<std::size_t>(i), pos)]);
  CMatrix out = scale.asDiagonal() * rho.elems() * scale.asDiagonal();
  return DensityMatrix(layout, std::move(out));
}

namespace {

// For each index of `to`, the matching index of `from` (or npos when the
// occupation of `mode` does not fit in `from`).
std::vector<std::size_t> cutoff_map(const ModeLayout& from, const ModeLayout& to, std::size_t pos) {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> map(to.dim(), npos);
  const int old_cut = from.mode(pos).cutoff;
  for (std::size_t i = 0; i < to.dim(); ++i) {
    auto occ = to.occupation(i);
    if (occ[pos] <= old_cut) map[i] = from.index(occ);
  }
  return map;
}

}  // namespace

DensityMatrix with_cutoff(const DensityMatrix& rho, std::string_view mode, int cutoff) {
  const auto& from = rho.layout();
  const auto pos = from.position(mode);
  ModeLayout to = from.with_cutoff(mode, cutoff);
  const auto map = cutoff_map(from, to, pos);
  const auto d = static_cast<Eigen::Index>(to.dim());
  CMatrix out = CMatrix::Zero(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const auto fr = map[static_cast<std::size_t>(r)];
    if (fr == static_cast<std::size_t>(-1)) continue;
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto fc = map[static_cast<std::size_t>(c)];
      if (fc != static_cast<std::size_t>(-1))
        out(r, c) = rho.elems()(static_cast<Eigen::Index>(fr), static_cast<Eigen::Index>(fc));
    }
  }
  return DensityMatrix(std::move(to), std::move(out));
}

FockVector with_cutoff(const FockVector& v, std::string_view mode, int cutoff) {
  const auto& from = v.layout();
  const auto pos = from.position(mode);
  ModeLayout to = from.with_cutoff(mode, cutoff);
  const auto map = cutoff_map(from, to, pos);
  CVector out = CVector::Zero(static_cast<Eigen::Index>(to.dim()));
  for (std::size_t i = 0; i < map.size(); ++i)
    if (map[i] != static_cast<std::size_t>(-1))
      out[static_cast<Eigen::Index>(i)] = v.amps()[static_cast<Eigen::Index>(map[i])];
  return FockVector(std::move(to), std::move(out));
}

DensityMatrix relabel(const DensityMatrix& rho, std::string_view from, std::string_view to) {
  return DensityMatrix(rho.layout().relabeled(from, to), rho.elems());
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.layout() == b.layout())) throw Error("trace distance: layout mismatch");
  CMatrix diff = a.elems() - b.elems();
  diff = 0.5 * (diff + diff.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(diff, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace fock
}  // namespace qsd
