#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"

namespace qsd::cli {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double d = 0.0;
  in >> d;
  if (in.fail() || !in.eof()) throw Error("config key '" + key + "': '" + v + "' is not a number");
  return d;
}

int to_int(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  int i = 0;
  in >> i;
  if (in.fail() || !in.eof()) throw Error("config key '" + key + "': '" + v + "' is not an integer");
  return i;
}

optimizer::Objective to_objective(const std::string& v) {
  if (v == "fidelity") return optimizer::Objective::kFidelity;
  if (v == "rate") return optimizer::Objective::kRate;
  throw Error("--objective: '" + v + "' is not one of fidelity, rate");
}

std::optional<int> to_cutoff(const std::string& key, const std::string& v) {
  if (v == "auto") return std::nullopt;
  return to_int(key, v);
}

const char* objective_name(optimizer::Objective o) {
  return o == optimizer::Objective::kRate ? "rate" : "fidelity";
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json settings_json(const Settings& s) {
  return {
      {"alpha_sq", s.alpha_sq},
      {"eta1", s.eta1},
      {"eta2", s.eta2},
      {"eta3", s.eta3},
      {"gamma_sq", s.gamma_sq},
      {"pair_cutoff", s.pair_cutoff},
      {"coherent_cutoff", s.coherent_cutoff ? json(*s.coherent_cutoff) : json("auto")},
      {"detected_cutoff", s.detected_cutoff ? json(*s.detected_cutoff) : json("auto")},
      {"lossy_cutoff", s.lossy_cutoff},
      {"ratio", opt_json(s.ratio)},
      {"ratios", s.ratios},
      {"rep_rate", s.rep_rate},
      {"objective", objective_name(s.objective)},
      {"range_lo", opt_json(s.range_lo)},
      {"range_hi", opt_json(s.range_hi)},
      {"grid_points", opt_json(s.grid_points)},
      {"eta_lo", opt_json(s.eta_lo)},
      {"eta_hi", opt_json(s.eta_hi)},
      {"eta_points", s.eta_points},
      {"published_rate", opt_json(s.published_rate)},
  };
}

// Thrown for output files that cannot be written.
struct IoError : Error {
  using Error::Error;
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << content;
  f.flush();
  if (!f) throw IoError("failed writing '" + path + "'");
}

struct RunContext {
  std::string command;
  const Settings& settings;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

// Writes `content` to s.out (plus its manifest) or to `out` when no path is set.
void emit(const RunContext& ctx, const std::string& content, std::ostream& out) {
  const auto& s = ctx.settings;
  if (s.out.empty()) {
    out << content;
    return;
  }
  write_file(s.out, content);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.start).count();
  json manifest = {
      {"tool", "qsd"},
      {"version", kToolVersion},
      {"command", ctx.command},
      {"config", settings_json(s)},
      {"duration_seconds", secs},
      {"outputs", json::array({s.out})},
  };
  write_file(s.out + ".manifest.json", manifest.dump(2) + "\n");
}

bool wants_json(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

void apply_threads_env() {
  if (const char* v = std::getenv("QSD_THREADS")) {
    const int n = std::atoi(v);
    if (n > 0) omp_set_num_threads(n);
  }
}

optimizer::ScanSpec scan_spec(const Settings& s, double lo, double hi, int points) {
  optimizer::ScanSpec spec;
  spec.lo = s.range_lo.value_or(lo);
  spec.hi = s.range_hi.value_or(hi);
  spec.grid_points = s.grid_points.value_or(points);
  spec.objective = s.objective;
  spec.target = pipeline::TargetQubit::from_ratio(s.ratio.value_or(1.0));
  spec.base = s.scheme();
  return spec;
}

// ---------------------------------------------------------------------------

int cmd_truncate(const Settings& s, std::ostream& out, std::ostream& err) {
  RunContext ctx{"truncate", s};
  auto cfg = s.scheme();
  const auto target = pipeline::TargetQubit::from_ratio(s.ratio.value_or(0.0));
  cfg.alpha = optimizer::alpha_for(s.alpha_sq, target);
  auto r = pipeline::run_branches(cfg);
  if (r.no_event()) {
    err << "no heralding event: success probability " << fmt6(r.probability) << " below threshold\n";
    return kNoEvent;
  }
  if (s.ratio) r = pipeline::with_fidelity(std::move(r), target);

  const auto& rho = r.rho_out->elems();
  std::ostringstream text;
  text << "probability " << fmt6(r.probability) << "\n";
  text << "rate " << fmt6(r.rate) << " s^-1\n";
  text << "rho_out (mode b1, re im):\n";
  char buf[96];
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "  [%ld,%ld] %.6f %.6f\n", static_cast<long>(i),
                    static_cast<long>(j), rho(i, j).real(), rho(i, j).imag());
      text << buf;
    }
  if (r.fidelity) text << "fidelity " << fmt6(*r.fidelity) << "\n";
  out << text.str();

  if (!s.out.empty()) {
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < rho.rows(); ++i) {
      json rr = json::array(), ii = json::array();
      for (Eigen::Index j = 0; j < rho.cols(); ++j) {
        rr.push_back(rho(i, j).real());
        ii.push_back(rho(i, j).imag());
      }
      re.push_back(rr);
      im.push_back(ii);
    }
    json report = {
        {"command", "truncate"},
        {"config", settings_json(s)},
        {"probability", r.probability},
        {"rate", r.rate},
        {"fidelity", opt_json(r.fidelity)},
        {"rho_out", {{"mode", "b1"}, {"real", re}, {"imag", im}}},
    };
    std::ostringstream sink;
    emit(ctx, report.dump(2) + "\n", sink);
  }
  return kOk;
}

int cmd_scan(const Settings& s, std::ostream& out) {
  RunContext ctx{"scan", s};
  std::vector<double> etas;
  if (s.eta_lo || s.eta_hi) {
    const double lo = s.eta_lo.value_or(s.eta_hi.value_or(0.0));
    const double hi = s.eta_hi.value_or(lo);
    if (s.eta_points == 1) {
      etas.push_back(lo);
    } else {
      for (int i = 0; i < s.eta_points; ++i) etas.push_back(lo + (hi - lo) * i / (s.eta_points - 1));
      etas.back() = hi;
    }
  } else {
    etas.push_back(s.eta1);
  }

  std::vector<std::pair<double, optimizer::ScanPoint>> rows;
  for (double eta : etas) {
    auto spec = scan_spec(s, 0.0, 4.0, 161);
    spec.base.set_eta(eta);
    if (spec.grid_points == 1) {
      pipeline::validate(spec.base);
      rows.emplace_back(eta, optimizer::evaluate(spec, spec.lo));
      continue;
    }
    for (const auto& p : optimizer::scan(spec)) rows.emplace_back(eta, p);
  }
  emit(ctx, scan_csv(rows), out);
  return kOk;
}

int cmd_optimize(const Settings& s, std::ostream& out) {
  RunContext ctx{"optimize", s};
  std::vector<double> ratios = s.ratios;
  if (ratios.empty()) ratios.push_back(s.ratio.value_or(1.0));

  json rows_json = json::array();
  std::ostringstream csv;
  csv << "ratio,rank,alpha_sq,fidelity,probability,rate,at_boundary\n";
  for (double ratio : ratios) {
    Settings one = s;
    one.ratio = ratio;
    const auto optima = optimizer::maximize(scan_spec(one, 0.0, 16.0, 161));
    int rank = 1;
    for (const auto& o : optima) {
      csv << fmt6(ratio) << ',' << rank << ',' << fmt6(o.alpha_sq) << ',' << fmt6(o.fidelity) << ','
          << fmt6(o.probability) << ',' << fmt6(o.rate) << ',' << (o.at_boundary ? 1 : 0) << '\n';
      rows_json.push_back({{"ratio", ratio},
                           {"rank", rank},
                           {"alpha_sq", o.alpha_sq},
                           {"fidelity", o.fidelity},
                           {"probability", o.probability},
                           {"rate", o.rate},
                           {"at_boundary", o.at_boundary}});
      ++rank;
    }
  }
  if (wants_json(s.out)) {
    json doc = {{"objective", objective_name(s.objective)}, {"optima", rows_json}};
    emit(ctx, doc.dump(2) + "\n", out);
  } else {
    emit(ctx, csv.str(), out);
  }
  return kOk;
}

int cmd_compare_ideal(const Settings& s, std::ostream& out) {
  RunContext ctx{"compare-ideal", s};
  std::vector<double> ratios = s.ratios;
  if (ratios.empty()) ratios = s.ratio ? std::vector<double>{*s.ratio} : std::vector<double>{0.4, 1.0, 2.0};
  const auto rows = optimizer::compare_ideal(ratios, s.eta1, s.range_lo.value_or(0.0),
                                             s.range_hi.value_or(4.0), s.grid_points.value_or(201),
                                             s.scheme());
  std::ostringstream csv;
  csv << "ratio,alpha_sq,f_experimental,f_ideal\n";
  for (const auto& r : rows)
    csv << fmt6(r.ratio) << ',' << fmt6(r.alpha_sq) << ',' << fmt6(r.f_experimental) << ','
        << fmt6(r.f_ideal) << '\n';
  emit(ctx, csv.str(), out);
  return kOk;
}

int cmd_calibrate(const Settings& s, std::ostream& out) {
  RunContext ctx{"calibrate", s};
  auto cfg = s.scheme();
  cfg.alpha = optimizer::alpha_for(s.alpha_sq, pipeline::TargetQubit::from_ratio(s.ratio.value_or(1.0)));
  const double published = s.published_rate.value_or(4533.0);
  const double rep = optimizer::calibrate_rep_rate(cfg, published);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", rep);
  out << "rep_rate " << buf << "\n";
  if (!s.out.empty()) {
    json doc = {{"command", "calibrate"}, {"published_rate", published}, {"rep_rate", rep}};
    std::ostringstream sink;
    emit(ctx, doc.dump(2) + "\n", sink);
  }
  return kOk;
}

// Raw flag values; only the ones actually given override the settings.
struct Flags {
  std::optional<std::string> config;
  std::optional<double> alpha_sq, eta, eta1, eta2, eta3, gamma_sq, ratio, rep_rate;
  std::optional<int> pair_cutoff;
  std::optional<std::string> coherent_cutoff, detected_cutoff, objective;
  bool lossy_cutoff = false;
  std::optional<double> range_lo, range_hi, eta_lo, eta_hi, published_rate;
  std::optional<int> grid_points, eta_points;
  std::vector<double> ratios;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "flat key = value config file");
  sub->add_option("--alpha-sq", f.alpha_sq, "coherent intensity |alpha|^2");
  sub->add_option("--eta", f.eta, "efficiency shared by all detectors");
  sub->add_option("--eta1", f.eta1, "efficiency of D1 (idler)");
  sub->add_option("--eta2", f.eta2, "efficiency of D2 (click)");
  sub->add_option("--eta3", f.eta3, "efficiency of D3 (no-click)");
  sub->add_option("--gamma-sq", f.gamma_sq, "pair probability per pulse");
  sub->add_option("--pair-cutoff", f.pair_cutoff, "highest pair number kept");
  sub->add_option("--coherent-cutoff", f.coherent_cutoff, "coherent Fock cutoff or 'auto'");
  sub->add_option("--detected-cutoff", f.detected_cutoff, "Fock cutoff of c2 and c3 or 'auto'");
  sub->add_flag("--lossy-cutoff", f.lossy_cutoff, "allow cutoffs that drop amplitude");
  sub->add_option("--ratio", f.ratio, "target |c1/c0|");
  sub->add_option("--rep-rate", f.rep_rate, "pulses per second");
  sub->add_option("--out", f.out, "output file (a manifest is written next to it)");
}

void add_grid(CLI::App* sub, Flags& f) {
  sub->add_option("--range-lo", f.range_lo, "lowest |alpha|^2");
  sub->add_option("--range-hi", f.range_hi, "highest |alpha|^2");
  sub->add_option("--grid-points", f.grid_points, "number of |alpha|^2 grid points");
}

Settings merge(const Flags& f) {
  Settings s;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw Error("--config: cannot read '" + *f.config + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config(s, parse_config_text(buf.str()));
  }
  if (f.alpha_sq) s.alpha_sq = *f.alpha_sq;
  if (f.eta) s.eta1 = s.eta2 = s.eta3 = *f.eta;
  if (f.eta1) s.eta1 = *f.eta1;
  if (f.eta2) s.eta2 = *f.eta2;
  if (f.eta3) s.eta3 = *f.eta3;
  if (f.gamma_sq) s.gamma_sq = *f.gamma_sq;
  if (f.pair_cutoff) s.pair_cutoff = *f.pair_cutoff;
  if (f.coherent_cutoff) s.coherent_cutoff = to_cutoff("--coherent-cutoff", *f.coherent_cutoff);
  if (f.detected_cutoff) s.detected_cutoff = to_cutoff("--detected-cutoff", *f.detected_cutoff);
  if (f.lossy_cutoff) s.lossy_cutoff = true;
  if (f.ratio) s.ratio = *f.ratio;
  if (f.rep_rate) s.rep_rate = *f.rep_rate;
  if (f.objective) s.objective = to_objective(*f.objective);
  if (f.range_lo) s.range_lo = *f.range_lo;
  if (f.range_hi) s.range_hi = *f.range_hi;
  if (f.grid_points) s.grid_points = *f.grid_points;
  if (f.eta_lo) s.eta_lo = *f.eta_lo;
  if (f.eta_hi) s.eta_hi = *f.eta_hi;
  if (f.eta_points) s.eta_points = *f.eta_points;
  if (!f.ratios.empty()) s.ratios = f.ratios;
  if (f.published_rate) s.published_rate = *f.published_rate;
  if (f.out) s.out = *f.out;
  return s;
}

void check_eta(const char* flag, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(std::string(flag) + ": efficiency " + fmt6(v) + " outside [0, 1]");
}

}  // namespace

// ---------------------------------------------------------------------------

pipeline::SchemeConfig Settings::scheme() const {
  pipeline::SchemeConfig cfg;
  cfg.pdc.gamma_sq = gamma_sq;
  cfg.pdc.pair_cutoff = pair_cutoff;
  cfg.eta1.eta = eta1;
  cfg.eta2.eta = eta2;
  cfg.eta3.eta = eta3;
  cfg.coherent_cutoff = coherent_cutoff;
  cfg.detected_cutoff = detected_cutoff;
  cfg.lossy_cutoff = lossy_cutoff;
  cfg.rep_rate = rep_rate;
  return cfg;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw Error("config line " + std::to_string(lineno) + ": empty key or value");
    kv[key] = value;
  }
  return kv;
}

void apply_config(Settings& s, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "alpha_sq") s.alpha_sq = to_double(k, v);
    else if (k == "eta") s.eta1 = s.eta2 = s.eta3 = to_double(k, v);
    else if (k == "eta1") s.eta1 = to_double(k, v);
    else if (k == "eta2") s.eta2 = to_double(k, v);
    else if (k == "eta3") s.eta3 = to_double(k, v);
    else if (k == "gamma_sq") s.gamma_sq = to_double(k, v);
    else if (k == "pair_cutoff") s.pair_cutoff = to_int(k, v);
    else if (k == "coherent_cutoff") s.coherent_cutoff = to_cutoff(k, v);
    else if (k == "detected_cutoff") s.detected_cutoff = to_cutoff(k, v);
    else if (k == "lossy_cutoff") s.lossy_cutoff = to_int(k, v) != 0;
    else if (k == "ratio") s.ratio = to_double(k, v);
    else if (k == "rep_rate") s.rep_rate = to_double(k, v);
    else if (k == "objective") s.objective = to_objective(v);
    else if (k == "range_lo") s.range_lo = to_double(k, v);
    else if (k == "range_hi") s.range_hi = to_double(k, v);
    else if (k == "grid_points") s.grid_points = to_int(k, v);
    else throw Error("config: unknown key '" + k + "'");
  }
  // std::map iterates "eta" before "eta1".."eta3", so per-detector keys win.
}

void validate(const Settings& s) {
  if (!(s.alpha_sq >= 0.0) || !std::isfinite(s.alpha_sq))
    throw Error("--alpha-sq: must be a finite non-negative number");
  check_eta("--eta1", s.eta1);
  check_eta("--eta2", s.eta2);
  check_eta("--eta3", s.eta3);
  if (s.eta_lo) check_eta("--eta-lo", *s.eta_lo);
  if (s.eta_hi) check_eta("--eta-hi", *s.eta_hi);
  if (s.eta_points < 1) throw Error("--eta-points: must be at least 1");
  if (!(s.gamma_sq >= 0.0 && s.gamma_sq < 1.0)) throw Error("--gamma-sq: must lie in [0, 1)");
  if (s.pair_cutoff < 1) throw Error("--pair-cutoff: must be at least 1");
  if (s.coherent_cutoff && *s.coherent_cutoff < 0) throw Error("--coherent-cutoff: must be non-negative");
  if (s.detected_cutoff && *s.detected_cutoff < 0) throw Error("--detected-cutoff: must be non-negative");
  if (s.ratio && !(*s.ratio >= 0.0)) throw Error("--ratio: must be non-negative");
  for (double r : s.ratios)
    if (!(r >= 0.0)) throw Error("--ratios: values must be non-negative");
  if (!(s.rep_rate > 0.0) || !std::isfinite(s.rep_rate)) throw Error("--rep-rate: must be positive");
  if (s.range_lo && !(*s.range_lo >= 0.0)) throw Error("--range-lo: must be non-negative");
  if (s.range_lo && s.range_hi && !(*s.range_lo < *s.range_hi) && s.grid_points.value_or(2) != 1)
    throw Error("--range-hi: must exceed --range-lo");
  if (s.grid_points && *s.grid_points < 1) throw Error("--grid-points: must be at least 1");
  if (s.published_rate && !(*s.published_rate > 0.0)) throw Error("--published-rate: must be positive");
}

std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string scan_csv(const std::vector<std::pair<double, optimizer::ScanPoint>>& rows) {
  std::ostringstream csv;
  csv << "alpha_sq,eta,fidelity,probability,rate\n";
  for (const auto& [eta, p] : rows)
    csv << fmt6(p.alpha_sq) << ',' << fmt6(eta) << ',' << fmt6(p.fidelity) << ','
        << fmt6(p.probability) << ',' << fmt6(p.rate) << '\n';
  return csv.str();
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  apply_threads_env();

  CLI::App app{"Quantum scissors simulator and intensity optimizer", "qsd"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Flags f;

  auto* truncate = app.add_subcommand("truncate", "evaluate one configuration");
  add_common(truncate, f);

  auto* scan = app.add_subcommand("scan", "grid over |alpha|^2 (and optionally eta) to CSV");
  add_common(scan, f);
  add_grid(scan, f);
  scan->add_option("--eta-lo", f.eta_lo, "lowest eta of a 2-D scan");
  scan->add_option("--eta-hi", f.eta_hi, "highest eta of a 2-D scan");
  scan->add_option("--eta-points", f.eta_points, "number of eta grid points");

  auto* optimize = app.add_subcommand("optimize", "all local optima of fidelity or rate");
  add_common(optimize, f);
  add_grid(optimize, f);
  optimize->add_option("--objective", f.objective, "fidelity or rate");
  optimize->add_option("--ratios", f.ratios, "comma-separated list of |c1/c0|")->delimiter(',');

  auto* compare = app.add_subcommand("compare-ideal", "experimental vs ideal scissors fidelity");
  add_common(compare, f);
  add_grid(compare, f);
  compare->add_option("--ratios", f.ratios, "comma-separated list of |c1/c0|")->delimiter(',');

  auto* calibrate = app.add_subcommand("calibrate", "solve the repetition rate from a published rate");
  add_common(calibrate, f);
  calibrate->add_option("--published-rate", f.published_rate, "events per second at the anchor");

  std::vector<std::string> argv_store{"qsd"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  Settings s;
  try {
    s = merge(f);
    if (calibrate->parsed() && !f.alpha_sq) s.alpha_sq = 0.72;
    validate(s);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (truncate->parsed()) return cmd_truncate(s, out, err);
    if (scan->parsed()) return cmd_scan(s, out);
    if (optimize->parsed()) return cmd_optimize(s, out);
    if (compare->parsed()) return cmd_compare_ideal(s, out);
    if (calibrate->parsed()) return cmd_calibrate(s, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace qsd::cli
