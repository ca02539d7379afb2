#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qsd/optimizer.hpp"

namespace qsd::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kNoEvent = 3,
  kIoError = 4,
};

/// Everything a subcommand may need, after merging defaults, the optional
/// `--config` file and command-line flags (flags win).
struct Settings {
  double alpha_sq = 0.0;
  double eta1 = 0.5, eta2 = 0.5, eta3 = 0.5;
  double gamma_sq = 4e-4;
  int pair_cutoff = 2;
  std::optional<int> coherent_cutoff;  // nullopt = auto
  std::optional<int> detected_cutoff;  // nullopt = coherent + pairs
  bool lossy_cutoff = false;
  std::optional<double> ratio;
  double rep_rate = pipeline::kDefaultRepRate;
  optimizer::Objective objective = optimizer::Objective::kFidelity;
  std::optional<double> range_lo, range_hi;
  std::optional<int> grid_points;
  std::optional<double> eta_lo, eta_hi;
  int eta_points = 1;
  std::vector<double> ratios;
  std::optional<double> published_rate;
  std::string out;

  pipeline::SchemeConfig scheme() const;
};

/// Parses the flat `key = value` config format ('#' starts a comment).
/// Throws qsd::Error on malformed lines or unknown keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Applies config-file entries onto `s`.
void apply_config(Settings& s, const std::map<std::string, std::string>& kv);

/// Throws qsd::Error naming the offending flag.
void validate(const Settings& s);

/// Formats a double with 6 significant digits, locale-independent.
std::string fmt6(double v);

/// CSV rows (eta, point) in the given order.
std::string scan_csv(const std::vector<std::pair<double, optimizer::ScanPoint>>& rows);

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qsd::cli
