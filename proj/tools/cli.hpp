#pragma once

// Command-line front end. All numbers come straight from the library calls;
// this layer only parses configuration and formats reports.

#include "reluiqc/certify.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace reluiqc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInconclusive = 2;

struct RunConfig {
  std::string plant_json;  ///< plant description as JSON text
  std::vector<std::string> methods;
  std::vector<int> Ns;
  std::optional<double> alpha;
  double alpha_hi = 400.0;
  double tol = 1e-3;
  std::string static_form = "lifted";
  std::optional<std::string> q3;  ///< per-command default when unset
  std::string normalization = "simplex";
  bool require_psd = true;
  int rescale_rounds = 3;
  int jobs = 1;
  std::uint64_t seed = 1;
  std::optional<std::size_t> steps;  ///< per-command default when unset
  int trials = 20;
  int instances = 200;
  std::vector<double> x0;
  std::string phi = "relu";
  std::string report;     ///< JSON output path ("" = stdout)
  std::string csv;        ///< CSV output path ("" = none, or stdout for simulate)
  std::string reference;  ///< reference margins CSV
};

/// "# ..." lines are comments; header method,N,margin.
std::map<std::pair<std::string, int>, double> load_reference(const std::filesystem::path& path);

/// |ours - reference| / (1 + reference)
double deviation(double ours, double reference);

/// Builds a Method from the config fields (kind name, N).
Method make_method(const RunConfig& cfg, const std::string& kind, int N, Q3Structure default_q3);

CertifyOptions certify_options(const RunConfig& cfg);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace reluiqc::cli
