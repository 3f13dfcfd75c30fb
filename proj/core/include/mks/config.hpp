#pragma once

// Run configuration read from INI-style text: [section] headers, key = value
// lines and ';' comments (whole-line or trailing). Lists are comma separated;
// vectors inside a list are space separated and delimited by '|'.
// See configs/ for annotated examples.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mks/density_matrix.hpp"
#include "mks/scf.hpp"

namespace mks {

/// Raised for unparseable, incomplete or physically invalid configurations.
/// key() names the offending entry as "section.key" when there is one.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class ProjectionKind { orthonormalized, raw };

struct RunConfig {
  std::string name;
  Cell cell = Cell::cubic(1, 1.0);
  double cutoff = 0.0;
  std::vector<double> cutoffs;  // sweep list
  double reference = 0.0;       // sweep reference cutoff; 0 = 2.5 x max(cutoffs)
  std::vector<double> betas;    // sweep temperatures; empty = {model.smearing.beta()}
  Model model;
  ScfOptions scf;
  ProjectionKind projection = ProjectionKind::orthonormalized;
  double ratio_bound = 50.0;
  std::uint64_t seed = 1;
  int workers = 1;
  std::filesystem::path output_dir = "mks-out";
  /// FNV-1a hash of the normalized key/value content.
  std::string hash;
};

RunConfig parse_config(const std::string& text, const std::string& name = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Parses "a, b, c" into doubles. Throws ConfigError naming `key`.
std::vector<double> parse_list(const std::string& text, const std::string& key);

/// Worker count after applying the MKS_THREADS cap (at least 1).
int effective_workers(int requested);

}  // namespace mks
