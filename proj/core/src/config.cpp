#include "mks/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mks {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"system", {"name", "dimension", "lattice", "electrons", "beta"}},
      {"basis", {"cutoff"}},
      {"sweep", {"cutoffs", "reference", "betas", "projection", "ratio_bound", "workers", "seed"}},
      {"external", {"kind", "centers", "depths", "widths", "millers", "amplitudes"}},
      {"xc", {"functional", "coefficient", "a", "b"}},
      {"interactions", {"hartree", "xc"}},
      {"scf",
       {"mixing", "alpha", "window", "tol_rho", "tol_f", "max_iterations", "buffer_states", "eigensolver",
        "dense_limit", "eigen_tolerance"}},
      {"response", {"g_sign"}},
      {"output", {"dir"}},
  };
  return keys;
}

/// Flat "section.key" -> value map with trailing comments stripped.
class Entries {
 public:
  explicit Entries(const pt::ptree& tree) {
    for (const auto& [section, body] : tree) {
      const auto known = known_keys().find(section);
      if (known == known_keys().end()) throw ConfigError(section, "unknown section");
      if (!body.data().empty() && body.empty()) throw ConfigError(section, "key outside of a section");
      for (const auto& [key, value] : body) {
        if (!known->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
        std::string v = value.data();
        if (const auto c = v.find(';'); c != std::string::npos) v = v.substr(0, c);
        values_[section + "." + key] = trim(v);
      }
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  const std::string& text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(key, "missing required key");
    return it->second;
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  double number(const std::string& key) const {
    const std::string& t = text(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a number, got '" + t + "'");
    }
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  long integer(const std::string& key) const {
    const double v = number(key);
    if (v != std::floor(v)) throw ConfigError(key, "expected an integer");
    return static_cast<long>(v);
  }

  long integer_or(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  bool flag_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& t = text(key);
    if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
    if (t == "false" || t == "no" || t == "off" || t == "0") return false;
    throw ConfigError(key, "expected a boolean, got '" + t + "'");
  }

  std::vector<double> list(const std::string& key) const { return parse_list(text(key), key); }

  /// '|'-separated vectors of space-separated numbers.
  std::vector<std::vector<double>> vectors(const std::string& key) const {
    std::vector<std::vector<double>> out;
    for (const auto& chunk : split(text(key), '|')) {
      std::vector<double> v;
      std::istringstream in(chunk);
      std::string tok;
      while (in >> tok) {
        try {
          v.push_back(std::stod(tok));
        } catch (const std::exception&) {
          throw ConfigError(key, "expected numbers, got '" + tok + "'");
        }
      }
      if (v.empty()) throw ConfigError(key, "empty vector");
      out.push_back(std::move(v));
    }
    return out;
  }

  std::string normalized() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

 private:
  std::map<std::string, std::string> values_;
};

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

Cell read_cell(const Entries& e) {
  const long d = e.integer("system.dimension");
  if (d < 1 || d > 3) throw ConfigError("system.dimension", "must be 1, 2 or 3");
  const auto rows = e.vectors("system.lattice");
  Eigen::MatrixXd lattice(d, d);
  if (rows.size() == 1 && rows[0].size() == 1) {
    lattice = rows[0][0] * Eigen::MatrixXd::Identity(d, d);
  } else {
    if (static_cast<long>(rows.size()) != d) throw ConfigError("system.lattice", "expected one row per dimension");
    for (long i = 0; i < d; ++i) {
      if (static_cast<long>(rows[static_cast<std::size_t>(i)].size()) != d)
        throw ConfigError("system.lattice", "row length must equal the dimension");
      for (long j = 0; j < d; ++j) lattice(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  try {
    return Cell(lattice);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("system.lattice", ex.what());
  }
}

ExternalPotential read_external(const Entries& e, int dimension) {
  const std::string kind = e.text("external.kind");
  if (kind == "none") return {};
  if (kind == "gaussian_wells") {
    const auto centers = e.vectors("external.centers");
    const auto depths = e.list("external.depths");
    const auto widths = e.list("external.widths");
    if (depths.size() != centers.size()) throw ConfigError("external.depths", "one depth per center required");
    if (widths.size() != centers.size()) throw ConfigError("external.widths", "one width per center required");
    std::vector<GaussianWell> wells;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (static_cast<int>(centers[i].size()) != dimension)
        throw ConfigError("external.centers", "center dimension does not match the cell");
      if (!(widths[i] > 0.0)) throw ConfigError("external.widths", "widths must be positive");
      wells.push_back({Eigen::Map<const Eigen::VectorXd>(centers[i].data(), dimension), depths[i], widths[i]});
    }
    return ExternalPotential::gaussian_wells(std::move(wells));
  }
  if (kind == "cosine_series") {
    const auto millers = e.vectors("external.millers");
    const auto amplitudes = e.list("external.amplitudes");
    if (amplitudes.size() != millers.size()) throw ConfigError("external.amplitudes", "one amplitude per term required");
    std::vector<CosineTerm> terms;
    for (std::size_t i = 0; i < millers.size(); ++i) {
      if (static_cast<int>(millers[i].size()) != dimension)
        throw ConfigError("external.millers", "index dimension does not match the cell");
      Miller m{0, 0, 0};
      for (int j = 0; j < dimension; ++j) {
        const double v = millers[i][static_cast<std::size_t>(j)];
        if (v != std::floor(v)) throw ConfigError("external.millers", "indices must be integers");
        m[static_cast<std::size_t>(j)] = static_cast<int>(v);
      }
      terms.push_back({m, amplitudes[i]});
    }
    return ExternalPotential::cosine_series(std::move(terms));
  }
  throw ConfigError("external.kind", "expected none|gaussian_wells|cosine_series, got '" + kind + "'");
}

XcFunctional read_xc(const Entries& e) {
  const std::string f = e.text("xc.functional");
  const double c = e.number_or("xc.coefficient", XcFunctional::dirac_default);
  try {
    if (f == "none") return XcFunctional::none();
    if (f == "dirac") return XcFunctional::dirac(c);
    if (f == "dirac_rational") return XcFunctional::dirac_rational(c, e.number("xc.a"), e.number("xc.b"));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("xc", ex.what());
  }
  throw ConfigError("xc.functional", "expected none|dirac|dirac_rational, got '" + f + "'");
}

}  // namespace

std::vector<double> parse_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key, "expected a comma separated list of numbers, got '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

int effective_workers(int requested) {
  int n = std::max(1, requested);
  if (const char* env = std::getenv("MKS_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<long>(n, cap);
  }
  return n;
}

RunConfig parse_config(const std::string& text, const std::string& name) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& ex) {
    throw ConfigError("", std::string("malformed config: ") + ex.message() + " (line " +
                              std::to_string(ex.line()) + ")");
  }
  const Entries e(tree);

  RunConfig c;
  c.name = e.text_or("system.name", name);
  c.cell = read_cell(e);
  const int d = c.cell.dimension();

  c.cutoff = e.number("basis.cutoff");
  if (!(c.cutoff > 0.0)) throw ConfigError("basis.cutoff", "must be positive");
  if (e.has("sweep.cutoffs")) {
    c.cutoffs = e.list("sweep.cutoffs");
    std::sort(c.cutoffs.begin(), c.cutoffs.end());
    if (c.cutoffs.front() <= 0.0) throw ConfigError("sweep.cutoffs", "cutoffs must be positive");
  }
  c.reference = e.number_or("sweep.reference", 0.0);
  if (e.has("sweep.betas")) c.betas = e.list("sweep.betas");

  Model& m = c.model;
  m.electrons = e.number("system.electrons");
  if (!(m.electrons > 0.0)) throw ConfigError("system.electrons", "must be positive");
  try {
    m.smearing = Smearing(e.number("system.beta"));
    for (double b : c.betas) (void)Smearing(b);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("system.beta", ex.what());
  }
  m.external = read_external(e, d);
  m.xc = read_xc(e);
  m.interactions.hartree = e.flag_or("interactions.hartree", true);
  m.interactions.xc = e.flag_or("interactions.xc", true);
  try {
    m.g_sign = parse_g_sign(e.text_or("response.g_sign", "paper"));
  } catch (const std::invalid_argument& ex) {
    throw ConfigError("response.g_sign", ex.what());
  }

  ScfOptions& s = c.scf;
  const std::string mixing = e.text_or("scf.mixing", "anderson");
  if (mixing == "anderson") s.mixing.kind = MixingOptions::Kind::anderson;
  else if (mixing == "simple") s.mixing.kind = MixingOptions::Kind::simple;
  else throw ConfigError("scf.mixing", "expected simple|anderson, got '" + mixing + "'");
  s.mixing.alpha = e.number_or("scf.alpha", 0.5);
  if (!(s.mixing.alpha > 0.0 && s.mixing.alpha <= 1.0)) throw ConfigError("scf.alpha", "must lie in (0, 1]");
  s.mixing.window = static_cast<int>(e.integer_or("scf.window", 5));
  if (s.mixing.window < 1) throw ConfigError("scf.window", "must be at least 1");
  s.tol_rho = e.number_or("scf.tol_rho", 1e-8);
  s.tol_f = e.number_or("scf.tol_f", 1e-10);
  if (!(s.tol_rho > 0.0)) throw ConfigError("scf.tol_rho", "must be positive");
  if (!(s.tol_f > 0.0)) throw ConfigError("scf.tol_f", "must be positive");
  s.max_iterations = static_cast<int>(e.integer_or("scf.max_iterations", 200));
  if (s.max_iterations < 1) throw ConfigError("scf.max_iterations", "must be at least 1");
  s.buffer_states = static_cast<int>(e.integer_or("scf.buffer_states", 8));
  if (s.buffer_states < 0) throw ConfigError("scf.buffer_states", "must be non-negative");
  const std::string solver = e.text_or("scf.eigensolver", "auto");
  if (solver == "auto") s.eigen.method = EigenMethod::automatic;
  else if (solver == "dense") s.eigen.method = EigenMethod::dense;
  else if (solver == "lobpcg") s.eigen.method = EigenMethod::lobpcg;
  else throw ConfigError("scf.eigensolver", "expected auto|dense|lobpcg, got '" + solver + "'");
  s.eigen.dense_limit = e.integer_or("scf.dense_limit", 512);
  s.eigen.tolerance = e.number_or("scf.eigen_tolerance", 1e-9);

  const std::string projection = e.text_or("sweep.projection", "orthonormalized");
  if (projection == "orthonormalized") c.projection = ProjectionKind::orthonormalized;
  else if (projection == "raw") c.projection = ProjectionKind::raw;
  else throw ConfigError("sweep.projection", "expected orthonormalized|raw, got '" + projection + "'");
  c.ratio_bound = e.number_or("sweep.ratio_bound", 50.0);
  c.workers = static_cast<int>(e.integer_or("sweep.workers", 1));
  c.seed = static_cast<std::uint64_t>(e.integer_or("sweep.seed", 1));
  c.output_dir = e.text_or("output.dir", "mks-out");

  // The smallest basis in play must hold more states than electrons.
  double smallest = c.cutoff;
  if (!c.cutoffs.empty()) smallest = std::min(smallest, c.cutoffs.front());
  if (!(m.electrons < static_cast<double>(build_basis(c.cell, smallest)->size())))
    throw ConfigError("system.electrons", "must be below the number of plane waves at the smallest cutoff");

  c.hash = fnv1a(e.normalized());
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.stem().string());
}

}  // namespace mks
