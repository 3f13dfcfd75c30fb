#include "mks/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace mks {

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_json(const std::optional<DecayFit>& fit) {
  if (!fit) return nullptr;
  return {{"model", fit->model},
          {"slope", fit->slope},
          {"intercept", fit->intercept},
          {"r2", fit->r2},
          {"points", fit->points},
          {"exponential", {{"slope", fit->exponential.slope}, {"intercept", fit->exponential.intercept}, {"r2", fit->exponential.r2}}},
          {"algebraic", {{"slope", fit->algebraic.slope}, {"intercept", fit->algebraic.intercept}, {"r2", fit->algebraic.r2}}}};
}

json a4_object(const A4Report& r) {
  return {{"lambda_min", r.lambda_min},
          {"lambda_max", r.lambda_max},
          {"kappa", finite_or_null(r.kappa)},
          {"condition", finite_or_null(r.condition)},
          {"denominator_s", finite_or_null(r.denominator_s)},
          {"g_sign", r.g_sign},
          {"tangent_dim", r.tangent_dim},
          {"method", r.method},
          {"violated", r.violated}};
}

json rows_json(const std::vector<SweepRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"ec", r.ec},
                   {"f_total", r.f_total},
                   {"f_err", r.f_err},
                   {"rho_l2_err", r.rho_l2_err},
                   {"gamma_s11_err", r.gamma_s11_err},
                   {"proj_err", r.proj_err},
                   {"ratio", r.ratio},
                   {"orbital_err", r.orbital_err},
                   {"orbital_best", r.orbital_best},
                   {"dense_norm", r.dense_norm},
                   {"basis_size", r.basis_size},
                   {"scf_iters", r.scf_iters}});
  return out;
}

json energy_json(const FreeEnergyBreakdown& e) {
  return {{"kinetic", e.kinetic}, {"external", e.external}, {"hartree", e.hartree},
          {"xc", e.xc},           {"entropy", e.entropy},   {"total", e.total}};
}

std::uint64_t swap_bytes(std::uint64_t v) {
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xff);
  return r;
}

void write_le_double(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
}

double read_le_double(std::istream& in) {
  std::uint64_t bits = 0;
  in.read(reinterpret_cast<char*>(&bits), sizeof bits);
  if (!in) throw std::runtime_error("checkpoint: truncated payload");
  if constexpr (std::endian::native == std::endian::big) bits = swap_bytes(bits);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << sweep_csv_header << '\n';
  for (const auto& r : rows)
    out << format_double(r.ec) << ',' << format_double(r.f_total) << ',' << format_double(r.f_err) << ','
        << format_double(r.rho_l2_err) << ',' << format_double(r.gamma_s11_err) << ',' << format_double(r.proj_err)
        << ',' << format_double(r.ratio) << ',' << r.scf_iters << ',' << format_double(r.wall_s) << '\n';
}

void write_scf_log(std::ostream& out, const std::vector<IterationRecord>& history) {
  out << "iteration,F,drho,mu\n";
  for (const auto& h : history)
    out << h.iteration << ',' << format_double(h.free_energy) << ',' << format_double(h.drho) << ','
        << format_double(h.mu) << '\n';
}

std::string sweep_csv_name(double beta) { return "sweep_beta" + format_double(beta) + ".csv"; }

std::string sweep_summary_json(const SweepResult& result) {
  json temps = json::array();
  for (const auto& t : result.temperatures)
    temps.push_back({{"beta", t.beta},
                     {"csv", sweep_csv_name(t.beta)},
                     {"f_reference", t.f_reference},
                     {"reference_basis_size", t.reference_basis_size},
                     {"energy_fit", fit_json(t.energy_fit)},
                     {"density_fit", fit_json(t.density_fit)},
                     {"fit_note", t.fit_note},
                     {"max_ratio", t.max_ratio},
                     {"orbital_constant", t.orbital_constant},
                     {"errors_monotone", t.errors_monotone},
                     {"energies_monotone", t.energies_monotone},
                     {"a4", t.a4 ? a4_object(*t.a4) : json(nullptr)},
                     {"rows", rows_json(t.rows)}});

  json j;
  j["config_name"] = result.config_name;
  j["config_hash"] = result.config_hash;
  j["reference_cutoff"] = result.reference_cutoff;
  j["floor"] = result.floor;
  const TemperatureSweep* first = result.temperatures.empty() ? nullptr : &result.temperatures.front();
  const bool fitted = first && first->energy_fit;
  j["model"] = fitted ? json(first->energy_fit->model) : json("none");
  j["slope"] = fitted ? json(first->energy_fit->slope) : json(nullptr);
  j["intercept"] = fitted ? json(first->energy_fit->intercept) : json(nullptr);
  j["r2"] = fitted ? json(first->energy_fit->r2) : json(nullptr);
  j["max_ratio"] = first ? first->max_ratio : 0.0;
  j["a4"] = first && first->a4 ? json{{"lambda_min", first->a4->lambda_min}, {"kappa", finite_or_null(first->a4->kappa)}}
                               : json{{"lambda_min", nullptr}, {"kappa", nullptr}};
  j["temperatures"] = std::move(temps);
  return j.dump(2);
}

std::string scf_summary_json(const ScfState& s, const RunConfig& config) {
  json j{{"config_name", config.name},
         {"config_hash", config.hash},
         {"cutoff", s.gamma.basis()->cutoff()},
         {"basis_size", s.gamma.basis()->size()},
         {"beta", config.model.smearing.beta()},
         {"electrons", config.model.electrons},
         {"converged", s.converged},
         {"iterations", s.iterations},
         {"mu", s.mu},
         {"free_energy", energy_json(s.free_energy)},
         {"residual_density", s.residual_density},
         {"residual_fixedpoint", s.residual_fixedpoint},
         {"residual_fixedpoint_s11", s.residual_fixedpoint_s11},
         {"residual_trace", s.residual_trace},
         {"orthonormality_error", s.gamma.orthonormality_error()},
         {"states", s.gamma.states()}};
  if (s.gamma.eigenvalues()) j["eigenvalues"] = std::vector<double>(s.gamma.eigenvalues()->begin(), s.gamma.eigenvalues()->end());
  j["occupations"] = std::vector<double>(s.gamma.occupations().begin(), s.gamma.occupations().end());
  return j.dump(2);
}

std::string a4_json(const A4Report& report) { return a4_object(report).dump(2); }

std::string xc_audit_json(const XcAudit& a, const std::string& functional) {
  json j{{"functional", functional},
         {"stated", {{"c0", a.stated.c0}, {"c1", a.stated.c1}, {"c2", a.stated.c2}, {"p1", a.stated.p1}, {"p2", a.stated.p2}}},
         {"t_min", a.t_min},
         {"t_max", a.t_max},
         {"samples", a.samples},
         {"worst_a2", a.worst_a2},
         {"worst_c1", a.worst_c1},
         {"worst_c2", a.worst_c2},
         {"derivative_error", a.derivative_error},
         {"passes", a.passes},
         {"note", a.note}};
  return j.dump(2);
}

std::string quasi_optimality_json(const QuasiOptimalityReport& q, const std::string& config_hash) {
  json j{{"config_hash", config_hash},
         {"beta", q.sweep.beta},
         {"bound", q.bound},
         {"max_ratio", q.max_ratio},
         {"first_ratio", q.first_ratio},
         {"last_ratio", q.last_ratio},
         {"ratio_trend", q.ratio_trend},
         {"bounded", q.bounded},
         {"nonincreasing", q.nonincreasing},
         {"orbital_constant", q.orbital_constant},
         {"passes", q.passes()},
         {"rows", rows_json(q.sweep.rows)}};
  return j.dump(2);
}

void write_checkpoint(const std::filesystem::path& path, const ScfState& state) {
  const DensityMatrix& g = state.gamma;
  const auto& basis = *g.basis();
  const auto& lattice = basis.cell().lattice();
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < lattice.rows(); ++i) rows.emplace_back(lattice.row(i).begin(), lattice.row(i).end());
  json header{{"format", "mks-checkpoint"},
              {"version", 1},
              {"dimension", basis.dimension()},
              {"lattice", rows},
              {"cutoff", basis.cutoff()},
              {"basis_size", basis.size()},
              {"states", g.states()},
              {"mu", state.mu},
              {"free_energy", state.free_energy.total},
              {"occupations", std::vector<double>(g.occupations().begin(), g.occupations().end())},
              {"payload", "complex128 little-endian column-major basis_size x states"}};
  if (g.eigenvalues()) header["eigenvalues"] = std::vector<double>(g.eigenvalues()->begin(), g.eigenvalues()->end());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << header.dump() << '\n';
  for (Eigen::Index j = 0; j < g.states(); ++j)
    for (Eigen::Index i = 0; i < basis.size(); ++i) {
      write_le_double(out, g.orbitals()(i, j).real());
      write_le_double(out, g.orbitals()(i, j).imag());
    }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing header");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& ex) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + ex.what());
  }
  if (h.value("format", "") != "mks-checkpoint" || h.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported format");
  try {
    const int d = h.at("dimension").get<int>();
    const auto rows = h.at("lattice").get<std::vector<std::vector<double>>>();
    Eigen::MatrixXd lattice(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) lattice(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j));
    const BasisPtr basis = build_basis(Cell(lattice), h.at("cutoff").get<double>());
    const auto n = h.at("basis_size").get<Eigen::Index>();
    const auto m = h.at("states").get<Eigen::Index>();
    if (n != basis->size()) throw std::runtime_error("checkpoint: basis size does not match the cutoff");
    const auto occ = h.at("occupations").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(occ.size()) != m) throw std::runtime_error("checkpoint: occupation count mismatch");
    Eigen::MatrixXcd c(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        const double re = read_le_double(in);
        const double im = read_le_double(in);
        c(i, j) = cplx(re, im);
      }
    std::optional<Eigen::VectorXd> eig;
    if (h.contains("eigenvalues")) {
      const auto e = h["eigenvalues"].get<std::vector<double>>();
      eig = Eigen::Map<const Eigen::VectorXd>(e.data(), static_cast<Eigen::Index>(e.size()));
    }
    Checkpoint cp{DensityMatrix(basis, std::move(c),
                                Eigen::Map<const Eigen::VectorXd>(occ.data(), static_cast<Eigen::Index>(occ.size())),
                                std::move(eig)),
                  h.at("mu").get<double>(), h.at("free_energy").get<double>()};
    return cp;
  } catch (const json::exception& ex) {
    throw std::runtime_error(std::string("checkpoint: bad header: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw std::runtime_error(std::string("checkpoint: ") + ex.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace mks
