#pragma once

// CSV tables, JSON summaries and binary checkpoints.
//
// Checkpoint layout: one line of JSON (terminated by '\n') describing the
// cell, cutoff, occupations, eigenvalues and payload shape, followed by the
// orbital coefficients as little-endian IEEE doubles, column-major, each
// complex number stored as (real, imag).

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mks/potentials.hpp"
#include "mks/sweep.hpp"

namespace mks {

inline constexpr const char* sweep_csv_header = "ec,f_total,f_err,rho_l2_err,gamma_s11_err,proj_err,ratio,scf_iters,wall_s";

/// Full-precision (17 significant digits) formatting of a double.
std::string format_double(double v);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);
void write_scf_log(std::ostream& out, const std::vector<IterationRecord>& history);

/// File name of a temperature's table: sweep_beta<beta>.csv.
std::string sweep_csv_name(double beta);

/// Summary document; see schemas/sweep_summary.schema.json.
std::string sweep_summary_json(const SweepResult& result);
std::string scf_summary_json(const ScfState& state, const RunConfig& config);
std::string a4_json(const A4Report& report);
std::string xc_audit_json(const XcAudit& audit, const std::string& functional);
std::string quasi_optimality_json(const QuasiOptimalityReport& report, const std::string& config_hash);

struct Checkpoint {
  DensityMatrix gamma;
  double mu = 0.0;
  double free_energy = 0.0;
};

void write_checkpoint(const std::filesystem::path& path, const ScfState& state);
/// Throws std::runtime_error on malformed or truncated files.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mks
