#include "mks/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <limits>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mks/io.hpp"

namespace mks {

namespace {

using nlohmann::json;

struct CommonOptions {
  std::string config;
  std::string cutoffs;
  double reference = 0.0;
  std::string betas;
  bool json = false;
  std::string out;
};

struct Context {
  RunConfig config;
  SweepRequest request;
  std::filesystem::path out_dir;
  bool json = false;
};

Context prepare(const CommonOptions& o) {
  Context c;
  c.config = load_config(o.config);
  if (!o.cutoffs.empty()) c.request.cutoffs = parse_list(o.cutoffs, "--cutoffs");
  if (o.reference != 0.0) {
    if (!(o.reference > 0.0)) throw ConfigError("--reference", "must be positive");
    c.request.reference = o.reference;
  }
  if (!o.betas.empty()) c.request.betas = parse_list(o.betas, "--betas");
  c.out_dir = o.out.empty() ? c.config.output_dir : std::filesystem::path(o.out);
  c.json = o.json;
  return c;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

ScfState run_scf_logged(const Context& c) {
  const BasisPtr basis = build_basis(c.config.cell, c.config.cutoff);
  return run_scf(c.config.model, basis, c.config.scf);
}

int cmd_scf(const Context& c, std::ostream& out) {
  const ScfState s = run_scf_logged(c);
  std::ostringstream log;
  write_scf_log(log, s.history);
  write_text(c.out_dir / "scf_log.csv", log.str());
  write_checkpoint(c.out_dir / "checkpoint.mks", s);
  const std::string summary = scf_summary_json(s, c.config);
  write_text(c.out_dir / "scf.json", summary + "\n");
  if (c.json) {
    out << summary << '\n';
  } else {
    out << "config      " << c.config.name << " (" << c.config.hash << ")\n"
        << "basis       " << s.gamma.basis()->size() << " plane waves, cutoff " << c.config.cutoff << "\n"
        << "converged   " << (s.converged ? "yes" : "no") << " after " << s.iterations << " iterations\n"
        << "F           " << format_double(s.free_energy.total) << "\n"
        << "mu          " << format_double(s.mu) << "\n"
        << "residuals   drho " << fmt(s.residual_density) << ", fixed point " << fmt(s.residual_fixedpoint)
        << ", trace " << fmt(s.residual_trace) << "\n"
        << "written     " << (c.out_dir / "checkpoint.mks").string() << ", " << (c.out_dir / "scf_log.csv").string()
        << "\n";
  }
  return s.converged ? exit_ok : exit_failure;
}

int cmd_sweep(const Context& c, std::ostream& out) {
  const SweepResult r = run_sweep(c.config, c.request);
  for (const auto& t : r.temperatures) {
    std::ostringstream csv;
    write_sweep_csv(csv, t.rows);
    write_text(c.out_dir / sweep_csv_name(t.beta), csv.str());
  }
  const std::string summary = sweep_summary_json(r);
  write_text(c.out_dir / "sweep_summary.json", summary + "\n");
  if (c.json) {
    out << summary << '\n';
    return exit_ok;
  }
  out << "config " << r.config_name << " (" << r.config_hash << "), reference cutoff " << r.reference_cutoff << "\n";
  for (const auto& t : r.temperatures) {
    out << "\nbeta " << t.beta << "  F_ref " << format_double(t.f_reference) << "\n";
    out << std::setw(8) << "ec" << std::setw(14) << "f_err" << std::setw(14) << "rho_err" << std::setw(14)
        << "gamma_err" << std::setw(14) << "proj_err" << std::setw(10) << "ratio" << std::setw(7) << "iters\n";
    for (const auto& row : t.rows)
      out << std::setw(8) << row.ec << std::setw(14) << fmt(row.f_err, 4) << std::setw(14) << fmt(row.rho_l2_err, 4)
          << std::setw(14) << fmt(row.gamma_s11_err, 4) << std::setw(14) << fmt(row.proj_err, 4) << std::setw(10)
          << fmt(row.ratio, 4) << std::setw(6) << row.scf_iters << "\n";
    if (t.energy_fit)
      out << "energy fit   " << t.energy_fit->model << " slope " << fmt(t.energy_fit->slope) << " r2 "
          << fmt(t.energy_fit->r2) << "\n";
    if (t.density_fit)
      out << "density fit  " << t.density_fit->model << " slope " << fmt(t.density_fit->slope) << " r2 "
          << fmt(t.density_fit->r2) << "\n";
    if (!t.fit_note.empty()) out << "fit note     " << t.fit_note << "\n";
    if (t.a4) out << "stability    lambda_min " << fmt(t.a4->lambda_min) << " kappa " << fmt(t.a4->kappa) << "\n";
  }
  return exit_ok;
}

Eigen::MatrixXcd random_hermitian(Eigen::Index m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXcd a(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = cplx(normal(rng), normal(rng));
  return 0.5 * (a + a.adjoint());
}

int cmd_response(const Context& c, std::ostream& out) {
  const ScfState s = run_scf_logged(c);
  if (!s.converged) throw SweepError(c.config.cutoff, c.config.model.smearing.beta(), "SCF did not converge");
  const ResponseContext ctx(c.config.model, s, c.config.scf);
  std::mt19937_64 rng(c.config.seed);
  const bool dense_ok = ctx.basis()->size() <= 2000;
  double fd_error = 0.0, roundtrip = 0.0, pairing = -std::numeric_limits<double>::infinity(), hermiticity = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Eigen::MatrixXcd psi = random_hermitian(ctx.dim(), rng);
    const Eigen::MatrixXcd chi = apply_chi(ctx, psi);
    hermiticity = std::max(hermiticity, (chi - chi.adjoint()).cwiseAbs().maxCoeff());
    if (dense_ok) {
      const Eigen::MatrixXcd fd = chi_finite_difference(ctx, psi);
      fd_error = std::max(fd_error, (chi - fd).norm() / std::max(fd.norm(), 1e-300));
    }
    const TangentPerturbation tp{psi, std::normal_distribution<double>()(rng)};
    const TangentPerturbation rhs = apply_jacobian(ctx, tp);
    const JacobianSolution sol = solve_jacobian(ctx, rhs);
    roundtrip = std::max(roundtrip, sol.residual);
    pairing = std::max(pairing, chi_pairing(ctx, psi));
  }
  const bool rhf = !c.config.model.interactions.xc || c.config.model.xc.kind() == XcFunctional::Kind::none;
  json j{{"config_hash", c.config.hash},
         {"tangent_dim", ctx.dim()},
         {"g_sign", std::string(to_string(c.config.model.g_sign))},
         {"chi_fd_relative_error", dense_ok ? json(fd_error) : json(nullptr)},
         {"chi_hermiticity_error", hermiticity},
         {"jacobian_roundtrip_residual", roundtrip},
         {"max_hartree_pairing", pairing},
         {"pairing_checked", rhf}};
  const bool ok = (!dense_ok || fd_error < 1e-5) && roundtrip < 1e-8 && (!rhf || pairing <= 1e-10);
  j["passes"] = ok;
  write_text(c.out_dir / "response.json", j.dump(2) + "\n");
  if (c.json) {
    out << j.dump(2) << '\n';
  } else {
    out << "tangent dimension        " << ctx.dim() << "\n"
        << "chi vs finite difference " << (dense_ok ? fmt(fd_error) : std::string("skipped")) << "\n"
        << "jacobian round trip      " << fmt(roundtrip) << "\n"
        << "max <chi Psi, Psi>_H     " << fmt(pairing) << (rhf ? "" : " (xc enabled, sign not asserted)") << "\n"
        << "result                   " << (ok ? "pass" : "FAIL") << "\n";
  }
  return ok ? exit_ok : exit_failure;
}

int cmd_audit(const Context& c, std::ostream& out) {
  const ScfState s = run_scf_logged(c);
  if (!s.converged) throw SweepError(c.config.cutoff, c.config.model.smearing.beta(), "SCF did not converge");
  const A4Report r = audit_a4(ResponseContext(c.config.model, s, c.config.scf));
  const std::string text = a4_json(r);
  write_text(c.out_dir / "audit.json", text + "\n");
  if (c.json) {
    out << text << '\n';
  } else {
    out << "lambda_min(I - chi)  " << fmt(r.lambda_min) << (r.violated ? "  (stability assumption violated)" : "")
        << "\nkappa                " << fmt(r.kappa) << "\ndenominator_s        " << fmt(r.denominator_s)
        << "\ng_sign               " << r.g_sign << "\ntangent_dim          " << r.tangent_dim
        << "\nmethod               " << r.method << "\n";
  }
  return exit_ok;
}

int cmd_audit_xc(const Context& c, std::ostream& out) {
  const XcAudit a = audit_xc(c.config.model.xc);
  const std::string text = xc_audit_json(a, c.config.model.xc.name());
  write_text(c.out_dir / "audit_xc.json", text + "\n");
  if (c.json) {
    out << text << '\n';
  } else {
    out << "functional       " << c.config.model.xc.name() << "\n"
        << "stated c0 c1 c2  " << fmt(a.stated.c0) << " " << fmt(a.stated.c1) << " " << fmt(a.stated.c2) << "\n"
        << "sampled          " << fmt(a.worst_a2) << " " << fmt(a.worst_c1) << " " << fmt(a.worst_c2) << "\n"
        << "d1 vs FD         " << fmt(a.derivative_error) << "\n"
        << "note             " << a.note << "\n"
        << "result           " << (a.passes ? "pass" : "FAIL") << "\n";
  }
  return a.passes ? exit_ok : exit_failure;
}

int cmd_quasi_opt(const Context& c, std::ostream& out) {
  const QuasiOptimalityReport q = quasi_optimality(c.config, c.request);
  std::ostringstream csv;
  write_sweep_csv(csv, q.sweep.rows);
  write_text(c.out_dir / "quasi_opt.csv", csv.str());
  const std::string text = quasi_optimality_json(q, c.config.hash);
  write_text(c.out_dir / "quasi_opt.json", text + "\n");
  if (c.json) {
    out << text << '\n';
  } else {
    out << std::setw(8) << "ec" << std::setw(14) << "gamma_err" << std::setw(14) << "proj_err" << std::setw(10)
        << "ratio\n";
    for (const auto& row : q.sweep.rows)
      out << std::setw(8) << row.ec << std::setw(14) << fmt(row.gamma_s11_err, 4) << std::setw(14)
          << fmt(row.proj_err, 4) << std::setw(10) << fmt(row.ratio, 4) << "\n";
    out << "max ratio " << fmt(q.max_ratio) << " (bound " << q.bound << "), trend " << fmt(q.ratio_trend)
        << ", orbital constant " << fmt(q.orbital_constant) << "\nresult " << (q.passes() ? "pass" : "FAIL") << "\n";
  }
  return q.passes() ? exit_ok : exit_failure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Finite-temperature Kohn-Sham plane-wave solver and convergence harness", "mks"};
  app.require_subcommand(1);
  CommonOptions o;
  using Handler = int (*)(const Context&, std::ostream&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"scf", "Run one SCF calculation; writes a checkpoint and an iteration log", cmd_scf},
      {"sweep", "Cutoff sweep against a fine reference; writes CSV tables and a JSON summary", cmd_sweep},
      {"response", "Linear-response and Jacobian consistency checks at the converged state", cmd_response},
      {"audit", "Stability audit of I - chi at the converged state", cmd_audit},
      {"audit-xc", "Sampled growth-bound audit of the exchange-correlation functional", cmd_audit_xc},
      {"quasi-opt", "Quasi-optimality ratios along a cutoff sweep", cmd_quasi_opt},
  };
  for (const auto& [name, help, handler] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "Configuration file")->required();
    sub->add_option("--cutoffs", o.cutoffs, "Comma separated sweep cutoffs (hartree)");
    sub->add_option("--reference", o.reference, "Reference cutoff (hartree)");
    sub->add_option("--betas", o.betas, "Comma separated inverse temperatures for sweeps");
    sub->add_flag("--json", o.json, "Print machine-readable JSON instead of text");
    sub->add_option("--out", o.out, "Output directory");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_config;
  }

  try {
    for (const auto& [name, help, handler] : commands) {
      if (!app.got_subcommand(name)) continue;
      const Context c = prepare(o);
      return handler(c, out);
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << "\n";
    return exit_config;
  } catch (const SweepError& ex) {
    err << "convergence failure: " << ex.what() << "\n";
    return exit_failure;
  } catch (const std::exception& ex) {
    err << "failure: " << ex.what() << "\n";
    return exit_failure;
  }
  return exit_config;
}

}  // namespace mks
