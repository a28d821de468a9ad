#include "esrr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "esrr/config.hpp"
#include "esrr/errors.hpp"
#include "esrr/logging.hpp"

namespace esrr {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(ErrorCode::BAD_CONFIG, "cannot write " + path.string());
}

struct GlobalOpts {
  std::string config_path;
  std::string out_dir;  // overrides the config's output dir when set
  int threads{1};
  bool skip_certify{false};
};

fs::path out_dir(const GlobalOpts& g, const ExperimentConfig& cfg) {
  return g.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(g.out_dir);
}

int cmd_validate_kernels(const GlobalOpts& g) {
  const ExperimentConfig cfg = config_from_file(g.config_path);
  const KernelBank bank = cfg.kernel.build();
  const DerivativeReport rep =
      validate_kernel_derivatives(bank, 100, 1e-6, /*seed=*/0, /*throw_on_fail=*/false);
  std::printf("kernel  max_rel_error\n");
  for (std::size_t i = 0; i < rep.max_rel_error.size(); ++i)
    std::printf("%6zu  %.3e\n", i, rep.max_rel_error[i]);
  std::printf("%s (tol %.1e, worst kernel %d: %.3e)\n", rep.pass ? "PASS" : "FAIL",
              rep.tol, rep.worst_kernel, rep.worst_error);
  return rep.pass ? 0 : 2;
}

// builds the configured certificate(s); returns the one the checks run on
Certificate build_certificate(const ExperimentConfig& cfg, const ProblemInstance& prob) {
  std::optional<Certificate> qp;
  std::optional<LimitCertificate> lim;
  if (cfg.cert_method != CertificateMethod::Limit) {
    QpOptions opts;
    opts.grid = cfg.cert_grid;
    qp = minimal_norm_certificate_qp(prob, cfg.ground_truth, opts);
  }
  if (cfg.cert_method != CertificateMethod::Qp) {
    lim = minimal_norm_certificate_limit(prob, cfg.ground_truth, cfg.cert_lambda_sequence,
                                         cfg.solver);
  }
  if (qp && lim) {
    const double rel = (qp->p - lim->cert.p).norm() / std::max(qp->p.norm(), 1e-30);
    std::printf("certificate method agreement: relative difference %.3e\n", rel);
  }
  return qp ? *qp : lim->cert;
}

int cmd_certify(const GlobalOpts& g) {
  const ExperimentConfig cfg = config_from_file(g.config_path);
  const ProblemInstance prob = cfg.make_problem();
  Certificate cert{Eigen::VectorXd::Zero(prob.N), &prob};
  try {
    cert = build_certificate(cfg, prob);
  } catch (const Error& e) {
    if (e.code == ErrorCode::INFEASIBLE || e.code == ErrorCode::GRID_INSUFFICIENT) {
      std::printf("certificate construction failed: %s\n", e.what());
      return 3;
    }
    throw;
  }
  const MndscReport rep = check_mndsc(prob, cfg.ground_truth, cert, cfg.tolerances);
  const fs::path dir = out_dir(g, cfg);
  write_file(dir / "mndsc_report.json", mndsc_report_to_json(rep, cfg));
  write_file(dir / "eta_trace.csv", eta_trace_csv(cert));
  std::printf("non-degeneracy verdict: %s\n", rep.verdict ? "pass" : "fail");
  for (const auto& r : rep.reasons) std::printf("  reason: %s\n", r.c_str());
  std::printf("feasibility margin: %.9f\n", rep.feasibility_margin);
  return rep.verdict ? 0 : 4;
}

void print_atom_table(const SparseSignal& u) {
  std::printf("%-16s %-12s %-12s %-24s %-12s\n", "variant", "tags", "x", "a", "c");
  for (const auto& [c, atom] : u.atoms) {
    if (const auto* t = std::get_if<TorusSpike>(&atom)) {
      std::printf("%-16s sign=%-7d %-12.8f %-24s %-12.8f\n", "torus-spike", t->sign,
                  t->x.x, "-", c);
    } else if (const auto* cs = std::get_if<CanonicalSpike>(&atom)) {
      char tags[32];
      std::snprintf(tags, sizeof(tags), "k=%d,s=%d", cs->k, cs->sign);
      std::printf("%-16s %-12s %-12s %-24s %-12.8f\n", "canonical-spike", tags, "-", "-", c);
    } else if (const auto* v = std::get_if<VectorSpike>(&atom)) {
      std::string a = "(";
      for (int i = 0; i < v->a.size(); ++i) {
        char b[24];
        std::snprintf(b, sizeof(b), "%s%.4f", i ? "," : "", v->a[i]);
        a += b;
      }
      a += ")";
      std::printf("%-16s %-12s %-12.8f %-24s %-12.8f\n", "vector-spike", "-", v->x.x,
                  a.c_str(), c);
    } else {
      const auto& ax = std::get<AxisSpike>(atom);
      char tags[32];
      std::snprintf(tags, sizeof(tags), "k=%d,s=%d", ax.k, ax.sign);
      std::printf("%-16s %-12s %-12.8f %-24s %-12.8f\n", "axis-spike", tags, ax.x.x, "-", c);
    }
  }
}

int cmd_solve(const GlobalOpts& g, double lambda, std::uint64_t noise_seed,
              double noise_frac) {
  const ExperimentConfig cfg = config_from_file(g.config_path);
  if (!(lambda > 0)) {
    std::fprintf(stderr, "--lambda must be > 0\n");
    return 1;
  }
  const ProblemInstance prob = cfg.make_problem();
  const Eigen::VectorXd y0 = forward_signal(prob, cfg.ground_truth);
  const Eigen::VectorXd w =
      draw_noise(prob.N, noise_frac * cfg.region.alpha * lambda, noise_seed);
  const SolveResult res = solve(prob, y0 + w, lambda, cfg.solver);
  print_atom_table(res.u);
  std::printf("objective: %.12e  certificate sup: %.9f  iterations: %d\n", res.objective,
              res.certificate_sup, res.iterations);
  write_file(out_dir(g, cfg) / "solve_result.json", solve_result_to_json(res, cfg, lambda));
  return res.converged ? 0 : 5;
}

int cmd_sweep(const GlobalOpts& g, bool auto_frontier) {
  const ExperimentConfig cfg = config_from_file(g.config_path);
  const ProblemInstance prob = cfg.make_problem();
  if (!g.skip_certify) {
    const int rc = cmd_certify(g);
    if (rc != 0) {
      std::printf("certification gate failed; use --skip-certify to sweep anyway\n");
      return rc;
    }
  }

  const EsrrReport rep =
      run_sweep(prob, cfg.ground_truth, cfg.region, cfg.epsilon, cfg.solver, g.threads);
  const fs::path dir = out_dir(g, cfg);
  write_file(dir / "esrr_report.json", esrr_report_to_json(rep, cfg));
  write_file(dir / "esrr_report.csv", rep.to_csv());

  std::printf("empirical admissible frontier (per-lambda pass rates):\n");
  for (double lambda : cfg.region.lambda_grid) {
    int pass = 0, total = 0;
    for (const auto& c : rep.cells)
      if (c.lambda == lambda) {
        ++total;
        pass += c.esrr_verdict ? 1 : 0;
      }
    std::printf("  lambda %.3e: %d/%d cells pass\n", lambda, pass, total);
  }
  if (std::isfinite(rep.decay_slope))
    std::printf("noiseless log-log error decay slope: %.4f\n", rep.decay_slope);

  if (auto_frontier && !rep.all_pass()) {
    const FrontierResult fr = shrink_lambda0(prob, cfg.ground_truth, cfg.region,
                                             cfg.epsilon, cfg.solver, 6, g.threads);
    if (fr.found)
      std::printf("all cells pass after shrinking lambda0 to %.3e (%d halvings)\n",
                  fr.region.lambda0, fr.rounds);
    else
      std::printf("no passing lambda0 found within %d halvings\n", fr.rounds);
  }

  if (rep.any_solver_failed()) return 6;
  return rep.all_pass() ? 0 : 7;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Sparse recovery experiments on the torus"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "experiment config JSON")->required();
  app.add_option("--out", g.out_dir, "output directory (overrides config)");
  app.add_option("--threads", g.threads, "worker threads for sweeps")
      ->check(CLI::PositiveNumber);
  app.add_flag("--skip-certify", g.skip_certify, "run sweeps without the certification gate");

  auto* vk = app.add_subcommand("validate-kernels", "check analytic kernel derivatives");
  auto* certify = app.add_subcommand("certify", "build the dual certificate and check it");
  auto* solve_cmd = app.add_subcommand("solve", "single regularized solve");
  double lambda = 0.0, noise_frac = 0.0;
  std::uint64_t noise_seed = 0;
  solve_cmd->add_option("--lambda", lambda, "regularization parameter")->required();
  solve_cmd->add_option("--noise-seed", noise_seed, "noise RNG seed");
  solve_cmd->add_option("--noise-frac", noise_frac, "noise norm as fraction of alpha*lambda");
  auto* sweep_cmd = app.add_subcommand("sweep", "recovery sweep over the (lambda, noise) region");
  bool auto_frontier = false;
  sweep_cmd->add_flag("--auto-frontier", auto_frontier,
                      "halve lambda0 until the sweep passes and report it");

  try {
    app.parse(argc, argv);
    if (vk->parsed()) return cmd_validate_kernels(g);
    if (certify->parsed()) return cmd_certify(g);
    if (solve_cmd->parsed()) return cmd_solve(g, lambda, noise_seed, noise_frac);
    if (sweep_cmd->parsed()) return cmd_sweep(g, auto_frontier);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const Error& e) {
    log::error(e.what());
    switch (e.code) {
      case ErrorCode::BAD_CONFIG: return 1;
      case ErrorCode::FAILS_VALIDATION: return 2;
      case ErrorCode::INFEASIBLE:
      case ErrorCode::GRID_INSUFFICIENT: return 3;
      case ErrorCode::SOLVER_FAILED: return 6;
      default: return 1;
    }
  }
  return 1;
}

}  // namespace esrr
