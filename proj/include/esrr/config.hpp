#pragma once

#include <string>

#include "esrr/atoms.hpp"
#include "esrr/certificate.hpp"
#include "esrr/solver.hpp"
#include "esrr/sweep.hpp"

namespace esrr {

enum class CertificateMethod { Qp, Limit, Both };

// Kernel bank description as it appears in the config file. Either explicit
// tables (frequencies/phases or centers) or a seeded random draw.
struct KernelSpec {
  std::string kind;  // "fourier-features" | "periodized-gaussian"
  int N{0};
  int d{1};
  std::string layout{"random"};  // "random" | "basis" | "explicit"
  std::uint64_t seed{0};
  int max_freq{8};
  double width{0.05};
  Eigen::MatrixXi frequencies;  // explicit fourier
  Eigen::MatrixXd phases;
  Eigen::MatrixXd centers;      // explicit gaussian

  KernelBank build() const;
};

struct ExperimentConfig {
  std::string schema_version{"1"};
  Family family{Family::ScalarBlasso};
  KernelSpec kernel;
  SparseSignal ground_truth;
  CertificateMethod cert_method{CertificateMethod::Qp};
  int cert_grid{512};
  std::vector<double> cert_lambda_sequence{1e-2, 1e-3, 1e-4};
  MndscTols tolerances;
  AdmissibleRegion region;
  SolverConfig solver;
  double epsilon{0.05};
  std::string output_dir{"out"};

  ProblemInstance make_problem() const { return ProblemInstance::make(family, kernel.build()); }
  // semantic checks beyond JSON shape; throws BAD_CONFIG with a path
  void validate() const;
};

// JSON (de)serialization; the round trip is lossless. Parse failures throw
// BAD_CONFIG with a line-numbered diagnostic.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig config_from_file(const std::string& path);
std::string config_to_json_text(const ExperimentConfig& cfg);

// report serialization (reports embed the resolved config for reproducibility)
std::string mndsc_report_to_json(const MndscReport& rep, const ExperimentConfig& cfg);
std::string solve_result_to_json(const SolveResult& res, const ExperimentConfig& cfg,
                                 double lambda);
std::string esrr_report_to_json(const EsrrReport& rep, const ExperimentConfig& cfg);

// sampled eta trace for plotting: x,eta_1,...,eta_d,norm at `samples` points
std::string eta_trace_csv(const Certificate& cert, int samples = 2048);

}  // namespace esrr
