#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "esrr/cli.hpp"
#include "esrr/config.hpp"
#include "esrr/errors.hpp"

using namespace esrr;
namespace fs = std::filesystem;

namespace {

std::string base_config() {
  return R"({
  "family": "scalar-blasso",
  "kernel": {"kind": "fourier-features", "N": 15, "layout": "basis"},
  "ground_truth": {"atoms": [
    {"type": "torus-spike", "sign": 1, "x": 0.3, "c": 1.0},
    {"type": "torus-spike", "sign": -1, "x": 0.65, "c": 0.8}
  ]},
  "region": {"alpha": 0.1, "lambda0": 1e-2, "lambda_grid": [1e-2, 1e-3],
             "noise_fractions": [0.0, 1.0], "seeds": [1]}
})";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("esrr_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream(p) << content;
    return p;
  }
};

int cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"esrr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config json round trip is lossless") {
  ExperimentConfig cfg = config_from_json_text(base_config());
  // stress the optional blocks as well
  cfg.cert_method = CertificateMethod::Both;
  cfg.cert_grid = 777;
  cfg.cert_lambda_sequence = {1e-2, 2e-3};
  cfg.tolerances.exc_tol = 3e-4;
  cfg.solver.max_outer_iters = 123;
  cfg.solver.gap_tol = 2e-7;
  cfg.epsilon = 0.04;
  cfg.output_dir = "elsewhere";

  const std::string text = config_to_json_text(cfg);
  ExperimentConfig back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);  // fixed point after one round
  CHECK(back.family == cfg.family);
  CHECK(back.kernel.kind == cfg.kernel.kind);
  CHECK(back.kernel.N == cfg.kernel.N);
  CHECK(back.kernel.layout == cfg.kernel.layout);
  CHECK(back.cert_method == CertificateMethod::Both);
  CHECK(back.cert_grid == 777);
  CHECK(back.cert_lambda_sequence == cfg.cert_lambda_sequence);
  CHECK(back.tolerances.exc_tol == 3e-4);
  CHECK(back.solver.max_outer_iters == 123);
  CHECK(back.solver.gap_tol == 2e-7);
  CHECK(back.epsilon == 0.04);
  CHECK(back.output_dir == "elsewhere");
  CHECK(back.region.lambda_grid == cfg.region.lambda_grid);
  CHECK(back.region.seeds == cfg.region.seeds);
  REQUIRE(back.ground_truth.size() == 2);
  CHECK(back.ground_truth.atoms[0].c == 1.0);
  const auto& spike = std::get<TorusSpike>(back.ground_truth.atoms[1].atom);
  CHECK(spike.sign == -1);
  CHECK(spike.x.x == 0.65);
}

TEST_CASE("explicit kernel tables survive the round trip") {
  std::string text = R"({
    "family": "scalar-blasso",
    "kernel": {"kind": "fourier-features", "N": 3,
               "frequencies": [[0],[1],[2]], "phases": [[0.0],[0.5],[1.0]]},
    "ground_truth": {"atoms": [{"type": "torus-spike", "sign": 1, "x": 0.3, "c": 1.0}]},
    "region": {"alpha": 0.1, "lambda0": 1e-2, "lambda_grid": [1e-2],
               "noise_fractions": [0.0], "seeds": [1]}
  })";
  ExperimentConfig cfg = config_from_json_text(text);
  CHECK(cfg.kernel.layout == "explicit");
  ExperimentConfig back = config_from_json_text(config_to_json_text(cfg));
  CHECK(back.kernel.frequencies == cfg.kernel.frequencies);
  CHECK(back.kernel.phases == cfg.kernel.phases);
  CHECK_NOTHROW(back.make_problem());
}

TEST_CASE("malformed json reports the line of the failure") {
  std::string text = "{\n  \"family\": \"scalar-blasso\",\n  \"kernel\": }";
  try {
    config_from_json_text(text);
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code == ErrorCode::BAD_CONFIG);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("semantic validation rejections") {
  auto parse_patched = [&](const std::string& from, const std::string& to) {
    std::string text = base_config();
    auto pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), to);
    return text;
  };

  // unknown family
  CHECK_THROWS_AS(config_from_json_text(parse_patched("scalar-blasso", "tensor-blasso")), Error);
  // unknown kernel kind
  CHECK_THROWS_AS(config_from_json_text(parse_patched("fourier-features", "wavelets")), Error);
  // wrong atom family for scalar blasso
  CHECK_THROWS_AS(config_from_json_text(parse_patched(
                      R"({"type": "torus-spike", "sign": 1, "x": 0.3, "c": 1.0})",
                      R"({"type": "canonical-spike", "k": 0, "sign": 1, "c": 1.0})")),
                  Error);
  // atoms closer than 2*epsilon
  CHECK_THROWS_AS(config_from_json_text(parse_patched("\"x\": 0.65", "\"x\": 0.32")), Error);
  // unsupported schema version
  std::string versioned = base_config();
  versioned.insert(1, "\"schema_version\": \"99\",");
  CHECK_THROWS_AS(config_from_json_text(versioned), Error);
  // region leaves the admissible set
  CHECK_THROWS_AS(config_from_json_text(parse_patched("\"alpha\": 0.1", "\"alpha\": -1")), Error);
  // more atoms than measurements
  std::string tiny = parse_patched("\"N\": 15", "\"N\": 1");
  CHECK_THROWS_AS(config_from_json_text(tiny), Error);
}

TEST_CASE("config_from_file propagates filesystem failures") {
  CHECK_THROWS_AS(config_from_file("/nonexistent/config.json"), Error);
}

TEST_CASE("cli validate-kernels: pass and parse-error exits") {
  TempDir dir("vk");
  auto cfgp = dir.file("cfg.json", base_config());
  CHECK(cli({"--config", cfgp.string(), "--out", (dir.path / "out").string(),
             "validate-kernels"}) == 0);

  auto badp = dir.file("bad.json", "{ not json");
  CHECK(cli({"--config", badp.string(), "validate-kernels"}) == 1);
  CHECK(cli({"--config", (dir.path / "missing.json").string(), "validate-kernels"}) == 1);
}

TEST_CASE("cli solve: atom recovery, null regime, and bad lambda") {
  TempDir dir("solve");
  auto cfgp = dir.file("cfg.json", base_config());
  auto out = (dir.path / "out").string();
  CHECK(cli({"--config", cfgp.string(), "--out", out, "solve", "--lambda", "1e-4"}) == 0);
  CHECK(fs::exists(fs::path(out) / "solve_result.json"));

  // lambda above the threshold: still exit 0, empty solution
  CHECK(cli({"--config", cfgp.string(), "--out", out, "solve", "--lambda", "1e6"}) == 0);
  CHECK(cli({"--config", cfgp.string(), "--out", out, "solve", "--lambda", "-1"}) == 1);
  CHECK(cli({"--config", cfgp.string(), "--out", out, "solve"}) == 1);  // --lambda required
}

TEST_CASE("cli certify: pass writes reports, planted mirror fails with exit 4") {
  TempDir dir("certify");
  auto cfgp = dir.file("cfg.json", base_config());
  auto out = (dir.path / "out").string();
  CHECK(cli({"--config", cfgp.string(), "--out", out, "certify"}) == 0);
  CHECK(fs::exists(fs::path(out) / "mndsc_report.json"));
  CHECK(fs::exists(fs::path(out) / "eta_trace.csv"));

  // even frequencies only: eta is 1/2-periodic, so the spike at 0.2 drags a
  // spurious touching point to 0.7 and the non-degeneracy check must fail
  std::string mirror = R"({
    "family": "scalar-blasso",
    "kernel": {"kind": "fourier-features", "N": 4,
               "frequencies": [[0],[2],[2],[4]],
               "phases": [[0.0],[0.0],[-1.5707963267948966],[0.0]]},
    "ground_truth": {"atoms": [{"type": "torus-spike", "sign": 1, "x": 0.2, "c": 1.0}]},
    "region": {"alpha": 0.1, "lambda0": 1e-2, "lambda_grid": [1e-2],
               "noise_fractions": [0.0], "seeds": [1]}
  })";
  auto mp = dir.file("mirror.json", mirror);
  CHECK(cli({"--config", mp.string(), "--out", out, "certify"}) == 4);

  // two spikes forcing p to interpolate +1 and -1 at the same point
  std::string contradictory = R"({
    "family": "scalar-blasso",
    "kernel": {"kind": "fourier-features", "N": 15, "layout": "basis"},
    "ground_truth": {"atoms": [
      {"type": "torus-spike", "sign": 1, "x": 0.3, "c": 1.0},
      {"type": "torus-spike", "sign": -1, "x": 0.3, "c": 1.0}
    ]},
    "region": {"alpha": 0.1, "lambda0": 1e-2, "lambda_grid": [1e-2],
               "noise_fractions": [0.0], "seeds": [1]},
    "epsilon": 0.0
  })";
  auto cp = dir.file("contradictory.json", contradictory);
  CHECK(cli({"--config", cp.string(), "--out", out, "certify"}) == 3);
}

TEST_CASE("cli sweep: gated pass, gate failure, and gate bypass") {
  TempDir dir("sweep");
  auto cfgp = dir.file("cfg.json", base_config());
  auto out = (dir.path / "out").string();
  CHECK(cli({"--config", cfgp.string(), "--out", out, "sweep"}) == 0);
  CHECK(fs::exists(fs::path(out) / "esrr_report.json"));
  CHECK(fs::exists(fs::path(out) / "esrr_report.csv"));
  CHECK(fs::exists(fs::path(out) / "mndsc_report.json"));  // gate ran certify

  // the sweep report embeds the config; two runs are bit-identical up to timing
  std::ifstream in1(fs::path(out) / "esrr_report.csv");
  std::string csv1((std::istreambuf_iterator<char>(in1)), {});
  CHECK(cli({"--config", cfgp.string(), "--out", out, "--threads", "2", "sweep"}) == 0);
  std::ifstream in2(fs::path(out) / "esrr_report.csv");
  std::string csv2((std::istreambuf_iterator<char>(in2)), {});
  auto strip_wall = [](std::string s) {
    // wall_ms is the last column; drop it from every row
    std::string outp;
    std::size_t start = 0;
    while (start <= s.size()) {
      auto end = s.find('\n', start);
      if (end == std::string::npos) end = s.size();
      std::string row = s.substr(start, end - start);
      auto comma = row.rfind(',');
      if (comma != std::string::npos) row = row.substr(0, comma);
      outp += row + "\n";
      start = end + 1;
    }
    return outp;
  };
  CHECK(strip_wall(csv1) == strip_wall(csv2));

  // gate failure propagates the certify exit code
  std::string mirror = R"({
    "family": "scalar-blasso",
    "kernel": {"kind": "fourier-features", "N": 4,
               "frequencies": [[0],[2],[2],[4]],
               "phases": [[0.0],[0.0],[-1.5707963267948966],[0.0]]},
    "ground_truth": {"atoms": [{"type": "torus-spike", "sign": 1, "x": 0.2, "c": 1.0}]},
    "region": {"alpha": 0.1, "lambda0": 1e-2, "lambda_grid": [1e-2],
               "noise_fractions": [0.0], "seeds": [1]}
  })";
  auto mp = dir.file("mirror.json", mirror);
  CHECK(cli({"--config", mp.string(), "--out", out, "sweep"}) == 4);

  // --skip-certify runs the sweep anyway and reports the recovery outcome
  int rc = cli({"--config", mp.string(), "--out", out, "--skip-certify", "sweep"});
  CHECK((rc == 0 || rc == 7));
  CHECK(fs::exists(fs::path(out) / "esrr_report.csv"));
}
