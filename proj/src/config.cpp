#include "esrr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "esrr/errors.hpp"

namespace esrr {

using nlohmann::json;

KernelBank KernelSpec::build() const {
  if (kind == "fourier-features") {
    if (layout == "explicit") return KernelBank::fourier(frequencies, phases);
    if (layout == "basis") {
      if (d != 1) throw Error(ErrorCode::BAD_CONFIG, "basis layout requires d = 1");
      return KernelBank::fourier_basis(N);
    }
    return KernelBank::fourier_random(N, d, max_freq, seed);
  }
  if (kind == "periodized-gaussian") {
    if (layout == "explicit") return KernelBank::gaussian(centers, width);
    return KernelBank::gaussian_random(N, d, width, seed);
  }
  throw Error(ErrorCode::BAD_CONFIG, "unknown kernel kind '" + kind + "'");
}

void ExperimentConfig::validate() const {
  if (schema_version != "1")
    throw Error(ErrorCode::BAD_CONFIG, "unsupported schema_version '" + schema_version + "'");
  solver.validate();
  region.validate();
  const ProblemInstance prob = make_problem();
  ground_truth.validate();
  if (ground_truth.size() > prob.N)
    throw Error(ErrorCode::BAD_CONFIG, "/ground_truth: more atoms than measurements");
  for (const auto& wa : ground_truth.atoms) require_atom_family(prob, wa.atom);
  // position-carrying atoms must be separated by at least 2 epsilon
  std::vector<TorusPoint> xs;
  for (const auto& wa : ground_truth.atoms) {
    if (const auto* t = std::get_if<TorusSpike>(&wa.atom)) xs.push_back(t->x);
    if (const auto* v = std::get_if<VectorSpike>(&wa.atom)) xs.push_back(v->x);
    if (const auto* a = std::get_if<AxisSpike>(&wa.atom)) xs.push_back(a->x);
  }
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j)
      if (torus_dist(xs[i], xs[j]) < 2.0 * epsilon)
        throw Error(ErrorCode::BAD_CONFIG,
                    "/ground_truth: atom positions closer than 2*epsilon");
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json imatrix_to_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

template <typename M>
M matrix_from_json(const json& j) {
  M m(j.size(), j.empty() ? 0 : j.at(0).size());
  for (std::size_t i = 0; i < j.size(); ++i)
    for (std::size_t c = 0; c < j.at(i).size(); ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          j.at(i).at(c).get<typename M::Scalar>();
  return m;
}

json atom_to_json(const Atom& atom) {
  json j;
  if (const auto* t = std::get_if<TorusSpike>(&atom)) {
    j["type"] = "torus-spike";
    j["sign"] = t->sign;
    j["x"] = t->x.x;
  } else if (const auto* c = std::get_if<CanonicalSpike>(&atom)) {
    j["type"] = "canonical-spike";
    j["k"] = c->k;
    j["sign"] = c->sign;
  } else if (const auto* v = std::get_if<VectorSpike>(&atom)) {
    j["type"] = "vector-spike";
    j["x"] = v->x.x;
    j["a"] = std::vector<double>(v->a.data(), v->a.data() + v->a.size());
  } else {
    const auto& a = std::get<AxisSpike>(atom);
    j["type"] = "axis-spike";
    j["k"] = a.k;
    j["sign"] = a.sign;
    j["x"] = a.x.x;
  }
  return j;
}

Atom atom_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "torus-spike")
    return TorusSpike{j.at("sign").get<int>(), TorusPoint(j.at("x").get<double>())};
  if (type == "canonical-spike")
    return CanonicalSpike{j.at("k").get<int>(), j.at("sign").get<int>()};
  if (type == "vector-spike") {
    const auto av = j.at("a").get<std::vector<double>>();
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(av.data(), av.size());
    a.normalize();
    return VectorSpike{a, TorusPoint(j.at("x").get<double>())};
  }
  if (type == "axis-spike")
    return AxisSpike{j.at("k").get<int>(), j.at("sign").get<int>(),
                     TorusPoint(j.at("x").get<double>())};
  throw Error(ErrorCode::BAD_CONFIG, "unknown atom type '" + type + "'");
}

json signal_to_json(const SparseSignal& u) {
  json atoms = json::array();
  for (const auto& wa : u.atoms) {
    json j = atom_to_json(wa.atom);
    j["c"] = wa.c;
    atoms.push_back(j);
  }
  return json{{"atoms", atoms}};
}

SparseSignal signal_from_json(const json& j) {
  SparseSignal u;
  for (const auto& ja : j.at("atoms"))
    u.atoms.push_back({ja.at("c").get<double>(), atom_from_json(ja)});
  return u;
}

const char* method_name(CertificateMethod m) {
  switch (m) {
    case CertificateMethod::Qp: return "qp";
    case CertificateMethod::Limit: return "limit";
    case CertificateMethod::Both: return "both";
  }
  return "qp";
}

}  // namespace

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["family"] = to_string(cfg.family);

  json k;
  k["kind"] = cfg.kernel.kind;
  k["N"] = cfg.kernel.N;
  k["d"] = cfg.kernel.d;
  k["layout"] = cfg.kernel.layout;
  k["seed"] = cfg.kernel.seed;
  if (cfg.kernel.kind == "fourier-features") {
    k["max_freq"] = cfg.kernel.max_freq;
    if (cfg.kernel.layout == "explicit") {
      k["frequencies"] = imatrix_to_json(cfg.kernel.frequencies);
      k["phases"] = matrix_to_json(cfg.kernel.phases);
    }
  } else {
    k["width"] = cfg.kernel.width;
    if (cfg.kernel.layout == "explicit") k["centers"] = matrix_to_json(cfg.kernel.centers);
  }
  j["kernel"] = k;

  j["ground_truth"] = signal_to_json(cfg.ground_truth);
  j["certificate"] = {{"method", method_name(cfg.cert_method)},
                      {"grid", cfg.cert_grid},
                      {"lambda_sequence", cfg.cert_lambda_sequence}};
  j["tolerances"] = {{"interp_tol", cfg.tolerances.interp_tol},
                     {"exc_tol", cfg.tolerances.exc_tol},
                     {"exclusion_radius", cfg.tolerances.exclusion_radius},
                     {"curv_tol", cfg.tolerances.curv_tol}};
  j["region"] = {{"alpha", cfg.region.alpha},
                 {"lambda0", cfg.region.lambda0},
                 {"lambda_grid", cfg.region.lambda_grid},
                 {"noise_fractions", cfg.region.noise_fractions},
                 {"seeds", cfg.region.seeds}};
  j["solver"] = {{"max_outer_iters", cfg.solver.max_outer_iters},
                 {"lmo_grid", cfg.solver.lmo_grid},
                 {"polish_iters", cfg.solver.polish_iters},
                 {"slide_iters", cfg.solver.slide_iters},
                 {"coeff_tol", cfg.solver.coeff_tol},
                 {"gap_tol", cfg.solver.gap_tol},
                 {"prune_tol", cfg.solver.prune_tol}};
  j["epsilon"] = cfg.epsilon;
  j["output"] = {{"dir", cfg.output_dir}};
  return j.dump(2);
}

namespace {

json parse_with_position(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is a byte offset; convert to line/column for the diagnostic
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::BAD_CONFIG, "JSON parse error at line " + std::to_string(line) +
                                           ", column " + std::to_string(col) + ": " +
                                           e.what());
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
  const json j = parse_with_position(text);
  ExperimentConfig cfg;
  try {
    read_if(j, "schema_version", cfg.schema_version);
    const auto fam = family_from_string(j.at("family").get<std::string>());
    if (!fam) throw Error(ErrorCode::BAD_CONFIG, "/family: unknown family");
    cfg.family = *fam;

    const json& k = j.at("kernel");
    cfg.kernel.kind = k.at("kind").get<std::string>();
    cfg.kernel.N = k.at("N").get<int>();
    read_if(k, "d", cfg.kernel.d);
    read_if(k, "layout", cfg.kernel.layout);
    read_if(k, "seed", cfg.kernel.seed);
    read_if(k, "max_freq", cfg.kernel.max_freq);
    read_if(k, "width", cfg.kernel.width);
    if (k.contains("frequencies")) {
      cfg.kernel.layout = "explicit";
      cfg.kernel.frequencies = matrix_from_json<Eigen::MatrixXi>(k.at("frequencies"));
      if (k.contains("phases"))
        cfg.kernel.phases = matrix_from_json<Eigen::MatrixXd>(k.at("phases"));
      else
        cfg.kernel.phases = Eigen::MatrixXd::Zero(cfg.kernel.frequencies.rows(),
                                                  cfg.kernel.frequencies.cols());
    }
    if (k.contains("centers")) {
      cfg.kernel.layout = "explicit";
      cfg.kernel.centers = matrix_from_json<Eigen::MatrixXd>(k.at("centers"));
    }

    cfg.ground_truth = signal_from_json(j.at("ground_truth"));

    if (j.contains("certificate")) {
      const json& c = j.at("certificate");
      if (c.contains("method")) {
        const auto m = c.at("method").get<std::string>();
        if (m == "qp") cfg.cert_method = CertificateMethod::Qp;
        else if (m == "limit") cfg.cert_method = CertificateMethod::Limit;
        else if (m == "both") cfg.cert_method = CertificateMethod::Both;
        else throw Error(ErrorCode::BAD_CONFIG, "/certificate/method: unknown method");
      }
      read_if(c, "grid", cfg.cert_grid);
      read_if(c, "lambda_sequence", cfg.cert_lambda_sequence);
    }
    if (j.contains("tolerances")) {
      const json& t = j.at("tolerances");
      read_if(t, "interp_tol", cfg.tolerances.interp_tol);
      read_if(t, "exc_tol", cfg.tolerances.exc_tol);
      read_if(t, "exclusion_radius", cfg.tolerances.exclusion_radius);
      read_if(t, "curv_tol", cfg.tolerances.curv_tol);
    }
    if (j.contains("region")) {
      const json& r = j.at("region");
      read_if(r, "alpha", cfg.region.alpha);
      read_if(r, "lambda0", cfg.region.lambda0);
      read_if(r, "lambda_grid", cfg.region.lambda_grid);
      read_if(r, "noise_fractions", cfg.region.noise_fractions);
      read_if(r, "seeds", cfg.region.seeds);
    }
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      read_if(s, "max_outer_iters", cfg.solver.max_outer_iters);
      read_if(s, "lmo_grid", cfg.solver.lmo_grid);
      read_if(s, "polish_iters", cfg.solver.polish_iters);
      read_if(s, "slide_iters", cfg.solver.slide_iters);
      read_if(s, "coeff_tol", cfg.solver.coeff_tol);
      read_if(s, "gap_tol", cfg.solver.gap_tol);
      read_if(s, "prune_tol", cfg.solver.prune_tol);
    }
    read_if(j, "epsilon", cfg.epsilon);
    if (j.contains("output")) read_if(j.at("output"), "dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BAD_CONFIG, std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BAD_CONFIG, "cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

namespace {

json config_json(const ExperimentConfig& cfg) { return json::parse(config_to_json_text(cfg)); }

json hit_to_json(const ExtremeHit& h) {
  json j = atom_to_json(h.atom);
  j["value"] = h.value;
  return j;
}

}  // namespace

std::string mndsc_report_to_json(const MndscReport& rep, const ExperimentConfig& cfg) {
  json j;
  j["verdict"] = rep.verdict ? "pass" : "fail";
  j["source_condition_ok"] = rep.source_condition_ok;
  j["feasibility_margin"] = rep.feasibility_margin;
  j["support_interpolation"] = rep.support_interpolation;
  j["spurious_maximizers"] = json::array();
  for (const auto& h : rep.spurious_maximizers) j["spurious_maximizers"].push_back(hit_to_json(h));
  j["curvature"] = json::array();
  for (const auto& c : rep.curvature) {
    json e = atom_to_json(c.atom);
    e["value"] = c.value;
    e["checked"] = c.checked;
    j["curvature"].push_back(e);
  }
  j["reasons"] = rep.reasons;
  // condition 3 is verified along the concrete interpolating curve families
  // only; the abstract curve-class bound is not checked
  j["curve_scope"] = "interpolating-curves-only";
  j["config"] = config_json(cfg);
  return j.dump(2);
}

std::string solve_result_to_json(const SolveResult& res, const ExperimentConfig& cfg,
                                 double lambda) {
  json j;
  j["lambda"] = lambda;
  j["converged"] = res.converged;
  j["iterations"] = res.iterations;
  j["objective"] = res.objective;
  j["certificate_sup"] = res.certificate_sup;
  j["signal"] = signal_to_json(res.u);
  j["config"] = config_json(cfg);
  return j.dump(2);
}

std::string esrr_report_to_json(const EsrrReport& rep, const ExperimentConfig& cfg) {
  json j;
  j["family"] = to_string(rep.family);
  j["epsilon"] = rep.epsilon;
  j["all_pass"] = rep.all_pass();
  if (std::isfinite(rep.decay_slope)) j["decay_slope"] = rep.decay_slope;
  j["cells"] = json::array();
  for (const auto& c : rep.cells) {
    json e;
    e["lambda"] = c.lambda;
    e["noise_fraction"] = c.noise_fraction;
    e["seed"] = c.seed;
    e["noise_norm"] = c.noise_norm;
    e["solver_failed"] = c.solver_failed;
    e["atom_count"] = c.atom_count;
    e["count_match"] = c.count_match;
    e["max_pos_err"] = c.max_pos_err;
    e["max_coeff_err"] = c.max_coeff_err;
    e["max_dir_err"] = c.max_dir_err;
    e["verdict"] = c.esrr_verdict;
    e["objective"] = c.objective;
    e["wall_ms"] = c.wall_ms;
    if (c.matching) {
      e["matching"] = c.matching->assignment;
      e["position_errors"] = c.matching->position_errors;
      e["coefficient_errors"] = c.matching->coefficient_errors;
      e["direction_errors"] = c.matching->direction_errors;
    }
    j["cells"].push_back(e);
  }
  j["config"] = config_json(cfg);
  return j.dump(2);
}

std::string eta_trace_csv(const Certificate& cert, int samples) {
  const int d = cert.prob->d;
  std::string out = "x";
  for (int c = 1; c <= d; ++c) out += ",eta_" + std::to_string(c);
  out += ",norm\n";
  char buf[64];
  for (int i = 0; i < samples; ++i) {
    const double x = static_cast<double>(i) / samples;
    const Eigen::VectorXd e = eta_function(cert, TorusPoint(x), 0);
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    out += buf;
    for (int c = 0; c < d; ++c) {
      std::snprintf(buf, sizeof(buf), ",%.17g", e[c]);
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.17g\n", e.norm());
    out += buf;
  }
  return out;
}

}  // namespace esrr
