#pragma once

#include "raouu/ouu.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace raouu {

struct MeshSpec {
  int nx = 79;
  int ny = 39;
  double lx = 2.0;
  double ly = 1.0;
};

struct FieldSpec {
  double kappa = 2e-2;
  double alpha = 4.0;
  double mean_value = 0.0;
  std::string mean_file;  // one nodal value per line; overrides mean_value
};

struct WellSpec {
  double mollifier_width = 0.05;
  double left_pressure = 1.0;
  double right_pressure = 0.0;
};

struct OuuSpec {
  double beta = 1.0;
  double gamma = 1e-5;
  int n_tr = 40;
  std::string trace_mode = "randomized";
  std::string surrogate = "quadratic";
  std::vector<double> beta_schedule{0.0, 0.25, 0.5, 0.75, 1.0};
  double grad_reduction_tol = 5e-4;
  int max_iter = 200;
  double z0 = 4.0;
  double z_min = 0.0;
  double z_max = 16.0;
  bool linear_baseline = true;
};

struct TruncationSpec {
  std::string problem = "poisson";
  std::vector<double> eps{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625};
  int n_mc = 2000;
  int semilinear_n = 32;
  double semilinear_c = 1.0;
  double semilinear_control = 1.0;
};

struct EvaluationSpec {
  int n_mc = 10000;
  double eps = 1.0;
};

struct CompareSpec {
  std::vector<double> betas{0.5, 0.1, 0.01};
  std::vector<std::string> methods{"randomized", "eigenbasis", "saa"};
  std::vector<int> n_tr{5, 10, 20, 40};
  std::vector<int> saa_n_mc{5, 10, 20};
  int n_eval = 2000;
};

struct SampleFieldSpec {
  int count = 3;
  double eps = 1.0;
};

/// Complete run description. Defaults reproduce the canonical study.
struct RunConfig {
  MeshSpec mesh;
  FieldSpec field;
  WellSpec wells;
  OuuSpec ouu;
  TruncationSpec truncation;
  EvaluationSpec evaluation;
  CompareSpec compare;
  SampleFieldSpec sample_field;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "raouu_out";

  OuuConfig ouu_config() const {
    OuuConfig c;
    c.beta = ouu.beta;
    c.gamma = ouu.gamma;
    c.n_tr = ouu.n_tr;
    c.trace_mode = ouu.trace_mode == "eigenbasis" ? TraceMode::Eigenbasis : TraceMode::Randomized;
    c.surrogate = ouu.surrogate == "linear" ? SurrogateKind::Linear : SurrogateKind::Quadratic;
    c.beta_schedule = ouu.beta_schedule;
    c.grad_reduction_tol = ouu.grad_reduction_tol;
    c.max_iter = ouu.max_iter;
    c.seed = seed;
    c.bounds = {ouu.z_min, ouu.z_max};
    c.threads = threads;
    return c;
  }

  void validate() const {
    require(mesh.nx >= 1 && mesh.ny >= 1, "mesh needs at least one element per axis");
    require(mesh.lx > 0.0 && mesh.ly > 0.0, "mesh extents must be positive");
    require(field.kappa > 0.0 && field.alpha > 0.0, "kappa and alpha must be positive");
    require(std::isfinite(field.mean_value), "mean value must be finite");
    require(wells.mollifier_width > 0.0, "mollifier width must be positive");
    require(ouu.trace_mode == "randomized" || ouu.trace_mode == "eigenbasis",
            "trace_mode must be 'randomized' or 'eigenbasis'");
    require(ouu.surrogate == "quadratic" || ouu.surrogate == "linear", "surrogate must be 'quadratic' or 'linear'");
    require(ouu.z_min <= ouu.z0 && ouu.z0 <= ouu.z_max, "z0 must lie within the control bounds");
    ouu_config().validate();
    require(truncation.problem == "poisson" || truncation.problem == "semilinear",
            "truncation problem must be 'poisson' or 'semilinear'");
    require(!truncation.eps.empty(), "truncation eps list must not be empty");
    for (std::size_t i = 0; i < truncation.eps.size(); ++i) {
      require(truncation.eps[i] > 0.0, "truncation eps must be positive");
      if (i > 0) require(truncation.eps[i] < truncation.eps[i - 1], "truncation eps must be descending");
    }
    require(truncation.n_mc >= 1, "truncation n_mc must be positive");
    require(truncation.semilinear_n >= 1 && truncation.semilinear_c >= 0.0, "invalid semilinear settings");
    require(evaluation.n_mc >= 100, "evaluation n_mc must be at least 100");
    require(evaluation.eps >= 0.0, "evaluation eps must be non-negative");
    for (double b : compare.betas) require(b >= 0.0, "compare betas must be non-negative");
    for (const auto& m : compare.methods)
      require(m == "randomized" || m == "eigenbasis" || m == "saa",
              "compare methods must be 'randomized', 'eigenbasis' or 'saa'");
    for (int n : compare.n_tr) require(n >= 1, "compare n_tr levels must be positive");
    for (int n : compare.saa_n_mc) require(n >= 2, "SAA levels need at least two samples");
    require(compare.n_eval >= 100, "compare n_eval must be at least 100");
    require(sample_field.count >= 1 && sample_field.eps >= 0.0, "invalid sample_field settings");
    require(threads >= 1, "threads must be positive");
    require(!out_dir.empty(), "out_dir must not be empty");
  }
};

namespace detail {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidArgument(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!it->is_number_integer()) throw InvalidArgument("");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw InvalidArgument("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw InvalidArgument("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw InvalidArgument("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw InvalidArgument("");
      }
      out = it->template get<T>();
    } catch (const std::exception&) {
      throw InvalidArgument(where_ + "." + key + ": wrong type");
    }
  }

  json sub(const char* key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? json::object() : *it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw InvalidArgument(where_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  using nlohmann::json;
  json j;
  j["mesh"] = {{"nx", c.mesh.nx}, {"ny", c.mesh.ny}, {"lx", c.mesh.lx}, {"ly", c.mesh.ly}};
  j["field"] = {{"kappa", c.field.kappa}, {"alpha", c.field.alpha}, {"mean_value", c.field.mean_value},
                {"mean_file", c.field.mean_file}};
  j["wells"] = {{"mollifier_width", c.wells.mollifier_width},
                {"left_pressure", c.wells.left_pressure},
                {"right_pressure", c.wells.right_pressure}};
  j["ouu"] = {{"beta", c.ouu.beta},
              {"gamma", c.ouu.gamma},
              {"n_tr", c.ouu.n_tr},
              {"trace_mode", c.ouu.trace_mode},
              {"surrogate", c.ouu.surrogate},
              {"beta_schedule", c.ouu.beta_schedule},
              {"grad_reduction_tol", c.ouu.grad_reduction_tol},
              {"max_iter", c.ouu.max_iter},
              {"z0", c.ouu.z0},
              {"z_min", c.ouu.z_min},
              {"z_max", c.ouu.z_max},
              {"linear_baseline", c.ouu.linear_baseline}};
  j["truncation"] = {{"problem", c.truncation.problem},
                     {"eps", c.truncation.eps},
                     {"n_mc", c.truncation.n_mc},
                     {"semilinear_n", c.truncation.semilinear_n},
                     {"semilinear_c", c.truncation.semilinear_c},
                     {"semilinear_control", c.truncation.semilinear_control}};
  j["evaluation"] = {{"n_mc", c.evaluation.n_mc}, {"eps", c.evaluation.eps}};
  j["compare"] = {{"betas", c.compare.betas},
                  {"methods", c.compare.methods},
                  {"n_tr", c.compare.n_tr},
                  {"saa_n_mc", c.compare.saa_n_mc},
                  {"n_eval", c.compare.n_eval}};
  j["sample_field"] = {{"count", c.sample_field.count}, {"eps", c.sample_field.eps}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out_dir"] = c.out_dir;
  return j;
}

/// Overlays the keys present in j on top of base. Unknown keys and wrongly
/// typed values are rejected.
inline RunConfig from_json(const nlohmann::json& j, RunConfig c = {}) {
  detail::Reader top(j, "config");
  {
    auto s = top.sub("mesh");
    detail::Reader r(s, "mesh");
    r.get("nx", c.mesh.nx);
    r.get("ny", c.mesh.ny);
    r.get("lx", c.mesh.lx);
    r.get("ly", c.mesh.ly);
    r.finish();
  }
  {
    auto s = top.sub("field");
    detail::Reader r(s, "field");
    r.get("kappa", c.field.kappa);
    r.get("alpha", c.field.alpha);
    r.get("mean_value", c.field.mean_value);
    r.get("mean_file", c.field.mean_file);
    r.finish();
  }
  {
    auto s = top.sub("wells");
    detail::Reader r(s, "wells");
    r.get("mollifier_width", c.wells.mollifier_width);
    r.get("left_pressure", c.wells.left_pressure);
    r.get("right_pressure", c.wells.right_pressure);
    r.finish();
  }
  {
    auto s = top.sub("ouu");
    detail::Reader r(s, "ouu");
    r.get("beta", c.ouu.beta);
    r.get("gamma", c.ouu.gamma);
    r.get("n_tr", c.ouu.n_tr);
    r.get("trace_mode", c.ouu.trace_mode);
    r.get("surrogate", c.ouu.surrogate);
    r.get("beta_schedule", c.ouu.beta_schedule);
    r.get("grad_reduction_tol", c.ouu.grad_reduction_tol);
    r.get("max_iter", c.ouu.max_iter);
    r.get("z0", c.ouu.z0);
    r.get("z_min", c.ouu.z_min);
    r.get("z_max", c.ouu.z_max);
    r.get("linear_baseline", c.ouu.linear_baseline);
    r.finish();
  }
  {
    auto s = top.sub("truncation");
    detail::Reader r(s, "truncation");
    r.get("problem", c.truncation.problem);
    r.get("eps", c.truncation.eps);
    r.get("n_mc", c.truncation.n_mc);
    r.get("semilinear_n", c.truncation.semilinear_n);
    r.get("semilinear_c", c.truncation.semilinear_c);
    r.get("semilinear_control", c.truncation.semilinear_control);
    r.finish();
  }
  {
    auto s = top.sub("evaluation");
    detail::Reader r(s, "evaluation");
    r.get("n_mc", c.evaluation.n_mc);
    r.get("eps", c.evaluation.eps);
    r.finish();
  }
  {
    auto s = top.sub("compare");
    detail::Reader r(s, "compare");
    r.get("betas", c.compare.betas);
    r.get("methods", c.compare.methods);
    r.get("n_tr", c.compare.n_tr);
    r.get("saa_n_mc", c.compare.saa_n_mc);
    r.get("n_eval", c.compare.n_eval);
    r.finish();
  }
  {
    auto s = top.sub("sample_field");
    detail::Reader r(s, "sample_field");
    r.get("count", c.sample_field.count);
    r.get("eps", c.sample_field.eps);
    r.finish();
  }
  top.get("seed", c.seed);
  top.get("threads", c.threads);
  top.get("out_dir", c.out_dir);
  top.finish();
  return c;
}

inline std::vector<std::string> profile_names() { return {"paper_section6", "desk"}; }

/// Named starting points. `paper_section6` is the canonical study;
/// `desk` is a coarser, cheaper variant of the same setup.
inline RunConfig profile(const std::string& name) {
  RunConfig c;
  if (name == "paper_section6") return c;
  if (name == "desk") {
    c.mesh.nx = 40;
    c.mesh.ny = 20;
    c.ouu.n_tr = 20;
    c.ouu.beta_schedule = {0.0, 0.5, 1.0};
    c.evaluation.n_mc = 1000;
    c.compare.betas = {0.5};
    c.compare.n_tr = {5, 10};
    c.compare.saa_n_mc = {5, 10};
    c.compare.n_eval = 500;
    c.truncation.n_mc = 500;
    return c;
  }
  throw InvalidArgument("unknown profile '" + name + "'");
}

inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = from_json(j, std::move(base));
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2); }

}  // namespace raouu
