#pragma once

#include "raouu/config.hpp"
#include "raouu/ouu.hpp"
#include "raouu/saa.hpp"
#include "raouu/semilinear.hpp"

#include <filesystem>
#include <iomanip>
#include <ostream>

namespace raouu {

/// Output file could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 17 significant digits, so every double survives a text round trip.
inline std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    out_.open(path);
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    row(header);
  }

  template <class... T>
  void values(const T&... v) {
    std::vector<std::string> cells;
    (cells.push_back(cell(v)), ...);
    row(cells);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (!out_) throw IoError("write to '" + path_.string() + "' failed");
  }

  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  std::filesystem::path path_;
  std::ofstream out_;
};

/// Flow problem, prior and initial control assembled from a run config.
struct FlowStudy {
  std::shared_ptr<const Mesh> mesh;
  PoissonFlow flow;
  GaussianField gf;
  Vector z0;

  static Vector mean_field(const RunConfig& cfg, const Mesh& mesh) {
    if (cfg.field.mean_file.empty()) return Vector::Constant(mesh.num_nodes(), cfg.field.mean_value);
    std::ifstream in(cfg.field.mean_file);
    if (!in) throw InvalidArgument("cannot read mean field file '" + cfg.field.mean_file + "'");
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      try {
        vals.push_back(std::stod(line));
      } catch (const std::exception&) {
        throw InvalidArgument("mean field file has a non-numeric line: '" + line + "'");
      }
    }
    require(static_cast<int>(vals.size()) == mesh.num_nodes(), "mean field file must hold one value per node");
    Vector v = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    require(v.allFinite(), "mean field must be finite");
    return v;
  }

  static WellConfig wells(const RunConfig& cfg) {
    WellConfig w = WellConfig::canonical();
    w.mollifier_width = cfg.wells.mollifier_width;
    return w;
  }

  explicit FlowStudy(const RunConfig& cfg)
      : mesh(build_mesh(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.lx, cfg.mesh.ly, {Side::Left, Side::Right})),
        flow(mesh, wells(cfg), cfg.wells.left_pressure, cfg.wells.right_pressure),
        gf(make_gaussian_field(flow, cfg.field.kappa, cfg.field.alpha, mean_field(cfg, *mesh))),
        z0(Vector::Constant(flow.num_controls(), cfg.ouu.z0)) {}
};

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
  return std::filesystem::path(cfg.out_dir) / name;
}

// ---------------------------------------------------------------- truncation

inline RateStudy run_truncation_study(const RunConfig& cfg) {
  const auto& t = cfg.truncation;
  RateStudy study;
  if (t.problem == "poisson") {
    FlowStudy fs(cfg);
    PdeWorkspace ws(fs.flow, fs.gf.mean());
    ws.solve_state_adjoint(fs.z0);
    QuadraticSurrogate s{ws.control_objective(), ws.gradient(),
                         [&ws](const Vector& v) { return ws.hessian_action(v); }, fs.gf.mean(),
                         std::make_shared<SparseMatrix>(fs.flow.mass())};
    auto theta = [&](const Vector& m) {
      SpdSolver scratch;
      return fs.flow.control_objective(fs.flow.solve_state(m, fs.z0, scratch));
    };
    study = truncation_rate_study(theta, s, fs.gf, t.eps, t.n_mc, cfg.seed, cfg.threads);
  } else {
    auto mesh = build_mesh(t.semilinear_n, t.semilinear_n, 1.0, 1.0, {Side::Left, Side::Right});
    const Vector u_d = interpolate(*mesh, [](double x, double) { return 0.5 * x * (2.0 - x); });
    SemilinearProblem prob(mesh, t.semilinear_c, u_d);
    const Vector z = Vector::Constant(mesh->num_nodes(), t.semilinear_control);
    const Vector m_bar = Vector::Constant(prob.boundary_size(), cfg.field.mean_value);
    GaussianField gf = prob.boundary_gaussian_field(cfg.field.kappa, cfg.field.alpha, m_bar);
    SemilinearLinearization lin(prob, z, m_bar);
    QuadraticSurrogate s{lin.objective(), lin.gradient(),
                         [&lin](const Vector& v) { return lin.hessian_action(v); }, m_bar,
                         std::make_shared<SparseMatrix>(prob.boundary_mass())};
    auto theta = [&](const Vector& m) { return prob.objective(solve_semilinear_state(prob, z, m)); };
    study = truncation_rate_study(theta, s, gf, t.eps, t.n_mc, cfg.seed, cfg.threads);
  }
  return study;
}

inline void write_truncation_csv(const std::filesystem::path& path, const RateStudy& r) {
  CsvWriter w(path, {"eps", "err_lin", "err_quad"});
  for (const auto& row : r.rows) w.values(row.eps, row.err_lin, row.err_quad);
  w.comment("slope_lin=" + fmt(r.slope_lin) + ",slope_quad=" + fmt(r.slope_quad) + ",n_mc=" + std::to_string(r.n_mc));
}

// ------------------------------------------------------------------ optimize

struct RiskAtControl {
  RiskReport report;  // surrogate report at the evaluated beta
  TrueRisk mc;
};

struct OptimizeOutcome {
  std::vector<ContinuationStage> stages;
  Vector z0, z_opt;
  RiskAtControl at_z0, at_opt;
  bool has_linear = false;
  std::vector<ContinuationStage> linear_stages;
  Vector z_lin_opt;
  RiskAtControl at_lin_opt;
  long pde_solves = 0;
};

/// Surrogate report and Monte-Carlo statistics of Theta (and its linear and
/// quadratic surrogates) at z on one fixed sample.
inline RiskAtControl assess(OuuObjective& obj, const FlowStudy& fs, const Vector& z, const RunConfig& cfg,
                            std::uint64_t mc_seed) {
  RiskAtControl out;
  obj.value(z);
  obj.gradient(z);
  out.report = obj.report();
  const QuadraticSurrogate s = obj.surrogate();
  out.mc = evaluate_true_risk(fs.flow, fs.gf, z, cfg.evaluation.n_mc, mc_seed, cfg.evaluation.eps, &s, cfg.threads);
  return out;
}

/// Seed of the evaluation sample, kept apart from the trace directions.
inline std::uint64_t evaluation_seed(const RunConfig& cfg) { return cfg.seed + 0x9e3779b97f4a7c15ull; }

inline OptimizeOutcome run_optimize(const RunConfig& cfg, std::ostream* log = nullptr) {
  FlowStudy fs(cfg);
  const OuuConfig oc = cfg.ouu_config();
  OptimizeOutcome out;
  out.z0 = fs.z0;
  auto obj = OuuObjective::make(fs.flow, fs.gf, oc, fs.z0);
  out.stages = optimize_continuation(obj, fs.z0);
  out.z_opt = out.stages.back().result.z;
  if (log)
    for (const auto& st : out.stages)
      *log << "beta=" << st.beta << " J=" << fmt(st.report.J) << " iterations=" << st.result.iterations
           << (st.result.degraded ? " [degraded: " + st.result.message + "]" : "") << '\n';
  const std::uint64_t es = evaluation_seed(cfg);
  out.at_z0 = assess(obj, fs, out.z0, cfg, es);
  out.at_opt = assess(obj, fs, out.z_opt, cfg, es);
  out.pde_solves = obj.pde_solves();

  if (cfg.ouu.linear_baseline && oc.surrogate == SurrogateKind::Quadratic) {
    OuuConfig lc = oc;
    lc.surrogate = SurrogateKind::Linear;
    auto lin = OuuObjective::randomized(fs.flow, fs.gf, lc);
    out.linear_stages = optimize_continuation(lin, fs.z0);
    out.z_lin_opt = out.linear_stages.back().result.z;
    // Assess with the quadratic objective so both optima get the same report.
    out.at_lin_opt = assess(obj, fs, out.z_lin_opt, cfg, es);
    out.has_linear = true;
  }
  return out;
}

inline void write_optimize_outputs(const RunConfig& cfg, const OptimizeOutcome& o) {
  FlowStudy fs(cfg);
  auto stage_rows = [&](const std::vector<ContinuationStage>& stages, const std::string& prefix) {
    for (std::size_t k = 0; k < stages.size(); ++k) {
      CsvWriter w(out_path(cfg, prefix + "trace_beta_" + std::to_string(k) + ".csv"),
                  {"iter", "J", "grad_norm", "pde_solves_cumulative", "active_bounds_count"});
      w.comment("beta=" + fmt(stages[k].beta));
      for (const auto& r : stages[k].result.trace) w.values(r.iter, r.J, r.pg_norm, r.pde_solves, r.active);
    }
    CsvWriter w(out_path(cfg, prefix + "beta_sweep.csv"),
                {"beta", "J", "theta", "mean_term", "variance_term", "grad_term", "tr_HC", "tr_HC_sq",
                 "control_cost", "iterations", "converged", "degraded"});
    for (const auto& st : stages) {
      const auto& r = st.report;
      w.values(st.beta, r.J, r.theta, r.mean_term, r.variance_term, r.grad_term, r.tr_HC, r.tr_HC_sq, r.control_cost,
               st.result.iterations, st.result.converged, st.result.degraded);
    }
  };
  stage_rows(o.stages, "");
  if (o.has_linear) stage_rows(o.linear_stages, "linear_");

  {
    std::vector<std::string> header{"index", "x", "y", "z0", "z_opt"};
    if (o.has_linear) header.push_back("z_lin_opt");
    CsvWriter w(out_path(cfg, "controls.csv"), header);
    for (int i = 0; i < fs.flow.num_controls(); ++i) {
      const Point& p = fs.flow.wells().controls[i];
      std::vector<std::string> row{std::to_string(i), fmt(p.x), fmt(p.y), fmt(o.z0[i]), fmt(o.z_opt[i])};
      if (o.has_linear) row.push_back(fmt(o.z_lin_opt[i]));
      w.row(row);
    }
  }
  {
    std::vector<std::string> header{"sample", "theta_z0", "theta_lin_z0", "theta_quad_z0",
                                    "theta_opt", "theta_lin_opt", "theta_quad_opt"};
    if (o.has_linear) header.push_back("theta_lin_surrogate_opt");
    CsvWriter w(out_path(cfg, "risk_samples.csv"), header);
    for (std::size_t i = 0; i < o.at_z0.mc.theta.size(); ++i) {
      std::vector<std::string> row{std::to_string(i),
                                   fmt(o.at_z0.mc.theta[i]),
                                   fmt(o.at_z0.mc.theta_lin[i]),
                                   fmt(o.at_z0.mc.theta_quad[i]),
                                   fmt(o.at_opt.mc.theta[i]),
                                   fmt(o.at_opt.mc.theta_lin[i]),
                                   fmt(o.at_opt.mc.theta_quad[i])};
      if (o.has_linear) row.push_back(fmt(o.at_lin_opt.mc.theta[i]));
      w.row(row);
    }
  }
  {
    std::ofstream rep(out_path(cfg, "report.txt"));
    if (!rep) throw IoError("cannot write report.txt");
    auto section = [&](const std::string& name, const RiskAtControl& r) {
      rep << "[" << name << "]\n"
          << "J = " << fmt(r.report.J) << "\n"
          << "theta = " << fmt(r.report.theta) << "\n"
          << "mean_term = " << fmt(r.report.mean_term) << "\n"
          << "variance_term = " << fmt(r.report.variance_term) << "\n"
          << "control_cost = " << fmt(r.report.control_cost) << "\n"
          << "tr_HC = " << fmt(r.report.tr_HC) << "\n"
          << "tr_HC_sq = " << fmt(r.report.tr_HC_sq) << "\n"
          << "pde_solves_per_objective = " << r.report.pde_solves << "\n"
          << "grad_norm = " << fmt(r.report.grad_norm) << "\n"
          << "mc_mean = " << fmt(r.mc.mean) << "\n"
          << "mc_variance = " << fmt(r.mc.variance) << "\n"
          << "mc_mean_quad = " << fmt(sample_mean(r.mc.theta_quad)) << "\n"
          << "mc_variance_quad = " << fmt(sample_variance(r.mc.theta_quad)) << "\n\n";
    };
    rep << "beta = " << fmt(cfg.ouu.beta) << "\ngamma = " << fmt(cfg.ouu.gamma) << "\nn_tr = " << cfg.ouu.n_tr
        << "\ntrace_mode = " << cfg.ouu.trace_mode << "\nsurrogate = " << cfg.ouu.surrogate
        << "\nmc_samples = " << cfg.evaluation.n_mc << "\npde_solves_total = " << o.pde_solves << "\n\n";
    section("initial control", o.at_z0);
    section("optimal control", o.at_opt);
    if (o.has_linear) section("linear-surrogate optimal control", o.at_lin_opt);
    for (const auto& st : o.stages)
      if (st.result.degraded) rep << "warning: beta=" << fmt(st.beta) << ": " << st.result.message << "\n";
  }
}

// ---------------------------------------------------------------- compare-mc

struct CompareRow {
  double beta = 0.0;
  std::string method;
  int level = 0;
  long pde_solves_per_eval = 0;
  double surrogate_objective = 0.0;
  int iterations = 0;
  bool degraded = false;
  Vector z;
  TrueRisk mc;
  double true_objective = 0.0;
  double true_objective_se = 0.0;
};

inline std::vector<CompareRow> run_compare_mc(const RunConfig& cfg, std::ostream* log = nullptr) {
  FlowStudy fs(cfg);
  const std::uint64_t es = evaluation_seed(cfg);
  std::vector<CompareRow> rows;
  OptimizerOptions opt;
  opt.max_iter = cfg.ouu.max_iter;
  opt.grad_reduction_tol = cfg.ouu.grad_reduction_tol;
  for (double beta : cfg.compare.betas) {
    for (const auto& method : cfg.compare.methods) {
      const auto& levels = method == "saa" ? cfg.compare.saa_n_mc : cfg.compare.n_tr;
      for (int level : levels) {
        CompareRow row;
        row.beta = beta;
        row.method = method;
        row.level = level;
        OptimizeResult res;
        if (method == "saa") {
          SaaObjective saa(fs.flow, SaaObjective::draw(fs.gf, level, cfg.evaluation.eps, cfg.seed), beta,
                           cfg.ouu.gamma, cfg.threads);
          res = projected_lbfgs(as_smooth(saa), fs.z0, {cfg.ouu.z_min, cfg.ouu.z_max}, opt);
          row.pde_solves_per_eval = 2L * level;
          row.surrogate_objective = saa.value(res.z);
        } else {
          OuuConfig oc = cfg.ouu_config();
          oc.beta = beta;
          oc.beta_schedule = {beta};
          oc.n_tr = level;
          oc.surrogate = SurrogateKind::Quadratic;
          oc.trace_mode = method == "eigenbasis" ? TraceMode::Eigenbasis : TraceMode::Randomized;
          auto obj = OuuObjective::make(fs.flow, fs.gf, oc, fs.z0);
          res = projected_lbfgs(as_smooth(obj), fs.z0, oc.bounds, opt);
          row.pde_solves_per_eval = 4L + 4L * level;
          row.surrogate_objective = obj.value(res.z) - obj.report().control_cost;
        }
        row.iterations = res.iterations;
        row.degraded = res.degraded;
        row.z = res.z;
        row.mc = evaluate_true_risk(fs.flow, fs.gf, res.z, cfg.compare.n_eval, es, cfg.evaluation.eps, nullptr,
                                    cfg.threads);
        const auto infl = objective_influence(row.mc.theta, beta);
        row.true_objective = row.mc.objective(beta);
        row.true_objective_se = standard_error(infl);
        if (log)
          *log << "beta=" << beta << " method=" << method << " level=" << level
               << " true_objective=" << fmt(row.true_objective) << '\n';
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

inline void write_compare_csv(const std::filesystem::path& path, const std::vector<CompareRow>& rows) {
  CsvWriter w(path, {"beta", "method", "level", "pde_solves_per_eval", "surrogate_objective", "true_objective",
                     "true_objective_se", "true_mean", "true_variance", "iterations", "degraded"});
  for (const auto& r : rows)
    w.values(r.beta, r.method, r.level, r.pde_solves_per_eval, r.surrogate_objective, r.true_objective,
             r.true_objective_se, r.mc.mean, r.mc.variance, r.iterations, r.degraded);
}

// -------------------------------------------------------------- sample-field

inline void run_sample_field(const RunConfig& cfg) {
  FlowStudy fs(cfg);
  std::vector<Vector> samples;
  for (int k = 0; k < cfg.sample_field.count; ++k) samples.push_back(fs.gf.sample(cfg.sample_field.eps, cfg.seed, k));
  std::vector<std::string> header{"node", "x", "y"};
  for (int k = 0; k < cfg.sample_field.count; ++k) header.push_back("sample_" + std::to_string(k));
  CsvWriter w(out_path(cfg, "samples.csv"), header);
  for (int n = 0; n < fs.mesh->num_nodes(); ++n) {
    std::vector<std::string> row{std::to_string(n), fmt(fs.mesh->coord(n).x), fmt(fs.mesh->coord(n).y)};
    for (const auto& s : samples) row.push_back(fmt(s[n]));
    w.row(row);
  }
}

// --------------------------------------------------------- check-derivatives

struct DerivativeCheck {
  std::string name;
  double rel_error = NAN;  // worst relative error at h = 1e-4
  double slope = NAN;      // fitted order of the central-difference error
  bool pass = false;
};

namespace detail {

/// Central-difference check of a directional derivative `exact` of f along
/// directions; also fits the error order over a coarse range of h.
template <class F>
DerivativeCheck fd_check(std::string name, F&& f, const std::vector<std::pair<Vector, double>>& cases,
                         const Vector& x0, double rtol) {
  DerivativeCheck c;
  c.name = std::move(name);
  c.rel_error = 0.0;
  const double h = 1e-4;
  for (const auto& [dir, exact] : cases) {
    const double fd = (f(Vector(x0 + h * dir)) - f(Vector(x0 - h * dir))) / (2 * h);
    c.rel_error = std::max(c.rel_error, std::abs(fd - exact) / std::max(std::abs(exact), 1e-300));
  }
  const auto& [dir, exact] = cases.front();
  std::vector<double> hs{4e-2, 2e-2, 1e-2}, errs;
  for (double hh : hs) errs.push_back(std::abs((f(Vector(x0 + hh * dir)) - f(Vector(x0 - hh * dir))) / (2 * hh) - exact));
  c.slope = loglog_slope(hs, errs);
  c.pass = c.rel_error <= rtol && std::abs(c.slope - 2.0) <= 0.3;
  return c;
}

}  // namespace detail

/// Central-difference checks of every derivative in the stack on a 16x8 mesh.
inline std::vector<DerivativeCheck> check_derivatives(std::uint64_t seed = 1, double rtol = 1e-5) {
  std::vector<DerivativeCheck> out;
  std::mt19937_64 rng = make_engine(seed, 0);
  auto mesh = build_mesh(16, 8, 2.0, 1.0, {Side::Left, Side::Right});
  PoissonFlow flow(mesh, WellConfig::canonical());
  const Vector m_bar =
      interpolate(*mesh, [](double x, double y) { return 0.3 * std::sin(2.0 * x + 1.0) * std::cos(3.0 * y); });
  GaussianField gf = make_gaussian_field(flow, 0.05, 2.0, m_bar);
  Vector z(20);
  for (int i = 0; i < 20; ++i) z[i] = 4.0 + 2.0 * std::sin(1.3 * i);

  PdeWorkspace ws(flow, m_bar);
  ws.solve_state_adjoint(z);
  {
    const Vector g = ws.gradient();
    std::vector<std::pair<Vector, double>> cases;
    for (int k = 0; k < 5; ++k) {
      Vector d = standard_normal(flow.size(), rng);
      cases.emplace_back(d, g.dot(flow.mass() * d));
    }
    out.push_back(detail::fd_check("flow parameter gradient", [&](const Vector& m) { return flow.theta(m, z); },
                                   cases, m_bar, rtol));
  }
  {
    // Hessian action against differences of the gradient, probed by a fixed field.
    const Vector probe = standard_normal(flow.size(), rng);
    auto grad_probe = [&](const Vector& m) {
      PdeWorkspace w(flow, m);
      w.solve_state_adjoint(z);
      return w.gradient_dual().dot(probe);
    };
    std::vector<std::pair<Vector, double>> cases;
    for (int k = 0; k < 3; ++k) {
      Vector d = standard_normal(flow.size(), rng);
      cases.emplace_back(d, ws.hessian_action_dual(d).dot(probe));
    }
    out.push_back(detail::fd_check("flow parameter Hessian action", grad_probe, cases, m_bar, rtol));
  }
  {
    auto sm = build_mesh(16, 16, 1.0, 1.0, {Side::Left, Side::Right});
    const Vector u_d = interpolate(*sm, [](double x, double) { return 0.5 * x * (2.0 - x); });
    SemilinearProblem prob(sm, 1.0, u_d);
    const Vector zs = interpolate(*sm, [](double x, double y) { return 2.0 + std::sin(3.0 * x) * std::cos(2.0 * y); });
    Vector mb(prob.boundary_size());
    for (int s = 0; s < prob.boundary_size(); ++s) mb[s] = 0.3 * std::cos(1.0 + 2.0 * sm->coord(prob.trace_nodes()[s]).x);
    SemilinearLinearization lin(prob, zs, mb);
    const Vector g = lin.gradient();
    std::vector<std::pair<Vector, double>> gc, hc;
    const Vector probe = standard_normal(prob.boundary_size(), rng);
    for (int k = 0; k < 5; ++k) {
      Vector d = standard_normal(prob.boundary_size(), rng);
      gc.emplace_back(d, g.dot(prob.boundary_mass() * d));
      hc.emplace_back(d, lin.hessian_action(d).dot(prob.boundary_mass() * probe));
    }
    out.push_back(detail::fd_check(
        "semilinear parameter gradient",
        [&](const Vector& m) { return prob.objective(solve_semilinear_state(prob, zs, m)); }, gc, mb, rtol));
    out.push_back(detail::fd_check(
        "semilinear parameter Hessian action",
        [&](const Vector& m) { return semilinear_grad_m(prob, zs, m).dot(prob.boundary_mass() * probe); }, hc, mb,
        rtol));
  }
  OuuConfig oc;
  oc.beta = 1.0;
  oc.beta_schedule = {1.0};
  oc.gamma = 1e-3;
  oc.n_tr = 4;
  oc.seed = seed;
  for (auto mode : {TraceMode::Randomized, TraceMode::Eigenbasis}) {
    oc.trace_mode = mode;
    auto obj = OuuObjective::make(flow, gf, oc, z);
    const Vector g = obj.gradient(z);
    std::vector<std::pair<Vector, double>> cases;
    for (int k = 0; k < 5; ++k) {
      Vector d = standard_normal(20, rng);
      cases.emplace_back(d, g.dot(d));
    }
    out.push_back(detail::fd_check(std::string("OUU control gradient (") + to_string(mode) + ")",
                                   [&](const Vector& zz) { return obj.value(zz); }, cases, z, rtol));
  }
  {
    SaaObjective saa(flow, SaaObjective::draw(gf, 8, 1.0, seed), 1.0, 1e-3);
    const Vector g = saa.gradient(z);
    std::vector<std::pair<Vector, double>> cases;
    for (int k = 0; k < 5; ++k) {
      Vector d = standard_normal(20, rng);
      cases.emplace_back(d, g.dot(d));
    }
    out.push_back(detail::fd_check("SAA control gradient", [&](const Vector& zz) { return saa.value(zz); }, cases, z,
                                   rtol));
  }
  return out;
}

}  // namespace raouu
