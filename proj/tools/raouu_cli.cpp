#include "raouu/experiments.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string config_path;
  std::string profile = "paper_section6";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

/// Profile, then config file, then command-line flags. RAOUU_OUT_DIR replaces
/// the default output directory but not one given in a config file or flag.
raouu::RunConfig resolve(const Options& o) {
  raouu::RunConfig c = raouu::profile(o.profile);
  if (const char* env = std::getenv("RAOUU_OUT_DIR"); env && *env) c.out_dir = env;
  if (!o.config_path.empty()) c = raouu::load_config(o.config_path, c);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.threads) c.threads = *o.threads;
  c.validate();
  return c;
}

void save_config(const raouu::RunConfig& c) {
  std::filesystem::create_directories(c.out_dir);
  std::ofstream f(raouu::out_path(c, "config.json"));
  if (!f) throw raouu::IoError("cannot write config.json in '" + c.out_dir + "'");
  f << raouu::serialize(c) << '\n';
}

int truncation(const raouu::RunConfig& c) {
  save_config(c);
  const auto r = raouu::run_truncation_study(c);
  raouu::write_truncation_csv(raouu::out_path(c, "truncation.csv"), r);
  std::cout << "slope_lin=" << raouu::fmt(r.slope_lin) << " slope_quad=" << raouu::fmt(r.slope_quad) << '\n';
  return 0;
}

int optimize(const raouu::RunConfig& c) {
  save_config(c);
  const auto o = raouu::run_optimize(c, &std::cout);
  raouu::write_optimize_outputs(c, o);
  for (const auto& st : o.stages)
    if (st.result.degraded) std::cerr << "warning: beta=" << st.beta << ": " << st.result.message << '\n';
  std::cout << "mean z0=" << raouu::fmt(o.at_z0.mc.mean) << " z_opt=" << raouu::fmt(o.at_opt.mc.mean) << '\n'
            << "variance z0=" << raouu::fmt(o.at_z0.mc.variance) << " z_opt=" << raouu::fmt(o.at_opt.mc.variance)
            << '\n';
  return 0;
}

int compare(const raouu::RunConfig& c) {
  save_config(c);
  const auto rows = raouu::run_compare_mc(c, &std::cout);
  raouu::write_compare_csv(raouu::out_path(c, "compare_mc.csv"), rows);
  for (const auto& r : rows)
    if (r.degraded) std::cerr << "warning: " << r.method << " level " << r.level << " stopped on a failed line search\n";
  return 0;
}

int sample_field(const raouu::RunConfig& c) {
  save_config(c);
  raouu::run_sample_field(c);
  return 0;
}

int check_derivatives(const raouu::RunConfig& c) {
  bool ok = true;
  for (const auto& r : raouu::check_derivatives(c.seed)) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " rel_error=" << raouu::fmt(r.rel_error)
              << " slope=" << raouu::fmt(r.slope) << '\n';
    ok = ok && r.pass;
  }
  return ok ? 0 : kExitIo;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-averse optimal control of PDEs under uncertainty"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config_path, "JSON config overlaying the profile")->check(CLI::ExistingFile);
  app.add_option("--profile", o.profile, "Named default set")->check(CLI::IsMember(raouu::profile_names()));
  app.add_option("--seed", o.seed, "Master random seed");
  app.add_option("--out", o.out, "Output directory (default: $RAOUU_OUT_DIR or raouu_out)");
  app.add_option("--threads", o.threads, "Maximum concurrent PDE solves")->check(CLI::PositiveNumber);

  using Command = int (*)(const raouu::RunConfig&);
  Command command = nullptr;
  const std::pair<const char*, Command> commands[] = {
      {"truncation-study", truncation},
      {"optimize", optimize},
      {"compare-mc", compare},
      {"sample-field", sample_field},
      {"check-derivatives", check_derivatives},
  };
  const char* help[] = {"Surrogate truncation errors against eps", "Risk-averse optimal control with beta continuation",
                        "Surrogate and SAA optima scored by Monte Carlo", "Write prior realizations",
                        "Finite-difference checks of all derivatives"};
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    auto* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->fallthrough();
    sub->callback([&command, f = commands[i].second] { command = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  raouu::RunConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    return command(cfg);
  } catch (const raouu::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const raouu::InternalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const raouu::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}
