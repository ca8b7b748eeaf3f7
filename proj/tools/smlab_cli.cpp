// Command-line front end over the C API.
//
//   smlab-cli table build   [--config FILE] [overrides]
//   smlab-cli run KIND      [--config FILE] [overrides]   KIND: stability | instability | linear-decay
//   smlab-cli norms FILE    [--config FILE] [--cache-dir DIR]
//   smlab-cli field KIND PATH [...]                        KIND: soliton | instability | stability
//   smlab-cli spec KIND                                    prints the default spec
//
// Exit codes: 0 success, 2 configuration or input error (including a missing
// table), 3 numerical failure, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "smlab/smlab.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code(smlab_status s) {
  switch (s) {
    case SMLAB_OK:
      return kExitOk;
    case SMLAB_ERR_PARAMETER:
    case SMLAB_ERR_RANGE:
    case SMLAB_ERR_IO:
    case SMLAB_ERR_CONFIG:
      return kExitConfig;
    case SMLAB_ERR_NUMERICAL:
      return kExitNumerical;
    case SMLAB_ERR_INTERNAL:
      break;
  }
  return kExitOther;
}

struct Failure {
  smlab_status status;
  std::string message;
};

void check(smlab_status s) {
  if (s != SMLAB_OK) throw Failure{s, smlab_last_error()};
}

std::string take(char* s) {
  std::string out(s ? s : "");
  smlab_string_free(s);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Failure{SMLAB_ERR_IO, "cannot read config file " + path};
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Flags that override spec keys. Unset flags leave the spec untouched.
struct Overrides {
  std::string config;
  std::optional<double> eps, gamma, alpha0, lambda0, dt, t_end, dt_growth, dt_max, monitor_every, r_min, r_max,
      kappa1, kappa2;
  std::optional<int> n, scheme, bumps, snapshot_every;
  std::optional<unsigned long long> seed;
  std::optional<std::string> output, cache_dir;

  void add_spec_flags(CLI::App* app) {
    app->add_option("--config", config, "JSON spec file (keys as in the README)");
    app->add_option("--eps", eps, "transition frequency scale (instability)");
    app->add_option("--gamma", gamma, "perturbation size");
    app->add_option("--alpha0", alpha0, "initial rotation (instability)");
    app->add_option("--lambda0", lambda0, "initial scale (instability)");
    app->add_option("--seed", seed, "seed of the stability perturbation");
    app->add_option("--bumps", bumps, "number of bumps in the stability perturbation");
    app->add_option("--dt", dt, "initial time step");
    app->add_option("--t-end", t_end, "final time");
    app->add_option("--dt-growth", dt_growth, "step growth rate");
    app->add_option("--dt-max", dt_max, "largest step");
    app->add_option("--monitor-every", monitor_every, "time between trajectory rows");
    app->add_option("--scheme", scheme, "1: Lie, 2: Strang splitting");
    app->add_option("--snapshot-every", snapshot_every, "rows between psi snapshots in <prefix>.snap (0: none)");
    app->add_option("--output", output, "output prefix for <prefix>.csv and <prefix>.json");
    add_table_flags(app);
  }

  void add_table_flags(CLI::App* app) {
    app->add_option("--cache-dir", cache_dir, "directory of cached tables");
    app->add_option("--r-min", r_min, "smallest grid radius");
    app->add_option("--r-max", r_max, "largest grid radius");
    app->add_option("--n", n, "number of grid nodes");
    app->add_option("--kappa1", kappa1, "start of the resolvability taper in xi r");
    app->add_option("--kappa2", kappa2, "end of the resolvability taper in xi r");
  }

  json patch() const {
    json p = json::object();
    auto put = [&](json& obj, const char* key, const auto& v) {
      if (v) obj[key] = *v;
    };
    put(p, "eps", eps);
    put(p, "gamma", gamma);
    put(p, "alpha0", alpha0);
    put(p, "lambda0", lambda0);
    put(p, "seed", seed);
    put(p, "bumps", bumps);
    put(p, "output", output);
    put(p, "cache_dir", cache_dir);
    json e = json::object(), g = json::object(), t = json::object();
    put(e, "dt", dt);
    put(e, "t_end", t_end);
    put(e, "dt_growth", dt_growth);
    put(e, "dt_max", dt_max);
    put(e, "monitor_every", monitor_every);
    put(e, "scheme", scheme);
    put(e, "snapshot_every", snapshot_every);
    put(g, "r_min", r_min);
    put(g, "r_max", r_max);
    put(g, "n", n);
    put(t, "kappa1", kappa1);
    put(t, "kappa2", kappa2);
    if (!e.empty()) p["evolution"] = e;
    if (!g.empty()) p["grid"] = g;
    if (!t.empty()) p["table"] = t;
    return p;
  }

  // Kind defaults, then the config file, then the flags. With enforce_kind a
  // config file of another kind is rejected; otherwise its kind is kept.
  std::string spec(const std::string& kind, bool enforce_kind = false) const {
    std::string s = take_default(kind);
    if (!config.empty()) {
      const std::string text = read_text(config);
      json j;
      try {
        j = json::parse(text);
      } catch (const json::exception& e) {
        throw Failure{SMLAB_ERR_CONFIG, "config file " + config + " is not valid JSON: " + e.what()};
      }
      if (enforce_kind && j.is_object() && j.contains("kind") && j["kind"] != kind)
        throw Failure{SMLAB_ERR_CONFIG, "config file kind '" + j["kind"].dump() + "' differs from '" + kind + "'"};
      s = merge(s, text);
    }
    return merge(s, patch().dump());
  }

  static std::string take_default(const std::string& kind) {
    char* out = nullptr;
    check(smlab_spec_default(kind.c_str(), &out));
    return take(out);
  }

  static std::string merge(const std::string& base, const std::string& patch) {
    char* out = nullptr;
    check(smlab_spec_merge(base.c_str(), patch.c_str(), &out));
    return take(out);
  }
};

struct Tables {
  smlab_tables* h = nullptr;
  explicit Tables(const std::string& spec, bool build) { check(smlab_tables_load(spec.c_str(), build ? 1 : 0, &h)); }
  ~Tables() { smlab_tables_destroy(h); }
  Tables(const Tables&) = delete;
  Tables& operator=(const Tables&) = delete;
};

struct Grid {
  smlab_grid* h = nullptr;
  Grid(double r_min, double r_max, int n) { check(smlab_grid_create(r_min, r_max, n, &h)); }
  ~Grid() { smlab_grid_destroy(h); }
  Grid(const Grid&) = delete;
  Grid& operator=(const Grid&) = delete;
};

void print_row(const smlab_row* r, void*) {
  std::fprintf(stderr, "t = %10.4f  mass = %.10e  LX = %.4e  lambda = %.6f  alpha = %+.6f\n", r->t, r->mass,
               r->lx_norm, r->lambda, r->alpha);
}

int cmd_table_build(const Overrides& o) {
  const std::string spec = o.spec("table-build");
  char* path = nullptr;
  check(smlab_spec_table_path(spec.c_str(), &path));
  std::cerr << "table: " << take(path) << "\n";
  Tables t(spec, true);
  char* info = nullptr;
  check(smlab_tables_info(t.h, &info));
  std::cout << take(info) << "\n";
  return kExitOk;
}

int cmd_run(const std::string& kind, const Overrides& o, bool quiet) {
  const std::string spec = o.spec(kind, true);
  Tables t(spec, false);
  smlab_result* r = nullptr;
  check(smlab_run(spec.c_str(), t.h, quiet ? nullptr : print_row, nullptr, &r));
  struct Holder {
    smlab_result* r;
    ~Holder() { smlab_result_destroy(r); }
  } holder{r};
  check(smlab_result_write(r));
  char* summary = nullptr;
  check(smlab_result_summary(r, &summary));
  const json j = json::parse(take(summary));
  std::cout << j["metrics"].dump(2) << "\n";
  const std::string prefix = j["spec"]["output"];
  std::cerr << "wrote " << prefix << ".csv and " << prefix << ".json\n";
  int completed = 0;
  check(smlab_result_completed(r, &completed));
  if (!completed) {
    std::cerr << "error: run stopped early: " << j["failure"].get<std::string>() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmd_norms(const std::string& file, const Overrides& o) {
  const std::string spec = o.spec("stability");
  Tables t(spec, false);
  char* out = nullptr;
  check(smlab_field_norms(file.c_str(), t.h, &out));
  std::cout << take(out) << "\n";
  return kExitOk;
}

struct FieldArgs {
  std::string kind, path;
  double alpha = 0.0, lambda = 1.0, eps = 0.05, gamma = 0.1;
  unsigned long long seed = 1;
  int bumps = 3;
};

int cmd_field(const FieldArgs& a, const Overrides& o) {
  const json spec = json::parse(o.spec("stability"));
  if (a.kind == "stability") {
    Tables t(spec.dump(), false);
    check(smlab_field_write_stability(a.path.c_str(), t.h, a.gamma, a.seed, a.bumps));
  } else {
    Grid g(spec["grid"]["r_min"], spec["grid"]["r_max"], spec["grid"]["n"]);
    if (a.kind == "soliton")
      check(smlab_field_write_soliton(a.path.c_str(), g.h, a.alpha, a.lambda));
    else
      check(smlab_field_write_instability(a.path.c_str(), g.h, a.eps, a.gamma, a.alpha, a.lambda));
  }
  std::cerr << "wrote " << a.path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for equivariant Schrodinger maps near the harmonic map"};
  app.require_subcommand(1);

  Overrides table_o;
  auto* table = app.add_subcommand("table", "eigen table cache");
  table->require_subcommand(1);
  auto* table_build = table->add_subcommand("build", "build (or load) the table and propagator for a spec");
  table_build->add_option("--config", table_o.config, "JSON spec file");
  table_o.add_table_flags(table_build);

  Overrides run_o;
  std::string run_kind;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "run an experiment and write <output>.csv and <output>.json");
  run->add_option("kind", run_kind, "stability | instability | linear-decay")
      ->required()
      ->check(CLI::IsMember({"stability", "instability", "linear-decay"}));
  run->add_flag("--quiet", quiet, "do not print trajectory rows");
  run_o.add_spec_flags(run);

  Overrides norms_o;
  std::string norms_file;
  auto* norms = app.add_subcommand("norms", "norms of a field file against the cached table");
  norms->add_option("file", norms_file, "field file")->required();
  norms->add_option("--config", norms_o.config, "JSON spec file selecting grid and table");
  norms_o.add_table_flags(norms);

  Overrides field_o;
  FieldArgs fa;
  auto* field = app.add_subcommand("field", "write a field file on the spec grid");
  field->add_option("kind", fa.kind, "soliton | instability | stability")
      ->required()
      ->check(CLI::IsMember({"soliton", "instability", "stability"}));
  field->add_option("path", fa.path, "output file")->required();
  field->add_option("--alpha", fa.alpha, "rotation (soliton, instability)");
  field->add_option("--lambda", fa.lambda, "scale (soliton, instability)");
  field->add_option("--eps", fa.eps, "transition scale (instability)");
  field->add_option("--gamma", fa.gamma, "perturbation size (instability, stability)");
  field->add_option("--seed", fa.seed, "seed (stability)");
  field->add_option("--bumps", fa.bumps, "number of bumps (stability)");
  field->add_option("--config", field_o.config, "JSON spec file selecting grid and table");
  field_o.add_table_flags(field);

  std::string spec_kind;
  auto* spec = app.add_subcommand("spec", "print the default spec of a kind as JSON");
  spec->add_option("kind", spec_kind, "stability | instability | linear-decay | table-build")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (table_build->parsed()) return cmd_table_build(table_o);
    if (run->parsed()) return cmd_run(run_kind, run_o, quiet);
    if (norms->parsed()) return cmd_norms(norms_file, norms_o);
    if (field->parsed()) return cmd_field(fa, field_o);
    if (spec->parsed()) {
      std::cout << Overrides::take_default(spec_kind) << "\n";
      return kExitOk;
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << smlab_status_name(f.status) << "): " << f.message << "\n";
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
