#include "smlab/smlab.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include <json.hpp>

#include "smlab/error.hpp"
#include "smlab/experiments.hpp"
#include "smlab/gauge.hpp"
#include "smlab/soliton.hpp"

struct smlab_grid {
  smlab::RadialGrid grid;
};

struct smlab_tables {
  smlab::TableBundle bundle;
};

struct smlab_result {
  smlab::ExperimentResult result;
};

namespace {

thread_local std::string g_last_error;

smlab_status fail(smlab_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs f and converts any exception into a status plus the thread-local message.
template <class F>
smlab_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return SMLAB_OK;
  } catch (const smlab::Error& e) {
    return fail(static_cast<smlab_status>(e.status()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SMLAB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SMLAB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SMLAB_ERR_INTERNAL, "unknown exception");
  }
}

void need(const void* p, const char* what) {
  if (!p) throw smlab::ParameterError(std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

smlab::SphereProfile map_in(int n, const double* u1, const double* u2, const double* u3) {
  need(u1, "u1");
  need(u2, "u2");
  need(u3, "u3");
  smlab::SphereProfile u;
  u.u1.assign(u1, u1 + n);
  u.u2.assign(u2, u2 + n);
  u.u3.assign(u3, u3 + n);
  return u;
}

void map_out(const smlab::SphereProfile& u, double* u1, double* u2, double* u3) {
  need(u1, "u1");
  need(u2, "u2");
  need(u3, "u3");
  std::copy(u.u1.begin(), u.u1.end(), u1);
  std::copy(u.u2.begin(), u.u2.end(), u2);
  std::copy(u.u3.begin(), u.u3.end(), u3);
}

smlab::CVec psi_in(int n, const double* re, const double* im) {
  need(re, "psi_re");
  need(im, "psi_im");
  smlab::CVec psi(n);
  for (int j = 0; j < n; ++j) psi[j] = smlab::cplx(re[j], im[j]);
  return psi;
}

smlab_row row_out(const smlab::TrajectoryRow& r) {
  return smlab_row{r.t,    r.mass, r.lx_norm, r.lambda, r.alpha, r.psi2_at_1.real(), r.psi2_at_1.imag(), r.a2_at_1,
                   r.local_energy};
}

smlab::ExperimentSpec spec_in(const char* json) {
  need(json, "spec_json");
  return smlab::spec_from_json(json);
}

}  // namespace

extern "C" {

const char* smlab_last_error(void) { return g_last_error.c_str(); }

const char* smlab_status_name(smlab_status s) {
  switch (s) {
    case SMLAB_OK:
      return "ok";
    case SMLAB_ERR_PARAMETER:
      return "parameter error";
    case SMLAB_ERR_RANGE:
      return "range error";
    case SMLAB_ERR_NUMERICAL:
      return "numerical error";
    case SMLAB_ERR_IO:
      return "io error";
    case SMLAB_ERR_CONFIG:
      return "config error";
    case SMLAB_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

void smlab_string_free(char* s) { std::free(s); }

smlab_status smlab_grid_create(double r_min, double r_max, int n, smlab_grid** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    auto* h = new smlab_grid{smlab::RadialGrid::log_uniform(r_min, r_max, n)};
    *out = h;
  });
}

void smlab_grid_destroy(smlab_grid* g) { delete g; }

smlab_status smlab_grid_size(const smlab_grid* g, int* out) {
  return guard([&] {
    need(g, "grid");
    need(out, "out");
    *out = g->grid.size();
  });
}

smlab_status smlab_grid_nodes(const smlab_grid* g, double* out, int len) {
  return guard([&] {
    need(g, "grid");
    need(out, "out");
    smlab::require(len == g->grid.size(), "buffer length differs from the grid size");
    std::copy(g->grid.nodes().begin(), g->grid.nodes().end(), out);
  });
}

smlab_status smlab_grid_hash(const smlab_grid* g, char** out) {
  return guard([&] {
    need(g, "grid");
    need(out, "out");
    *out = dup_string(g->grid.hash());
  });
}

smlab_status smlab_soliton_profile(const smlab_grid* g, int m, double alpha, double lambda, double* u1, double* u2,
                                   double* u3) {
  return guard([&] {
    need(g, "grid");
    map_out(smlab::soliton_profile({m, alpha, lambda}, g->grid), u1, u2, u3);
  });
}

smlab_status smlab_soliton_energy(const smlab_grid* g, int m, double alpha, double lambda, double* out) {
  return guard([&] {
    need(g, "grid");
    need(out, "out");
    *out = smlab::soliton_energy({m, alpha, lambda}, g->grid);
  });
}

smlab_status smlab_map_energy(const smlab_grid* g, int m, const double* u1, const double* u2, const double* u3,
                              double* out) {
  return guard([&] {
    need(g, "grid");
    need(out, "out");
    *out = smlab::energy(g->grid, map_in(g->grid.size(), u1, u2, u3), m);
  });
}

smlab_status smlab_reduced_field(const smlab_grid* g, const double* u1, const double* u2, const double* u3,
                                 double* psi_re, double* psi_im) {
  return guard([&] {
    need(g, "grid");
    need(psi_re, "psi_re");
    need(psi_im, "psi_im");
    const smlab::SphereProfile u = map_in(g->grid.size(), u1, u2, u3);
    const smlab::CVec psi = smlab::derive_fields(g->grid, u, smlab::coulomb_frame(g->grid, u)).psi;
    for (size_t j = 0; j < psi.size(); ++j) {
      psi_re[j] = psi[j].real();
      psi_im[j] = psi[j].imag();
    }
  });
}

smlab_status smlab_reconstruct_map(const smlab_grid* g, const double* psi_re, const double* psi_im, double* u1,
                                   double* u2, double* u3) {
  return guard([&] {
    need(g, "grid");
    const smlab::CVec psi = psi_in(g->grid.size(), psi_re, psi_im);
    const smlab::ReconstructedMap m = smlab::reconstruct_map(g->grid, smlab::fields_from_psi(g->grid, psi));
    map_out(m.u, u1, u2, u3);
  });
}

smlab_status smlab_spec_default(const char* kind, char** out_json) {
  return guard([&] {
    need(kind, "kind");
    need(out_json, "out_json");
    *out_json = dup_string(smlab::spec_to_json(smlab::default_spec(smlab::parse_experiment_kind(kind))));
  });
}

smlab_status smlab_spec_merge(const char* base_json, const char* patch_json, char** out_json) {
  return guard([&] {
    need(patch_json, "patch_json");
    need(out_json, "out_json");
    const smlab::ExperimentSpec base = spec_in(base_json);
    const smlab::ExperimentSpec s = smlab::spec_from_json(patch_json, base);
    smlab::validate(s);
    *out_json = dup_string(smlab::spec_to_json(s));
  });
}

smlab_status smlab_spec_table_path(const char* spec_json, char** out) {
  return guard([&] {
    need(out, "out");
    const smlab::ExperimentSpec s = spec_in(spec_json);
    *out = dup_string(smlab::EigenTable::cache_path(s.cache_dir, s.grid.make(), s.table));
  });
}

smlab_status smlab_tables_load(const char* spec_json, int build, smlab_tables** out) {
  return guard([&] {
    need(out, "out");
    *out = nullptr;
    auto* h = new smlab_tables{smlab::load_tables(spec_in(spec_json), build != 0)};
    *out = h;
  });
}

void smlab_tables_destroy(smlab_tables* t) { delete t; }

smlab_status smlab_tables_info(const smlab_tables* t, char** out_json) {
  return guard([&] {
    need(t, "tables");
    need(out_json, "out_json");
    const smlab::EigenTable& e = t->bundle.table;
    const nlohmann::json j{{"grid_hash", e.grid().hash()},
                           {"table_hash", e.hash()},
                           {"xi_count", e.size()},
                           {"xi_min", e.xi().front()},
                           {"xi_max", e.xi().back()}};
    *out_json = dup_string(j.dump(2));
  });
}

smlab_status smlab_tables_norms(const smlab_tables* t, const double* psi_re, const double* psi_im, int len, double* l2,
                                double* lx) {
  return guard([&] {
    need(t, "tables");
    need(l2, "l2");
    need(lx, "lx");
    const smlab::EigenTable& e = t->bundle.table;
    smlab::require(len == e.grid().size(), "buffer length differs from the grid size");
    const smlab::CVec psi = psi_in(len, psi_re, psi_im);
    *l2 = smlab::l2_norm(e.grid(), psi);
    *lx = smlab::norm_LX(e, psi);
  });
}

smlab_status smlab_run(const char* spec_json, const smlab_tables* t, smlab_row_callback cb, void* user,
                       smlab_result** out) {
  return guard([&] {
    need(t, "tables");
    need(out, "out");
    *out = nullptr;
    const smlab::ExperimentSpec s = spec_in(spec_json);
    smlab::RowCallback on_row;
    if (cb) {
      on_row = [cb, user](const smlab::TrajectoryRow& r, const smlab::EvolutionState&) {
        const smlab_row row = row_out(r);
        cb(&row, user);
      };
    }
    auto* h = new smlab_result{smlab::run_experiment(s, t->bundle.table, t->bundle.propagator, on_row)};
    *out = h;
  });
}

void smlab_result_destroy(smlab_result* r) { delete r; }

smlab_status smlab_result_completed(const smlab_result* r, int* out) {
  return guard([&] {
    need(r, "result");
    need(out, "out");
    *out = r->result.trajectory.completed ? 1 : 0;
  });
}

smlab_status smlab_result_row_count(const smlab_result* r, int* out) {
  return guard([&] {
    need(r, "result");
    need(out, "out");
    *out = static_cast<int>(r->result.trajectory.rows.size());
  });
}

smlab_status smlab_result_row(const smlab_result* r, int i, smlab_row* out) {
  return guard([&] {
    need(r, "result");
    need(out, "out");
    const auto& rows = r->result.trajectory.rows;
    if (i < 0 || i >= static_cast<int>(rows.size())) throw smlab::RangeError("row index out of range");
    *out = row_out(rows[i]);
  });
}

smlab_status smlab_result_metric(const smlab_result* r, const char* name, double* out) {
  return guard([&] {
    need(r, "result");
    need(name, "name");
    need(out, "out");
    const auto it = r->result.metrics.find(name);
    if (it == r->result.metrics.end()) throw smlab::ParameterError(std::string("no metric named ") + name);
    *out = it->second;
  });
}

smlab_status smlab_result_summary(const smlab_result* r, char** out_json) {
  return guard([&] {
    need(r, "result");
    need(out_json, "out_json");
    *out_json = dup_string(smlab::summary_json(r->result));
  });
}

smlab_status smlab_result_write(const smlab_result* r) {
  return guard([&] {
    need(r, "result");
    smlab::write_outputs(r->result);
  });
}

smlab_status smlab_field_write_soliton(const char* path, const smlab_grid* g, double alpha, double lambda) {
  return guard([&] {
    need(path, "path");
    need(g, "grid");
    smlab::write_map_file(path, g->grid, smlab::soliton_profile({1, alpha, lambda}, g->grid));
  });
}

smlab_status smlab_field_write_instability(const char* path, const smlab_grid* g, double eps, double gamma,
                                           double alpha0, double lambda0) {
  return guard([&] {
    need(path, "path");
    need(g, "grid");
    smlab::write_map_file(path, g->grid, smlab::make_instability_data(eps, gamma, alpha0, lambda0, g->grid));
  });
}

smlab_status smlab_field_write_stability(const char* path, const smlab_tables* t, double gamma,
                                         unsigned long long seed, int bumps) {
  return guard([&] {
    need(path, "path");
    need(t, "tables");
    const smlab::EigenTable& e = t->bundle.table;
    smlab::write_map_file(path, e.grid(), smlab::make_stability_data(e, gamma, seed, bumps));
  });
}

smlab_status smlab_field_norms(const char* path, const smlab_tables* t, char** out_json) {
  return guard([&] {
    need(path, "path");
    need(t, "tables");
    need(out_json, "out_json");
    const smlab::FieldFile f = smlab::read_field_file(path);
    nlohmann::json j = nlohmann::json::object();
    j["kind"] = f.kind == smlab::FieldFile::Kind::kMap ? "map" : "psi";
    for (const auto& [k, v] : smlab::field_norms(f, t->bundle.table)) j[k] = v;
    *out_json = dup_string(j.dump(2));
  });
}

}  // extern "C"
