#ifndef SMLAB_SMLAB_H
#define SMLAB_SMLAB_H

/* C interface to the smlab core.
 *
 * Every function returns an smlab_status. On failure the message of the most
 * recent error on the calling thread is available from smlab_last_error().
 * Strings returned through char** arguments are allocated by the library and
 * must be released with smlab_string_free(). Handles are released with their
 * matching *_destroy function; passing NULL to a destroy function is a no-op.
 *
 * Experiment specifications cross the interface as JSON text with the keys
 * of the C++ ExperimentSpec (see README.md). */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SMLAB_API __declspec(dllexport)
#else
#define SMLAB_API __attribute__((visibility("default")))
#endif

typedef enum smlab_status {
  SMLAB_OK = 0,
  SMLAB_ERR_PARAMETER = 1, /* invalid arguments or violated preconditions */
  SMLAB_ERR_RANGE = 2,     /* request outside the grid or table coverage */
  SMLAB_ERR_NUMERICAL = 3, /* integration, fit or consistency check failed */
  SMLAB_ERR_IO = 4,        /* file missing, unreadable or malformed */
  SMLAB_ERR_CONFIG = 5,    /* experiment specification rejected */
  SMLAB_ERR_INTERNAL = 6
} smlab_status;

typedef struct smlab_grid smlab_grid;
typedef struct smlab_tables smlab_tables;
typedef struct smlab_result smlab_result;

/* One trajectory row; fields mirror the CSV columns. */
typedef struct smlab_row {
  double t;
  double mass;
  double lx_norm;
  double lambda;
  double alpha;
  double psi2_re;
  double psi2_im;
  double a2;
  double local_energy;
} smlab_row;

typedef void (*smlab_row_callback)(const smlab_row* row, void* user);

/* Errors and memory. */
SMLAB_API const char* smlab_last_error(void);
SMLAB_API const char* smlab_status_name(smlab_status s);
SMLAB_API void smlab_string_free(char* s);

/* Log-uniform radial grid. */
SMLAB_API smlab_status smlab_grid_create(double r_min, double r_max, int n, smlab_grid** out);
SMLAB_API void smlab_grid_destroy(smlab_grid* g);
SMLAB_API smlab_status smlab_grid_size(const smlab_grid* g, int* out);
/* Copies the nodes into out[0 .. len-1]; len must equal the grid size. */
SMLAB_API smlab_status smlab_grid_nodes(const smlab_grid* g, double* out, int len);
SMLAB_API smlab_status smlab_grid_hash(const smlab_grid* g, char** out);

/* Solitons Q^m_{alpha,lambda} and maps on a grid. Arrays have the grid size. */
SMLAB_API smlab_status smlab_soliton_profile(const smlab_grid* g, int m, double alpha, double lambda, double* u1,
                                             double* u2, double* u3);
SMLAB_API smlab_status smlab_soliton_energy(const smlab_grid* g, int m, double alpha, double lambda, double* out);
SMLAB_API smlab_status smlab_map_energy(const smlab_grid* g, int m, const double* u1, const double* u2,
                                        const double* u3, double* out);
/* Reduced field psi of a 1-equivariant map in the Coulomb gauge. */
SMLAB_API smlab_status smlab_reduced_field(const smlab_grid* g, const double* u1, const double* u2, const double* u3,
                                           double* psi_re, double* psi_im);
/* Map rebuilt from psi alone (elliptic reconstruction followed by the frame
 * integration). */
SMLAB_API smlab_status smlab_reconstruct_map(const smlab_grid* g, const double* psi_re, const double* psi_im,
                                             double* u1, double* u2, double* u3);

/* Experiment specifications. */
/* Default spec of a kind ("stability", "instability", "linear-decay",
 * "table-build"). */
SMLAB_API smlab_status smlab_spec_default(const char* kind, char** out_json);
/* Keys present in patch_json override those of base_json; the result is
 * validated and returned in canonical form. */
SMLAB_API smlab_status smlab_spec_merge(const char* base_json, const char* patch_json, char** out_json);
/* Cache file that holds the eigen table of a spec. */
SMLAB_API smlab_status smlab_spec_table_path(const char* spec_json, char** out);

/* Eigen table and propagator for the grid and table parameters of a spec,
 * read from its cache_dir. With build = 0 a missing table fails with
 * SMLAB_ERR_IO and a message naming the expected path. */
SMLAB_API smlab_status smlab_tables_load(const char* spec_json, int build, smlab_tables** out);
SMLAB_API void smlab_tables_destroy(smlab_tables* t);
/* JSON object with grid_hash, table_hash, xi_count, xi_min, xi_max. */
SMLAB_API smlab_status smlab_tables_info(const smlab_tables* t, char** out_json);
/* LX norm and L2 norm of psi on the table grid. */
SMLAB_API smlab_status smlab_tables_norms(const smlab_tables* t, const double* psi_re, const double* psi_im, int len,
                                          double* l2, double* lx);

/* Runs the experiment described by spec_json. The callback (optional) sees
 * each trajectory row as it is produced. */
SMLAB_API smlab_status smlab_run(const char* spec_json, const smlab_tables* t, smlab_row_callback cb, void* user,
                                 smlab_result** out);
SMLAB_API void smlab_result_destroy(smlab_result* r);
SMLAB_API smlab_status smlab_result_completed(const smlab_result* r, int* out);
SMLAB_API smlab_status smlab_result_row_count(const smlab_result* r, int* out);
SMLAB_API smlab_status smlab_result_row(const smlab_result* r, int i, smlab_row* out);
/* SMLAB_ERR_PARAMETER if the metric does not exist for this kind. */
SMLAB_API smlab_status smlab_result_metric(const smlab_result* r, const char* name, double* out);
SMLAB_API smlab_status smlab_result_summary(const smlab_result* r, char** out_json);
/* Writes <output>.csv and <output>.json for the spec's output prefix. */
SMLAB_API smlab_status smlab_result_write(const smlab_result* r);

/* Field files ("# smlab-field map" or "# smlab-field psi"). */
SMLAB_API smlab_status smlab_field_write_soliton(const char* path, const smlab_grid* g, double alpha, double lambda);
SMLAB_API smlab_status smlab_field_write_instability(const char* path, const smlab_grid* g, double eps, double gamma,
                                                     double alpha0, double lambda0);
SMLAB_API smlab_status smlab_field_write_stability(const char* path, const smlab_tables* t, double gamma,
                                                   unsigned long long seed, int bumps);
/* JSON object of norms of a field file against a table on the same grid. */
SMLAB_API smlab_status smlab_field_norms(const char* path, const smlab_tables* t, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
