/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SRDF_H
#define SRDF_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result of every fallible call.
 */
typedef enum SrdfStatus {
  SRDF_STATUS_OK = 0,
  /*
   A null pointer, invalid UTF-8 or a too-small buffer.
   */
  SRDF_STATUS_INVALID_ARGUMENT = 1,
  /*
   Bad configuration or input data.
   */
  SRDF_STATUS_VALIDATION = 2,
  /*
   Failure during computation.
   */
  SRDF_STATUS_RUNTIME = 3,
  /*
   A bug inside the library; the handle involved should be discarded.
   */
  SRDF_STATUS_PANIC = 4,
} SrdfStatus;

/*
 Run configuration.
 */
typedef struct SrdfConfig SrdfConfig;

/*
 Set of named photo-consistency priors. Starts with the built-in ones.
 */
typedef struct SrdfPriors SrdfPriors;

/*
 Optimized depth maps and fused mesh.
 */
typedef struct SrdfReconstruction SrdfReconstruction;

/*
 Calibrated views with images and silhouettes, plus ground-truth depth
 when known.
 */
typedef struct SrdfRig SrdfRig;

/*
 Photo-consistency callback. `colors` holds `count` RGB triples and
 `observed[k]` is nonzero when camera `k` of the group sees the sample
 (unobserved triples are zero). Must return a score in
 `(0, (1 + gamma_phi)^count]`. Called concurrently from worker threads.
 */
typedef double (*SrdfPriorFn)(void *user_data,
                              const double *colors,
                              const uint8_t *observed,
                              size_t count,
                              double sigma_c,
                              double gamma_phi);

/*
 Scalar summary of a reconstruction. Error fields are NaN when the rig has
 no ground truth.
 */
typedef struct SrdfSummary {
  size_t cameras;
  size_t vertices;
  size_t triangles;
  bool watertight;
  double initial_mae;
  double final_mae;
} SrdfSummary;

/*
 Surface comparison in world units.
 */
typedef struct SrdfMetrics {
  double accuracy;
  double completeness;
  double chamfer;
} SrdfMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null after a
 successful call. Valid until the next call into the library on the same
 thread.
 */
const char *srdf_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *srdf_version(void);

/*
 Default configuration.
 */
struct SrdfConfig *srdf_config_new(void);

/*
 Reads a TOML configuration file. Relative paths inside it resolve against
 the file's directory.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SrdfStatus srdf_config_load(const char *path, struct SrdfConfig **out);

/*
 Parses a TOML configuration from memory.

 # Safety
 `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SrdfStatus srdf_config_parse(const char *text, struct SrdfConfig **out);

/*
 # Safety
 `config` must come from this library and not be used afterwards.
 */
void srdf_config_free(struct SrdfConfig *config);

/*
 # Safety
 `config` must be a live handle.
 */
enum SrdfStatus srdf_config_set_seed(struct SrdfConfig *config, uint64_t seed);

/*
 Sets `paths.scene`.

 # Safety
 `config` must be a live handle and `path` a NUL-terminated string.
 */
enum SrdfStatus srdf_config_set_scene(struct SrdfConfig *config, const char *path);

struct SrdfPriors *srdf_priors_new(void);

/*
 # Safety
 `priors` must come from this library and not be used afterwards.
 */
void srdf_priors_free(struct SrdfPriors *priors);

/*
 Registers `callback` under `name` (replacing any prior of that name).
 Select it with `consistency.prior = "<name>"`. `user_data` is passed
 through unchanged and must outlive every run using the prior.

 # Safety
 `priors` must be a live handle, `name` a NUL-terminated string and
 `callback` safe to call from several threads at once.
 */
enum SrdfStatus srdf_priors_register(struct SrdfPriors *priors,
                                     const char *name,
                                     SrdfPriorFn callback,
                                     void *user_data);

/*
 Renders the scene named by `paths.scene` with the configured rig.

 # Safety
 `config` must be a live handle; `out` must be writable.
 */
enum SrdfStatus srdf_rig_synthesize(const struct SrdfConfig *config, struct SrdfRig **out);

/*
 Reads a dataset directory written by `srdf synth`.

 # Safety
 `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum SrdfStatus srdf_rig_read_dataset(const char *dir, struct SrdfRig **out);

/*
 # Safety
 `rig` must come from this library and not be used afterwards.
 */
void srdf_rig_free(struct SrdfRig *rig);

/*
 Number of cameras, or 0 for a null handle.

 # Safety
 `rig` must be null or a live handle.
 */
size_t srdf_rig_camera_count(const struct SrdfRig *rig);

/*
 Initializes, optimizes and fuses `rig` (left unchanged). `priors` may be
 null to use only the built-in priors.

 # Safety
 `config` and `rig` must be live handles, `priors` null or live, `out`
 writable.
 */
enum SrdfStatus srdf_reconstruct(const struct SrdfConfig *config,
                                 const struct SrdfPriors *priors,
                                 const struct SrdfRig *rig,
                                 struct SrdfReconstruction **out);

/*
 # Safety
 `rec` must come from this library and not be used afterwards.
 */
void srdf_reconstruction_free(struct SrdfReconstruction *rec);

/*
 # Safety
 `rec` must be a live handle; `out` must be writable.
 */
enum SrdfStatus srdf_reconstruction_summary(const struct SrdfReconstruction *rec,
                                            struct SrdfSummary *out);

/*
 Copies the mesh vertices as `x y z` triples into `xyz`, which must hold
 `3 * vertices` doubles.

 # Safety
 `rec` must be a live handle and `xyz` valid for `len` writes.
 */
enum SrdfStatus srdf_reconstruction_vertices(const struct SrdfReconstruction *rec,
                                             double *xyz,
                                             size_t len);

/*
 Copies the triangle vertex indices into `indices`, which must hold
 `3 * triangles` entries.

 # Safety
 `rec` must be a live handle and `indices` valid for `len` writes.
 */
enum SrdfStatus srdf_reconstruction_triangles(const struct SrdfReconstruction *rec,
                                              uint32_t *indices,
                                              size_t len);

/*
 Writes depth maps, meshes, energy log, report and manifest to `dir`.

 # Safety
 `rec` must be a live handle and `dir` a NUL-terminated string.
 */
enum SrdfStatus srdf_reconstruction_write(const struct SrdfReconstruction *rec, const char *dir);

/*
 Compares two mesh files (PLY or OBJ) with the configured sampling.

 # Safety
 `config` must be a live handle, the paths NUL-terminated strings and
 `out` writable.
 */
enum SrdfStatus srdf_evaluate(const struct SrdfConfig *config,
                              const char *mesh,
                              const char *gt,
                              struct SrdfMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRDF_H */
