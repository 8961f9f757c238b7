#ifndef MMTWIN_H
#define MMTWIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmtPathKind {
  MMT_PATH_KIND_LOS = 0,
  MMT_PATH_KIND_SPECULAR = 1,
  MMT_PATH_KIND_SCATTERED = 2,
} MmtPathKind;

typedef enum MmtStatus {
  MMT_STATUS_OK = 0,
  MMT_STATUS_NULL_POINTER = 1,
  MMT_STATUS_INVALID_ARGUMENT = 2,
  MMT_STATUS_IO = 3,
  MMT_STATUS_PARSE = 4,
  MMT_STATUS_NOT_FOUND = 5,
  MMT_STATUS_NUMERIC = 6,
  MMT_STATUS_PANIC = 7,
} MmtStatus;

/**
 * Multipath components of one traced link.
 */
typedef struct MmtChannel MmtChannel;

/**
 * Scene geometry plus one material per surface region.
 */
typedef struct MmtScene MmtScene;

/**
 * Ray-launching options; start from [`mmt_trace_options_default`].
 */
typedef struct MmtTraceOptions {
  size_t n_rays;
  uint32_t max_depth;
  uint64_t seed;
  double frequency_hz;
} MmtTraceOptions;

/**
 * One multipath component.
 */
typedef struct MmtMpc {
  double delay_s;
  double aod_az;
  double aod_el;
  double aoa_az;
  double aoa_el;
  double amplitude_re;
  double amplitude_im;
  enum MmtPathKind kind;
} MmtMpc;

/**
 * Snapshot metrics; `has_k_factor` is 0 when there is no LoS component.
 */
typedef struct MmtMetrics {
  double path_loss_db;
  double tau_rms_s;
  double angular_spread_rad;
  double k_factor_db;
  uint8_t has_k_factor;
} MmtMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * NUL-terminated library version string (static storage).
 */
const char *mmt_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mmt_last_error_message(char *buf, size_t len);

struct MmtTraceOptions mmt_trace_options_default(void);

/**
 * Loads a PLY mesh (regions from a face property or `<path>.regions`).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum MmtStatus mmt_scene_load(const char *path, struct MmtScene **out);

/**
 * Builds a scene from `n_triangles` triangles: `vertices` holds 9 doubles per
 * triangle, `regions` one id per triangle. Degenerate triangles are dropped;
 * zero triangles give free space.
 *
 * # Safety
 * `vertices` must hold `9 * n_triangles` doubles, `regions` `n_triangles`
 * ids; `out` must be a valid pointer.
 */
enum MmtStatus mmt_scene_from_triangles(const double *vertices,
                                        const uint32_t *regions,
                                        size_t n_triangles,
                                        struct MmtScene **out);

/**
 * # Safety
 * `scene` must be null or a handle from this library, not yet freed.
 */
void mmt_scene_free(struct MmtScene *scene);

/**
 * Number of surface regions (0 for a null handle).
 *
 * # Safety
 * `scene` must be null or a live handle.
 */
size_t mmt_scene_region_count(const struct MmtScene *scene);

/**
 * Sets the material of one region (`sigma` S/m, relative permittivity,
 * scattering coefficient in (0, 1)).
 *
 * # Safety
 * `scene` must be a live handle.
 */
enum MmtStatus mmt_scene_set_material(struct MmtScene *scene,
                                      uint32_t region,
                                      double sigma,
                                      double eps_r,
                                      double scattering);

/**
 * Traces one link and synthesises its multipath components.
 *
 * # Safety
 * `scene` must be a live handle, `tx`/`rx` point to 3 doubles, `options` is
 * null (defaults) or valid, `out` is a valid pointer.
 */
enum MmtStatus mmt_trace(const struct MmtScene *scene,
                         const struct MmtTraceOptions *options,
                         const double *tx,
                         const double *rx,
                         struct MmtChannel **out);

/**
 * # Safety
 * `channel` must be null or a live handle.
 */
void mmt_channel_free(struct MmtChannel *channel);

/**
 * # Safety
 * `channel` must be null or a live handle.
 */
size_t mmt_channel_len(const struct MmtChannel *channel);

/**
 * Copies MPC `index` into `out`.
 *
 * # Safety
 * `channel` must be a live handle and `out` a valid pointer.
 */
enum MmtStatus mmt_channel_get(const struct MmtChannel *channel, size_t index, struct MmtMpc *out);

/**
 * Path loss, RMS delay spread, arrival angular spread and K-factor.
 *
 * # Safety
 * `channel` must be a live handle and `out` a valid pointer.
 */
enum MmtStatus mmt_channel_metrics(const struct MmtChannel *channel, struct MmtMetrics *out);

/**
 * Best beam of an evenly spaced sectored codebook under the default
 * 802.11ad link budget; writes the beam index and its throughput (Mbit/s).
 *
 * # Safety
 * `channel` must be a live handle; `beam` and `throughput_mbps` valid pointers.
 */
enum MmtStatus mmt_select_beam(const struct MmtChannel *channel,
                               size_t n_beams,
                               double g_max_dbi,
                               double g_min_dbi,
                               double beamwidth_rad,
                               size_t *beam,
                               double *throughput_mbps);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMTWIN_H */
