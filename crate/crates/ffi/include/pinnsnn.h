#ifndef PINNSNN_H
#define PINNSNN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_ARGUMENT = 2,
  PS_STATUS_IO = 3,
  PS_STATUS_PARSE = 4,
  PS_STATUS_SHAPE = 5,
  PS_STATUS_RUNTIME = 6,
  PS_STATUS_PANIC = 7,
} PsStatus;

// Trained network.
typedef struct PsAnn PsAnn;

// Converted spiking network.
typedef struct PsSnn PsSnn;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string.
// Valid until the next call on the same thread.
const char *ps_last_error(void);

// Library version as a static string.
const char *ps_version(void);

// Staircase activation of one value; `out` receives the averaged output.
//
// # Safety
// `out` must point to a writable `double`.
enum PsStatus ps_clip_floor(double z,
                            size_t timesteps,
                            double theta_pos,
                            double theta_neg,
                            double *out);

// Loads a model file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a writable pointer slot.
enum PsStatus ps_ann_load(const char *path, struct PsAnn **out);

// Releases a handle from [`ps_ann_load`]. Null is ignored.
//
// # Safety
// `ann` must come from [`ps_ann_load`] and not be used afterwards.
void ps_ann_free(struct PsAnn *ann);

// Input and output widths of a network.
//
// # Safety
// `ann` must be a live handle; `input_dim` and `output_dim` writable.
enum PsStatus ps_ann_dims(const struct PsAnn *ann, size_t *input_dim, size_t *output_dim);

// Network output at `n` points.
//
// # Safety
// `points` must hold `n * input_dim` values and `out` `out_len` values.
enum PsStatus ps_ann_forward(const struct PsAnn *ann,
                             const double *points,
                             size_t n,
                             double *out,
                             size_t out_len);

// Loads an SNN file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a writable pointer slot.
enum PsStatus ps_snn_load(const char *path, struct PsSnn **out);

// Converts a network with thresholds fitted on `points`, then calibrates.
//
// `readout`: 0 membrane, 1 quantized. `mode`: 0 none, 1 light,
// 2 advanced (`steps` Adam steps at rate `lr`).
//
// # Safety
// `ann` must be live, `points` must hold `n * input_dim` values and `out`
// must be a writable pointer slot.
enum PsStatus ps_snn_convert(const struct PsAnn *ann,
                             const double *points,
                             size_t n,
                             size_t timesteps,
                             uint32_t readout,
                             uint32_t mode,
                             size_t steps,
                             double lr,
                             struct PsSnn **out);

// Releases a handle from [`ps_snn_load`] or [`ps_snn_convert`]. Null is
// ignored.
//
// # Safety
// `snn` must be such a handle and not be used afterwards.
void ps_snn_free(struct PsSnn *snn);

// Simulation length of an SNN.
//
// # Safety
// `snn` must be live and `timesteps` writable.
enum PsStatus ps_snn_timesteps(const struct PsSnn *snn, size_t *timesteps);

// Averaged SNN output at `n` points; `event != 0` runs the step-by-step
// simulation, otherwise the closed-form rate pass.
//
// # Safety
// `points` must hold `n * input_dim` values and `out` `out_len` values.
enum PsStatus ps_snn_forward(const struct PsSnn *snn,
                             const double *points,
                             size_t n,
                             int32_t event,
                             double *out,
                             size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINNSNN_H */
