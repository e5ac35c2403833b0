#ifndef PROTO_CURRICULUM_H
#define PROTO_CURRICULUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Version of the on-disk formats this library reads.
#define PC_FORMAT_VERSION 1

typedef enum PcStatus {
  PC_STATUS_OK = 0,
  PC_STATUS_NULL_ARGUMENT = 1,
  PC_STATUS_INVALID_UTF8 = 2,
  PC_STATUS_IO = 3,
  PC_STATUS_FORMAT = 4,
  PC_STATUS_OUT_OF_RANGE = 5,
  PC_STATUS_BUFFER_TOO_SMALL = 6,
  PC_STATUS_INTERNAL = 7,
} PcStatus;

typedef enum PcScheduleMode {
  PC_SCHEDULE_MODE_TAU_RANGE = 0,
  PC_SCHEDULE_MODE_EFFECTIVE_SIZE = 1,
} PcScheduleMode;

// Opaque sampler handle.
typedef struct PcSampler PcSampler;

typedef struct PcSamplerInfo {
  uint64_t n_samples;
  uint64_t total_epochs;
  uint64_t n_draws;
  uint64_t master_seed;
  enum PcScheduleMode mode;
  double tau_start;
  double tau_end;
} PcSamplerInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer is
// valid until the next failing call on the same thread.
const char *pc_last_error_message(void);

uint32_t pc_format_version(void);

// Opens the artifacts in `output_dir` and stores a new handle in `*out`.
//
// # Safety
// `output_dir` must be a NUL-terminated string and `out` a valid pointer.
enum PcStatus pc_sampler_open(const char *output_dir, struct PcSampler **out);

// Releases a handle. NULL is ignored.
//
// # Safety
// `sampler` must come from [`pc_sampler_open`] and not be used afterwards.
void pc_sampler_free(struct PcSampler *sampler);

// # Safety
// `sampler` must be a live handle and `out` a valid pointer.
enum PcStatus pc_sampler_info(const struct PcSampler *sampler, struct PcSamplerInfo *out);

// Number of indices [`pc_sampler_epoch_indices`] writes for `epoch`.
//
// # Safety
// `sampler` must be a live handle and `out_len` a valid pointer.
enum PcStatus pc_sampler_epoch_len(const struct PcSampler *sampler,
                                   uint64_t epoch,
                                   uint64_t *out_len);

// Fills `buf` with the sample indices of `epoch`, identical to the CLI's
// `epoch_XXXX.idx` file. `*written` receives the number of indices; when
// `capacity` is too small nothing is written to `buf` and `*written` holds
// the required length.
//
// # Safety
// `sampler` must be a live handle, `buf` must be valid for `capacity`
// writes and `written` a valid pointer.
enum PcStatus pc_sampler_epoch_indices(const struct PcSampler *sampler,
                                       uint64_t epoch,
                                       uint64_t *buf,
                                       uintptr_t capacity,
                                       uintptr_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROTO_CURRICULUM_H */
