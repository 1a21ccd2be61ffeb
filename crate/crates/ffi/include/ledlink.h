#ifndef LEDLINK_H
#define LEDLINK_H

/* Generated by cbindgen from ledlink-ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call.
 */
typedef enum LedlinkStatus {
  LEDLINK_STATUS_OK = 0,
  LEDLINK_STATUS_NULL_ARGUMENT = 1,
  LEDLINK_STATUS_INVALID_ARGUMENT = 2,
  LEDLINK_STATUS_OUT_OF_RANGE = 3,
  LEDLINK_STATUS_BUFFER_TOO_SMALL = 4,
  LEDLINK_STATUS_PREAMBLE_MISMATCH = 5,
  LEDLINK_STATUS_CRC_MISMATCH = 6,
  LEDLINK_STATUS_TRUNCATED_FRAME = 7,
  LEDLINK_STATUS_CONFIG_ERROR = 8,
  LEDLINK_STATUS_IO_ERROR = 9,
  LEDLINK_STATUS_DECODE_FAILED = 10,
} LedlinkStatus;

/**
 * LED color profile selector.
 */
typedef enum LedlinkColor {
  LEDLINK_COLOR_RED = 0,
  LEDLINK_COLOR_BLUE = 1,
  LEDLINK_COLOR_WHITE = 2,
} LedlinkColor;

/**
 * Frame layout selector.
 */
typedef enum LedlinkFraming {
  LEDLINK_FRAMING_FIXED = 0,
  LEDLINK_FRAMING_VARIABLE = 1,
} LedlinkFraming;

/**
 * Opaque handle to a read-size calibration table.
 */
typedef struct LedlinkCalibration LedlinkCalibration;

/**
 * Link statistics produced by a simulated run.
 */
typedef struct LedlinkLinkReport {
  uint64_t frames_sent;
  uint64_t frames_detected;
  uint64_t frames_ok;
  uint64_t frames_crc_failed;
  uint64_t sync_failures;
  /**
   * Bit error rate against the transmitted payload, 0..1.
   */
  double ber;
  /**
   * Frame error rate, 0..1.
   */
  double fer;
  /**
   * Accepted payload bits per second of trace.
   */
  double throughput_bps;
  /**
   * Transmitted frame bits (headers included) per second of air time.
   */
  double gross_rate_bps;
  /**
   * Emitted signal duration in seconds.
   */
  double channel_seconds;
} LedlinkLinkReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the built-in calibration for a color. The handle must be released
 * with `ledlink_calibration_free`.
 *
 * # Safety
 * `out` must be a valid pointer to pointer storage.
 */
enum LedlinkStatus ledlink_calibration_default(enum LedlinkColor color,
                                               struct LedlinkCalibration **out);

/**
 * Loads a `read_size_bytes,on_time_seconds` CSV table.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid pointer storage.
 */
enum LedlinkStatus ledlink_calibration_from_csv(const char *path,
                                                enum LedlinkColor color,
                                                struct LedlinkCalibration **out);

/**
 * Releases a calibration handle. A null pointer is a no-op.
 *
 * # Safety
 * `calib` must have come from a `ledlink_calibration_*` constructor and not
 * have been freed already.
 */
void ledlink_calibration_free(struct LedlinkCalibration *calib);

/**
 * LED-ON time in seconds produced by reading `read_size_bytes`.
 *
 * # Safety
 * `calib` must be a live handle; `out_seconds` must be valid for writes.
 */
enum LedlinkStatus ledlink_calibration_on_time(const struct LedlinkCalibration *calib,
                                               uint64_t read_size_bytes,
                                               double *out_seconds);

/**
 * Read size in bytes whose LED-ON time best matches `on_time_seconds`.
 *
 * # Safety
 * `calib` must be a live handle; `out_bytes` must be valid for writes.
 */
enum LedlinkStatus ledlink_calibration_read_size(const struct LedlinkCalibration *calib,
                                                 double on_time_seconds,
                                                 uint64_t *out_bytes);

/**
 * CRC-16/CCITT-FALSE over a bit array (one bit per byte, values 0 or 1).
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `out_crc` must be valid for
 * writes.
 */
enum LedlinkStatus ledlink_crc16(const uint8_t *bits, size_t len, uint16_t *out_crc);

/**
 * Encodes a payload into one frame: preamble, optional size field, payload,
 * CRC. On `BUFFER_TOO_SMALL`, `out_len` carries the required capacity.
 *
 * # Safety
 * `payload` must point to `payload_len` readable bytes; `out_bits` must be
 * writable for `out_cap` bytes; `out_len` must be valid for writes.
 */
enum LedlinkStatus ledlink_frame_encode(const uint8_t *payload,
                                        size_t payload_len,
                                        enum LedlinkFraming framing,
                                        uint8_t *out_bits,
                                        size_t out_cap,
                                        size_t *out_len);

/**
 * Parses one frame from the start of a bit array, returning its payload and
 * how many bits the frame consumed.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `out_payload` must be writable
 * for `out_cap` bytes; `out_len` and `out_consumed` must be valid for
 * writes.
 */
enum LedlinkStatus ledlink_frame_parse(const uint8_t *bits,
                                       size_t len,
                                       enum LedlinkFraming framing,
                                       uint8_t *out_payload,
                                       size_t out_cap,
                                       size_t *out_len,
                                       size_t *out_consumed);

/**
 * Runs a full simulated link described by a TOML experiment config.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out_report` must be valid
 * for writes.
 */
enum LedlinkStatus ledlink_run_link(const char *config_toml, struct LedlinkLinkReport *out_report);

/**
 * Decodes a `t_seconds,intensity_volts` trace CSV using the modulation,
 * framing, and LED sections of a TOML config. On success `out_payloads`
 * receives a newline-separated list of binary payload strings; free it with
 * `ledlink_string_free`. Returns `DECODE_FAILED` when no frame is
 * recovered.
 *
 * # Safety
 * `trace_path` and `config_toml` must be NUL-terminated strings;
 * `out_payloads` must be valid pointer storage.
 */
enum LedlinkStatus ledlink_decode_trace_csv(const char *trace_path,
                                            const char *config_toml,
                                            char **out_payloads);

/**
 * Frees a string returned by this library. A null pointer is a no-op.
 *
 * # Safety
 * `s` must have been returned by a `ledlink_*` function and not freed yet.
 */
void ledlink_string_free(char *s);

/**
 * Static description of a status code.
 */
const char *ledlink_status_message(enum LedlinkStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEDLINK_H */
