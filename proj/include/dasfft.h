/* C API for the DA-SFFT face restoration library.
 *
 * All entry points operate on an opaque session that owns the run
 * configuration and the model parameters. Calls return a status code;
 * dasfft_last_error() describes the most recent failure on the session.
 */
#ifndef DASFFT_H
#define DASFFT_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dasfft_status {
    DASFFT_OK = 0,
    DASFFT_ERR_INVALID_ARGUMENT = 1,
    DASFFT_ERR_IO = 2,
    DASFFT_ERR_STATE = 3,
    DASFFT_ERR_INTERNAL = 4
} dasfft_status;

typedef struct dasfft_session dasfft_session;

/* Session lifetime. dasfft_open applies the DASFFT_SEED environment
 * override to the default configuration. */
dasfft_session* dasfft_open(void);
void dasfft_close(dasfft_session* s);

/* Message for the most recent failing call on this session. */
const char* dasfft_last_error(const dasfft_session* s);

/* `key = value` configuration file / single key override. */
dasfft_status dasfft_config_load(dasfft_session* s, const char* path);
dasfft_status dasfft_config_set(dasfft_session* s, const char* key, const char* value);

/* Model parameter serialization (all stages, optimizer state included). */
dasfft_status dasfft_model_load(dasfft_session* s, const char* path);
dasfft_status dasfft_model_save(dasfft_session* s, const char* path);

/* Synthesize one HQ face; writes <prefix>.ppm, <prefix>_parsing.pgm and
 * <prefix>_depth.tens. */
dasfft_status dasfft_facegen(dasfft_session* s, uint64_t seed, const char* out_prefix);

/* Apply one sampled blind degradation to an HQ image with its depth map;
 * writes <prefix>.ppm and <prefix>_params.txt (the exact parameter draw). */
dasfft_status dasfft_degrade(dasfft_session* s, const char* hq_ppm, const char* depth_tens,
                             uint64_t seed, const char* out_prefix);

/* Stage 1: HQ-encoder pretraining (frozen afterwards). */
dasfft_status dasfft_pretrain_encoder(dasfft_session* s);

/* Stage 2: LQ-encoder alignment; reports held-out embedding MSE before and
 * after. Output pointers may be NULL. */
dasfft_status dasfft_align_dafe(dasfft_session* s, double* initial_mse, double* final_mse);

/* Stage 3: adversarial generator training; reports the train-set
 * reconstruction loss before and after. Output pointers may be NULL. */
dasfft_status dasfft_train(dasfft_session* s, double* initial_rec, double* final_rec);

/* Restore one degraded image given its parsing map. */
dasfft_status dasfft_restore(dasfft_session* s, const char* lq_ppm, const char* parsing_pgm,
                             const char* out_ppm);

/* Test-corpus evaluation; writes the metric CSVs into the output directory.
 * Output pointers may be NULL. */
dasfft_status dasfft_eval(dasfft_session* s, double* mean_psnr, double* mean_ssim);

/* Finite-difference verification of every differentiable block; writes the
 * per-check report to `report_path` (NULL for stdout) and returns the
 * failure count in *failures. */
dasfft_status dasfft_gradcheck(dasfft_session* s, const char* report_path, int* failures);

#ifdef __cplusplus
}
#endif

#endif /* DASFFT_H */
