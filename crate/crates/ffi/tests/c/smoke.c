/* Exercises the C header against the static library. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "sucr.h"

#define CHECK(cond)                                                    \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond);       \
      return 1;                                                        \
    }                                                                  \
  } while (0)

int main(int argc, char **argv) {
  const char *out_path = argc > 1 ? argv[1] : "smoke.csv";

  SucrParams *params = NULL;
  CHECK(sucr_params_new(100, 1.0, 1.0, 1.0, 10, 50, 1.0, &params) == SUCR_STATUS_OK);
  double alpha = 0.0;
  CHECK(sucr_ml_estimate(params, 30.0, 0.5, 10.0, &alpha) == SUCR_STATUS_OK);
  CHECK(alpha >= 10.0 && isfinite(alpha));
  CHECK(sucr_ml_estimate(NULL, 30.0, 0.5, 10.0, &alpha) == SUCR_STATUS_NULL_POINTER);
  CHECK(sucr_last_error_message() != NULL);
  sucr_params_free(params);

  SucrConfig *cfg = NULL;
  CHECK(sucr_config_preset("bias", &cfg) == SUCR_STATUS_OK);
  CHECK(sucr_config_set_trials(cfg, 50) == SUCR_STATUS_OK);
  SucrResult *res = NULL;
  CHECK(sucr_run(cfg, 1, &res) == SUCR_STATUS_OK);
  CHECK(sucr_result_len(res) == 5);
  SucrRow row;
  CHECK(sucr_result_row(res, 2, &row) == SUCR_STATUS_OK);
  CHECK(row.sweep_value == 0.0);
  CHECK(fabs(row.p_resolved + row.p_false_positive + row.p_false_negative - 1.0) < 1e-12);
  CHECK(sucr_result_row(res, 5, &row) == SUCR_STATUS_INVALID_ARGUMENT);
  CHECK(sucr_result_write(res, cfg, out_path, SUCR_FORMAT_CSV) == SUCR_STATUS_OK);
  sucr_result_free(res);
  sucr_config_free(cfg);

  puts("ok");
  return 0;
}
