/* Compiles the public header as C and exercises a minimal round trip. */
#include <stdio.h>
#include <stdlib.h>

#include "lipscert/lipscert.h"

#define EXPECT(cond)                                         \
  do {                                                       \
    if (!(cond)) {                                           \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      return 1;                                              \
    }                                                        \
  } while (0)

int main(void) {
  lipscert_config* cfg = NULL;
  lipscert_model* model = NULL;
  size_t params = 0;
  double images[16 * 16 * 3] = {0};
  double logits[10];
  EXPECT(lipscert_config_default(&cfg) == LIPSCERT_OK);
  EXPECT(lipscert_model_create(cfg, &model) == LIPSCERT_OK);
  EXPECT(lipscert_model_param_count(model, &params) == LIPSCERT_OK && params > 0);
  EXPECT(lipscert_model_forward(model, images, 1, logits) == LIPSCERT_OK);
  EXPECT(lipscert_config_set(cfg, "no_such_key", "1") == LIPSCERT_ERR_INVALID_ARGUMENT);
  EXPECT(lipscert_last_error()[0] != '\0');
  lipscert_model_free(model);
  lipscert_config_free(cfg);
  printf("lipscert %s: %zu parameters\n", lipscert_version(), params);
  return 0;
}
