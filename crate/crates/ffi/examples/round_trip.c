#include <math.h>
#include <stdio.h>

#include "irf_mixflow.h"

int main(void) {
  IrfTarget *t = NULL;
  IrfKernel *k = NULL;
  if (irf_target_new("banana", &t) != IRF_STATUS_OK ||
      irf_kernel_new(t, "hmc", 0.02, 50, &k) != IRF_STATUS_OK) {
    fprintf(stderr, "setup failed: %s\n", irf_last_error());
    return 1;
  }
  double s[7] = {0.3, -4.0, 0.35, -4.1, 0.25, 0.75, 0.4};
  double fwd[7], back[7];
  const double theta_v[2] = {0.125, 0.9};
  irf_forward_step(k, s, 7, theta_v, 0.3, fwd);
  irf_inverse_step(k, fwd, 7, theta_v, 0.3, back);
  double err = 0.0;
  for (int i = 0; i < 7; i++) err += (s[i] - back[i]) * (s[i] - back[i]);
  printf("round-trip error %.3e\n", sqrt(err));
  irf_kernel_free(k);
  irf_target_free(t);
  return sqrt(err) < 1e-10 ? 0 : 1;
}
