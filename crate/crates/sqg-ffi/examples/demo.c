/* Minimal consumer of the C interface: build a Gaussian bump, evolve it,
 * and print the norm decay.  Compile against include/sqg.h and link the
 * static or shared sqg_ffi library, e.g.
 *
 *   cc demo.c -I../include -L../../../target/release -lsqg_ffi -lm -o demo
 */
#include <stdio.h>
#include <stdlib.h>
#include "sqg.h"

static void check(SqgStatus s, const char *what) {
  if (s != SQG_STATUS_OK) {
    char msg[256];
    sqg_last_error(msg, sizeof msg);
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg);
    exit(1);
  }
}

int main(void) {
  SqgGrid *grid = NULL;
  SqgField *theta0 = NULL, *theta1 = NULL;
  double before = 0.0, after = 0.0;

  check(sqg_grid_new(64, 32.0, &grid), "grid");
  check(sqg_field_gaussian(grid, 0.0, 0.0, 2.0, 1.0, 0.0, &theta0), "data");
  check(sqg_field_lp_norm(theta0, 2.0, &before), "norm");
  check(sqg_evolve(theta0, 2.0, 1.0, &theta1), "evolve");
  check(sqg_field_lp_norm(theta1, 2.0, &after), "norm");
  printf("L2 norm: %.6f -> %.6f (version %s)\n", before, after, sqg_version());

  sqg_field_free(theta1);
  sqg_field_free(theta0);
  sqg_grid_free(grid);
  return 0;
}
