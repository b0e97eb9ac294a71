/* Minimal consumer of the C ABI: variation of a path and one field operator. */
#include <stdio.h>
#include "varlab.h"

int main(void) {
    const double path[4] = {0.0, 1.0, 0.0, 1.0};
    double v = 0.0;
    if (varlab_hvar(path, 4, 2.0, &v) != VARLAB_STATUS_OK) {
        fprintf(stderr, "hvar: %s\n", varlab_last_error());
        return 1;
    }
    double vals[8] = {1, 2, 3, 4, 5, 6, 7, 8};
    VarlabField *f = NULL, *e = NULL;
    if (varlab_field_new(1, 3, vals, 8, &f) != VARLAB_STATUS_OK || varlab_cond_expect(f, 1, &e) != VARLAB_STATUS_OK) {
        fprintf(stderr, "field: %s\n", varlab_last_error());
        return 1;
    }
    double out[8];
    varlab_field_values(e, out, 8);
    size_t jumps = 0;
    varlab_jump_count(path, 4, 0.5, &jumps);
    printf("version %s hvar %.17g jumps %zu e0 %.17g e7 %.17g\n", varlab_version(), v, jumps, out[0], out[7]);
    varlab_field_free(e);
    varlab_field_free(f);
    return 0;
}
