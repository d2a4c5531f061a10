#include <math.h>
#include <stdio.h>
#include <string.h>

#include "ltvkit.h"

#define CHECK(cond)                                              \
    do {                                                         \
        if (!(cond)) {                                           \
            fprintf(stderr, "check failed: %s\n", #cond);        \
            return 1;                                            \
        }                                                        \
    } while (0)

int main(void) {
    LtvSystem *sys = NULL;
    CHECK(ltv_catalog_system("S2", &sys) == LTV_OK);

    size_t n = 0;
    CHECK(ltv_system_dims(sys, &n, NULL, NULL) == LTV_OK && n == 1);

    double phi = 0.0;
    CHECK(ltv_transition(sys, 1.0, 0.0, &phi, 1) == LTV_OK);
    CHECK(fabs(phi - exp(-1.0)) < 1e-9);

    double m = 0.0;
    CHECK(ltv_gramian(sys, LTV_GRAMIAN_M, 0.0, 1.0, &m, 1) == LTV_OK);
    CHECK(fabs(m - (1.0 - exp(-2.0)) / 2.0) < 1e-9);

    int32_t status = -1;
    char *json = NULL;
    CHECK(ltv_classify(sys, "UCO", &status, &json) == LTV_OK);
    CHECK(status == LTV_CERTIFIED && json != NULL && strstr(json, "CertifiedOnWindow"));
    ltv_string_free(json);

    CHECK(ltv_transition(sys, 99.0, 0.0, &phi, 1) == LTV_ERR_DOMAIN);
    char msg[128];
    CHECK(ltv_last_error(msg, sizeof msg) > 0 && strstr(msg, "outside domain"));

    ltv_system_free(sys);
    printf("ok %s\n", ltv_version());
    return 0;
}
