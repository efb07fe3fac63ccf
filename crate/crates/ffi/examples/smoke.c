#include <stdio.h>
#include <stdlib.h>

#include "melab.h"

static const char *CONFIG =
    "{\"experiment\":\"simulate\","
    "\"grid\":{\"nx\":8,\"ny\":8},"
    "\"material\":{\"rho_m\":1,\"mu\":1,\"lambda\":1,\"nu1\":0.1,\"mu0\":1,\"b0\":1},"
    "\"dissipation\":{\"kind\":\"none\"},"
    "\"stepper\":{\"dt\":0.005,\"sample_every\":10},"
    "\"initial\":{\"kind\":\"random\",\"sqrt_energy\":0.1},"
    "\"seed\":1}";

int main(void) {
    MelabSimulation *sim = NULL;
    if (melab_simulation_new(CONFIG, &sim) != MELAB_STATUS_OK) {
        char msg[256];
        melab_last_error(msg, sizeof msg, NULL);
        fprintf(stderr, "melab: %s\n", msg);
        return 1;
    }
    double e0 = 0.0, e1 = 0.0, t = 0.0;
    size_t n = 0;
    melab_simulation_energy(sim, &e0);
    if (melab_simulation_step(sim, 20) != MELAB_STATUS_OK) return 2;
    melab_simulation_energy(sim, &e1);
    melab_simulation_time(sim, &t);
    melab_simulation_node_count(sim, &n);
    double *h = malloc(n * sizeof *h);
    int st = melab_simulation_copy_h(sim, h, n);
    melab_simulation_free(sim);
    free(h);
    printf("melab %s t=%.3f nodes=%zu E0=%.6e E1=%.6e\n", melab_version(), t, n, e0, e1);
    return st == MELAB_STATUS_OK && e1 <= e0 && e1 > 0.0 ? 0 : 3;
}
