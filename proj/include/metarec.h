/* Plain-C interface to the metamorphosis reconstruction core.
 *
 * All functions return MR_OK (0) on success or a nonzero error code matching
 * the CLI exit-code convention; the message of the most recent failure on the
 * calling thread is available via mr_last_error(). Objects returned through
 * out-parameters are owned by the caller and released with the matching
 * *_free function. The API is thread-safe as long as each object is used by
 * one thread at a time.
 */
#ifndef METAREC_H
#define METAREC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define MR_OK 0
#define MR_ERR_INVALID 2      /* invalid input (bad names, shapes, parameters) */
#define MR_ERR_CONVERGENCE 3  /* solver failed to reach its tolerance */
#define MR_ERR_IO 4           /* file could not be read or written */

typedef struct mr_image mr_image;
typedef struct mr_sinogram mr_sinogram;

/* Message of the last failure on this thread; empty string if none. */
const char* mr_last_error(void);

/* ---- images ---- */

/* Builtin phantoms: shepp-logan, shepp-logan-square, gauss-bump, disk. */
int mr_phantom(const char* name, int m, mr_image** out);
/* Warp by a named velocity preset (swirl, bend, translate-bump) times scale. */
int mr_synth_deform(const mr_image* img, const char* preset, double scale, mr_image** out);
/* d = 2 or 3, m cells per axis, data in field order (first axis fastest);
 * data may be NULL for a zero image. */
int mr_image_create(int d, int m, const double* data, mr_image** out);
int mr_image_read(const char* path, mr_image** out);
int mr_image_write(const mr_image* img, const char* path);
int mr_image_dims(const mr_image* img, int* d, int* m);
/* Borrowed pointer, valid until the image is freed or mutated. */
const double* mr_image_data(const mr_image* img);
void mr_image_free(mr_image* img);

/* ---- sinograms ---- */

/* Forward-project with p equally spaced angles in [0, 180). */
int mr_project(const mr_image* img, int p, mr_sinogram** out);
/* Additive Gaussian noise, sigma = level * rms(g); deterministic per seed. */
int mr_add_noise(const mr_sinogram* g, double level, uint64_t seed, mr_sinogram** out);
int mr_sinogram_read_csv(const char* path, mr_sinogram** out);
int mr_sinogram_write_csv(const mr_sinogram* s, const char* path);
/* Raw float32 import (angle-major) with a key-value sidecar geometry file. */
int mr_sinogram_read_raw(const char* data_path, const char* geom_path, mr_sinogram** out);
int mr_sinogram_dims(const mr_sinogram* s, int* p, int* q, int* level);
const double* mr_sinogram_data(const mr_sinogram* s);
void mr_sinogram_free(mr_sinogram* s);

/* ---- metrics ---- */

int mr_metric_ssd(const mr_image* a, const mr_image* b, double* out);
int mr_metric_ssim(const mr_image* a, const mr_image* b, double* out);

/* ---- reconstruction ---- */

typedef struct {
    int data_term;        /* 0 = ssd, 1 = ncc */
    int source_reg;       /* 0 = tv, 1 = l2 */
    double lambda1_spatial;
    double lambda1_temporal;
    double lambda1_l2;
    double lambda2;
    int coarsest_m;       /* coarsest multilevel resolution */
    int mt;               /* time nodes of the velocity (0 = stationary) */
    int max_iter;         /* iPALM iterations per level */
    int guaranteed_mode;  /* 1 = inertia-safe constants, 0 = heuristic */
    int gauss_newton;     /* 1 = Gauss-Newton post-refinement (ssd only) */
    int n_steps;          /* RK4 steps of the characteristics solver */
    const char* report_path; /* per-level report file, NULL to skip */
    const char* log_path;    /* iteration log file, NULL to skip */
} mr_reconstruct_params;

/* Fill with the documented defaults. */
void mr_reconstruct_params_init(mr_reconstruct_params* p);

/* Multilevel reconstruction of measurements `meas` from template `tmpl`.
 * On success returns the reconstruction R, the deformed template T(phi), and
 * the source part z (R = deformed + z). Any out-pointer may be NULL. */
int mr_reconstruct(const mr_image* tmpl, const mr_sinogram* meas,
                   const mr_reconstruct_params* p, mr_image** R, mr_image** deformed,
                   mr_image** z);

/* L2-TV comparison model min ||K R - g||^2 + lambda TV(R) on an m x m grid.
 * converged may be NULL; a capped run still returns its best iterate. */
int mr_baseline(const mr_sinogram* g, int m, double lambda, double tol, int max_iter,
                mr_image** out, int* converged);

#ifdef __cplusplus
}
#endif

#endif
