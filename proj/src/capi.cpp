#include "metarec.h"

#include <cstring>
#include <string>

#include "metarec/cliio.hpp"
#include "metarec/pipeline.hpp"

using namespace metarec;

struct mr_image {
    ScalarField f;
};

struct mr_sinogram {
    Sinogram s;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int wrap(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return MR_OK;
    } catch (const InvalidInput& e) {
        g_last_error = e.what();
        return MR_ERR_INVALID;
    } catch (const IoError& e) {
        g_last_error = e.what();
        return MR_ERR_IO;
    } catch (const ConvergenceFailure& e) {
        g_last_error = e.what();
        return MR_ERR_CONVERGENCE;
    } catch (const NumericalBlowup& e) {
        g_last_error = e.what();
        return MR_ERR_CONVERGENCE;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MR_ERR_INVALID;
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw InvalidInput(what);
}

}  // namespace

extern "C" {

const char* mr_last_error(void) { return g_last_error.c_str(); }

int mr_phantom(const char* name, int m, mr_image** out) {
    return wrap([&] {
        require(name && out, "mr_phantom: null argument");
        *out = new mr_image{make_phantom(name, m)};
    });
}

int mr_synth_deform(const mr_image* img, const char* preset, double scale, mr_image** out) {
    return wrap([&] {
        require(img && preset && out, "mr_synth_deform: null argument");
        *out = new mr_image{synth_deform(img->f, preset, scale)};
    });
}

int mr_image_create(int d, int m, const double* data, mr_image** out) {
    return wrap([&] {
        require(out != nullptr, "mr_image_create: null out pointer");
        ScalarField f((CellGrid(d, m)));
        if (data) std::memcpy(f.values.data(), data, f.size() * sizeof(double));
        *out = new mr_image{std::move(f)};
    });
}

int mr_image_read(const char* path, mr_image** out) {
    return wrap([&] {
        require(path && out, "mr_image_read: null argument");
        *out = new mr_image{read_image(path)};
    });
}

int mr_image_write(const mr_image* img, const char* path) {
    return wrap([&] {
        require(img && path, "mr_image_write: null argument");
        write_image(path, img->f);
    });
}

int mr_image_dims(const mr_image* img, int* d, int* m) {
    return wrap([&] {
        require(img != nullptr, "mr_image_dims: null image");
        if (d) *d = img->f.grid.d;
        if (m) *m = img->f.grid.m;
    });
}

const double* mr_image_data(const mr_image* img) {
    return img ? img->f.values.data() : nullptr;
}

void mr_image_free(mr_image* img) { delete img; }

int mr_project(const mr_image* img, int p, mr_sinogram** out) {
    return wrap([&] {
        require(img && out, "mr_project: null argument");
        require(p >= 1, "mr_project: angle count must be >= 1");
        *out = new mr_sinogram{radon_forward(img->f, make_geometry(p, img->f.grid))};
    });
}

int mr_add_noise(const mr_sinogram* g, double level, uint64_t seed, mr_sinogram** out) {
    return wrap([&] {
        require(g && out, "mr_add_noise: null argument");
        *out = new mr_sinogram{add_noise(g->s, level, seed)};
    });
}

int mr_sinogram_read_csv(const char* path, mr_sinogram** out) {
    return wrap([&] {
        require(path && out, "mr_sinogram_read_csv: null argument");
        *out = new mr_sinogram{read_sinogram_csv(path)};
    });
}

int mr_sinogram_write_csv(const mr_sinogram* s, const char* path) {
    return wrap([&] {
        require(s && path, "mr_sinogram_write_csv: null argument");
        write_sinogram_csv(path, s->s);
    });
}

int mr_sinogram_read_raw(const char* data_path, const char* geom_path, mr_sinogram** out) {
    return wrap([&] {
        require(data_path && geom_path && out, "mr_sinogram_read_raw: null argument");
        *out = new mr_sinogram{read_sinogram_raw(data_path, geom_path)};
    });
}

int mr_sinogram_dims(const mr_sinogram* s, int* p, int* q, int* level) {
    return wrap([&] {
        require(s != nullptr, "mr_sinogram_dims: null sinogram");
        if (p) *p = (int)s->s.geom.angles_deg.size();
        if (q) *q = s->s.geom.q;
        if (level) *level = s->s.geom.level;
    });
}

const double* mr_sinogram_data(const mr_sinogram* s) {
    return s ? s->s.data.data() : nullptr;
}

void mr_sinogram_free(mr_sinogram* s) { delete s; }

int mr_metric_ssd(const mr_image* a, const mr_image* b, double* out) {
    return wrap([&] {
        require(a && b && out, "mr_metric_ssd: null argument");
        *out = metric_ssd(a->f, b->f);
    });
}

int mr_metric_ssim(const mr_image* a, const mr_image* b, double* out) {
    return wrap([&] {
        require(a && b && out, "mr_metric_ssim: null argument");
        *out = metric_ssim(a->f, b->f);
    });
}

void mr_reconstruct_params_init(mr_reconstruct_params* p) {
    if (!p) return;
    ObjectiveConfig oc;
    *p = mr_reconstruct_params{};
    p->data_term = 0;
    p->source_reg = 0;
    p->lambda1_spatial = oc.lambda1.spatial;
    p->lambda1_temporal = oc.lambda1.temporal;
    p->lambda1_l2 = oc.lambda1.l2;
    p->lambda2 = oc.lambda2;
    p->coarsest_m = 32;
    p->mt = 0;
    p->max_iter = 200;
    p->guaranteed_mode = 0;
    p->gauss_newton = 1;
    p->n_steps = 5;
    p->report_path = nullptr;
    p->log_path = nullptr;
}

int mr_reconstruct(const mr_image* tmpl, const mr_sinogram* meas,
                   const mr_reconstruct_params* p, mr_image** R, mr_image** deformed,
                   mr_image** z) {
    return wrap([&] {
        require(tmpl && meas && p, "mr_reconstruct: null argument");
        ReconstructConfig cfg;
        cfg.objective.data = p->data_term == 0 ? DataTerm::ssd : DataTerm::ncc;
        cfg.objective.e2 = p->source_reg == 0 ? SourceReg::tv : SourceReg::l2;
        cfg.objective.lambda1 = {p->lambda1_spatial, p->lambda1_temporal, p->lambda1_l2};
        cfg.objective.lambda2 = p->lambda2;
        cfg.coarsest_m = p->coarsest_m;
        cfg.mt = p->mt;
        cfg.ipalm.max_iter = p->max_iter;
        cfg.ipalm.mode = p->guaranteed_mode ? IpalmMode::guaranteed : IpalmMode::heuristic;
        cfg.gauss_newton_post = p->gauss_newton != 0;
        cfg.solver.n_steps = p->n_steps;
        if (p->report_path) cfg.report_path = p->report_path;
        if (p->log_path) cfg.ipalm.log_path = p->log_path;
        ReconstructResult res = reconstruct(tmpl->f, meas->s, cfg);
        if (R) *R = new mr_image{std::move(res.R)};
        if (deformed) *deformed = new mr_image{std::move(res.deformed_template)};
        if (z) *z = new mr_image{std::move(res.z)};
    });
}

int mr_baseline(const mr_sinogram* g, int m, double lambda, double tol, int max_iter,
                mr_image** out, int* converged) {
    return wrap([&] {
        require(g && out, "mr_baseline: null argument");
        CellGrid grid(g->s.geom.dim, m);
        RadonOperator K(g->s.geom, grid);
        BaselineResult r = l2tv_baseline(K, g->s, grid, lambda, tol, max_iter);
        if (converged) *converged = r.converged ? 1 : 0;
        *out = new mr_image{std::move(r.R)};
    });
}

}  // extern "C"
