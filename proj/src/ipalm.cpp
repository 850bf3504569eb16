#include "metarec/ipalm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace metarec {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sqnorm(const std::vector<double>& a) { return dot(a, a); }

// sigma of Theorem 4.1: guaranteed mode inflates the Lipschitz estimate to
// absorb the inertia; heuristic mode steps with 1/L directly.
double step_sigma(IpalmMode mode, double alpha, double L) {
    if (mode == IpalmMode::guaranteed) return (1.0 + 2.0 * alpha) / (2.0 * (1.0 - alpha)) * L;
    return L;
}

void dump_iterates(const std::string& path, const VelocityField& v, const ScalarField& z) {
    std::ofstream f(path, std::ios::binary);
    if (!f) return;
    f.write(reinterpret_cast<const char*>(v.values.data()),
            (std::streamsize)(v.values.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(z.values.data()),
            (std::streamsize)(z.values.size() * sizeof(double)));
}

}  // namespace

IpalmResult ipalm_solve(const Objective& obj, const VelocityField& v0, const ScalarField& z0,
                        const IpalmConfig& cfg) {
    const ObjectiveConfig& oc = obj.config();
    const CellGrid& zgrid = z0.grid;
    if (!v0.grid.same_layout(obj.regop().grid()) || v0.grid.m != zgrid.m ||
        v0.grid.d != zgrid.d)
        throw InvalidInput("ipalm_solve: inconsistent shapes");
    check_finite(v0.values, "ipalm v0");
    check_finite(z0.values, "ipalm z0");
    if (cfg.eta <= 1.0) throw InvalidInput("ipalm_solve: backtracking factor must be > 1");

    std::ofstream log;
    if (!cfg.log_path.empty()) log.open(cfg.log_path, std::ios::app);

    const double hd = zgrid.cell_volume();
    const double hy = obj.op().geometry().hy();
    const bool ssd_data = oc.data == DataTerm::ssd;

    IpalmResult res;
    res.v = v0;
    res.z = z0;
    VelocityField v_prev = v0;
    ScalarField z_prev = z0;
    double L1 = cfg.L1_init > 0.0 ? cfg.L1_init : 1.0;
    // smallest L1 the quadratic prox can handle: a tiny L1 means a huge prox
    // weight, and past ~1/eps of the operator norm the solve residual cannot
    // be represented below tolerance in double precision
    double L1_floor = 0.0;
    // for SSD with a linear K the z-block Lipschitz constant is exact
    double L2 = ssd_data ? hy * obj.op().opnorm_KtK() : cfg.L2_init;

    ObjectiveEval ev0 = obj.eval(v0, z0);
    double J_prev = ev0.parts.total();
    if (!std::isfinite(J_prev)) {
        dump_iterates(cfg.dump_path, v0, z0);
        throw NumericalBlowup("ipalm_solve: non-finite initial objective; iterates dumped to " +
                              cfg.dump_path);
    }

    std::vector<double> tv_dual;  // PDHG dual warm start across iterations
    int streak = 0;

    for (int k = 1; k <= cfg.max_iter; ++k) {
        double alpha;
        if (cfg.alpha_override >= 0.0) alpha = cfg.alpha_override;
        else if (cfg.mode == IpalmMode::guaranteed) alpha = cfg.alpha_guaranteed;
        else alpha = (double)(k - 1) / (double)(k + 2);

        IpalmIterRecord rec;
        rec.iter = k;
        rec.alpha = alpha;

        // ---- v block ----
        VelocityField v_next;
        SolutionMap sm_next;
        Sinogram Kr_next;
        double sigma1 = 0.0;
        double dv2 = 0.0;
        if (cfg.freeze_v) {
            v_next = res.v;
            sm_next = solution_map(obj.template_interp(), v_next, res.z, obj.solver());
        } else {
        VelocityField vbar(res.v.grid);
        for (std::size_t i = 0; i < vbar.size(); ++i)
            vbar.values[i] = res.v.values[i] + alpha * (res.v.values[i] - v_prev.values[i]);

        SolutionMap sm_bar = solution_map(obj.template_interp(), vbar, res.z, obj.solver());
        Sinogram Kr_bar;
        const double H_bar = obj.data_value(sm_bar, res.z, &Kr_bar);
        VelocityField gv = obj.grad_v_from(sm_bar, Kr_bar);

        while (true) {
            sigma1 = step_sigma(cfg.mode, alpha, L1);
            VelocityField w(vbar.grid);
            for (std::size_t i = 0; i < w.size(); ++i)
                w.values[i] = vbar.values[i] - gv.values[i] / sigma1;
            try {
                v_next = prox_quadratic(w, 1.0 / sigma1, obj.regop(), oc.lambda1, oc.pcg_tol,
                                        2000, &rec.pcg_residual);
            } catch (const ConvergenceFailure&) {
                // treat an unattainable solve tolerance like a rejected step:
                // a larger L1 shrinks the prox weight and conditions the system
                L1 *= cfg.eta;
                L1_floor = L1;
                ++rec.bt_count;
                if (L1 > 1e12) {
                    dump_iterates(cfg.dump_path, res.v, res.z);
                    throw ConvergenceFailure(
                        "ipalm_solve: v-block backtracking failed (L1 > 1e12)", L1);
                }
                continue;
            }
            sm_next = solution_map(obj.template_interp(), v_next, res.z, obj.solver());
            const double H_next = obj.data_value(sm_next, res.z, &Kr_next);
            std::vector<double> d(v_next.size());
            for (std::size_t i = 0; i < d.size(); ++i)
                d[i] = v_next.values[i] - vbar.values[i];
            const double bound = H_bar + dot(gv.values, d) + 0.5 * L1 * sqnorm(d);
            // absolute floor in the slack: perfect-fit instances have H ~ 0
            // and pure rounding noise must not trigger backtracking
            if (H_next <= bound + 1e-14 * std::max(1.0, std::abs(bound))) break;
            L1 *= cfg.eta;
            ++rec.bt_count;
            if (L1 > 1e12) {
                dump_iterates(cfg.dump_path, res.v, res.z);
                throw ConvergenceFailure("ipalm_solve: v-block backtracking failed (L1 > 1e12)",
                                         L1);
            }
        }
        for (std::size_t i = 0; i < v_next.size(); ++i) {
            const double d = v_next.values[i] - vbar.values[i];
            dv2 += d * d;
        }
        }  // !freeze_v

        // ---- z block ----
        ScalarField zbar(zgrid);
        for (std::size_t i = 0; i < zbar.size(); ++i)
            zbar.values[i] = res.z.values[i] + alpha * (res.z.values[i] - z_prev.values[i]);
        Sinogram Kr_zbar;
        const double H_zbar = obj.data_value(sm_next, zbar, &Kr_zbar);
        std::vector<double> gz = obj.grad_z_from(Kr_zbar, zgrid);

        ScalarField z_next(zgrid);
        double sigma2 = 0.0;
        while (true) {
            sigma2 = step_sigma(cfg.mode, alpha, L2);
            std::vector<double> w(zbar.size());
            for (std::size_t i = 0; i < w.size(); ++i)
                w[i] = zbar.values[i] - gz[i] / sigma2;
            if (oc.e2 == SourceReg::tv) {
                TvProxResult tp = prox_tv(w, std::vector<int>(zgrid.d, zgrid.m), zgrid.hx(),
                                          oc.lambda2 * hd / sigma2, oc.pdhg_tol,
                                          oc.pdhg_max_iter, &tv_dual);
                z_next.values = std::move(tp.x);
                if (!tp.converged) rec.tv_warn = true;
            } else {
                z_next.values = prox_l2_source(w, oc.lambda2 / sigma2, hd);
            }
            if (ssd_data) break;  // exact constant, no line search needed
            const double H_znext = obj.data_value(sm_next, z_next);
            std::vector<double> d(z_next.size());
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = z_next.values[i] - zbar.values[i];
            const double bound = H_zbar + dot(gz, d) + 0.5 * L2 * sqnorm(d);
            if (H_znext <= bound + 1e-14 * std::max(1.0, std::abs(bound))) break;
            L2 *= cfg.eta;
            ++rec.bt_count;
            if (L2 > 1e12) {
                dump_iterates(cfg.dump_path, res.v, res.z);
                throw ConvergenceFailure("ipalm_solve: z-block backtracking failed (L2 > 1e12)",
                                         L2);
            }
        }
        double dz2 = 0.0;
        for (std::size_t i = 0; i < z_next.size(); ++i) {
            const double d = z_next.values[i] - zbar.values[i];
            dz2 += d * d;
        }
        rec.prox_grad_residual = std::sqrt(sigma1 * sigma1 * dv2 + sigma2 * sigma2 * dz2);

        // ---- bookkeeping ----
        Sinogram Kr_final;
        rec.data = obj.data_value(sm_next, z_next, &Kr_final);
        rec.e1 = e1_value_grad(v_next, obj.regop(), oc.lambda1).first;
        rec.e2 = obj.e2_value(z_next);
        rec.J = rec.data + rec.e1 + rec.e2;
        rec.L1 = L1;
        rec.L2 = L2;
        rec.sigma1 = sigma1;
        rec.sigma2 = sigma2;
        if (!std::isfinite(rec.J)) {
            dump_iterates(cfg.dump_path, v_next, z_next);
            throw NumericalBlowup("ipalm_solve: non-finite objective at iteration " +
                                  std::to_string(k) + "; iterates dumped to " + cfg.dump_path);
        }
        if (log) {
            char line[256];
            std::snprintf(line, sizeof(line), "%d\t%.12e\t%.12e\t%.12e\t%.12e\t%.6e\t%.4f\t%d\n",
                          k, rec.J, rec.data, rec.e1, rec.e2, L1, alpha, rec.bt_count);
            log << line;
        }
        res.history.push_back(rec);

        v_prev = std::move(res.v);
        res.v = std::move(v_next);
        z_prev = std::move(res.z);
        res.z = std::move(z_next);
        res.final_J = rec.J;
        res.iterations = k;

        // allow the Lipschitz estimates to recover after an accepted step
        L1 = std::max(L1 / cfg.eta, L1_floor);
        if (!ssd_data) L2 /= cfg.eta;

        const double reldec = std::abs(J_prev - rec.J) / std::max(1.0, std::abs(J_prev));
        streak = reldec < cfg.tol ? streak + 1 : 0;
        J_prev = rec.J;
        if (streak >= cfg.tol_streak) {
            res.converged = true;
            break;
        }
    }

    res.L1 = L1;
    res.L2 = L2;
    SolutionMap sm_fin = solution_map(obj.template_interp(), res.v, res.z, obj.solver());
    res.R = std::move(sm_fin.R);
    if (res.history.empty()) res.final_J = J_prev;
    return res;
}

VelocityField gauss_newton_refine_v(const Objective& obj, const VelocityField& v0,
                                    const ScalarField& z, const GaussNewtonConfig& cfg,
                                    bool* improved) {
    if (improved) *improved = false;
    if (obj.config().data != DataTerm::ssd)
        throw InvalidInput("gauss_newton_refine_v: requires the SSD data term");
    const Lambda1& lam = obj.config().lambda1;
    const RegOperatorB& B = obj.regop();
    const double hy = obj.op().geometry().hy();
    const CellGrid& grid = z.grid;

    VelocityField v = v0;
    double obj0 = -1.0;

    for (int outer = 0; outer < cfg.max_outer; ++outer) {
        SolutionMap sm = solution_map(obj.template_interp(), v, z, obj.solver());
        Sinogram Kr;
        const double H = obj.data_value(sm, z, &Kr);
        auto [e1, ge1] = e1_value_grad(v, B, lam);
        const double fval = H + e1;
        if (obj0 < 0.0) obj0 = fval;

        VelocityField g = obj.grad_v_from(sm, Kr);
        for (std::size_t i = 0; i < g.size(); ++i) g.values[i] += ge1.values[i];

        // Gauss-Newton normal operator: h_Y J^T J + h_t h^d weighted B^T B
        const double e1scale = v.grid.ht() * v.grid.cell_volume();
        auto normal_op = [&](const VelocityField& u, VelocityField& out) {
            ScalarField du(grid);
            du.values = apply_dR_dv(sm, u);
            Sinogram Ju = obj.op().forward(du);
            for (double& e : Ju.data) e *= hy;
            ScalarField back = obj.op().adjoint(Ju, grid);
            out = apply_dR_dv_T(sm, back.values);
            VelocityField reg;
            B.apply_weighted_BtB(u, lam, reg);
            for (std::size_t i = 0; i < out.size(); ++i)
                out.values[i] += e1scale * reg.values[i];
        };

        // plain CG on normal_op d = -g, loose tolerance ("inexact")
        VelocityField d(v.grid), r(v.grid), p(v.grid), q(v.grid);
        for (std::size_t i = 0; i < r.size(); ++i) r.values[i] = -g.values[i];
        p = r;
        double rr = sqnorm(r.values);
        const double rr0 = rr;
        if (rr0 == 0.0) break;
        for (int it = 0; it < cfg.cg_max_iter && rr > cfg.cg_tol * cfg.cg_tol * rr0; ++it) {
            normal_op(p, q);
            const double pq = dot(p.values, q.values);
            if (pq <= 0.0) break;  // curvature guard
            const double a = rr / pq;
            for (std::size_t i = 0; i < d.size(); ++i) {
                d.values[i] += a * p.values[i];
                r.values[i] -= a * q.values[i];
            }
            const double rr2 = sqnorm(r.values);
            const double beta = rr2 / rr;
            rr = rr2;
            for (std::size_t i = 0; i < p.size(); ++i)
                p.values[i] = r.values[i] + beta * p.values[i];
        }

        const double slope = dot(g.values, d.values);
        if (!(slope < 0.0)) break;

        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
            VelocityField vt(v.grid);
            for (std::size_t i = 0; i < vt.size(); ++i)
                vt.values[i] = v.values[i] + t * d.values[i];
            const double Ht = obj.data_value(vt, z);
            const double e1t = e1_value_grad(vt, B, lam).first;
            if (Ht + e1t <= fval + cfg.armijo_slope * t * slope) {
                v = std::move(vt);
                if (improved && Ht + e1t < obj0) *improved = true;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    return v;
}

}  // namespace metarec
