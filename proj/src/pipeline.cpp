#include "metarec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace metarec {

namespace {

bool is_power_of_two(int m) { return m > 0 && (m & (m - 1)) == 0; }

void write_report(const std::string& path, const ReconstructResult& res,
                  const ReconstructConfig& cfg) {
    if (path.empty()) return;
    std::ofstream f(path);
    if (!f) throw IoError("reconstruct: cannot write report to " + path);
    f << "[config]\n";
    f << "data_term = " << (cfg.objective.data == DataTerm::ssd ? "ssd" : "ncc") << "\n";
    f << "lambda1 = " << cfg.objective.lambda1.spatial << "," << cfg.objective.lambda1.temporal
      << "," << cfg.objective.lambda1.l2 << "\n";
    f << "lambda2 = " << cfg.objective.lambda2 << "\n";
    f << "e2 = " << (cfg.objective.e2 == SourceReg::tv ? "tv" : "l2") << "\n";
    f << "coarsest_m = " << cfg.coarsest_m << "\n";
    f << "mt = " << cfg.mt << "\n";
    f << "n_steps = " << cfg.solver.n_steps << "\n";
    f << "gauss_newton_post = " << (cfg.gauss_newton_post ? 1 : 0) << "\n\n";
    for (const LevelReport& lv : res.levels) {
        f << "[level m=" << lv.m << "]\n";
        f << "q = " << lv.q << "\n";
        f << "iterations = " << lv.iterations << "\n";
        f << "converged = " << (lv.converged ? 1 : 0) << "\n";
        f << "initial_J = " << lv.initial_J << "\n";
        f << "final_J = " << lv.final_J << "\n";
        f << "log = iter\tJ\tdata\te1\te2\tL1\talpha\tbt_count\n";
        char line[256];
        for (const IpalmIterRecord& r : lv.history) {
            std::snprintf(line, sizeof(line), "log = %d\t%.12e\t%.12e\t%.12e\t%.12e\t%.6e\t%.4f\t%d\n",
                          r.iter, r.J, r.data, r.e1, r.e2, r.L1, r.alpha, r.bt_count);
            f << line;
        }
        f << "\n";
    }
    f << "[summary]\n";
    f << "final_J = " << res.final_J << "\n";
    f << "gauss_newton_improved = " << (res.gn_improved ? 1 : 0) << "\n";
}

}  // namespace

std::vector<PyramidLevel> build_pyramid(const ScalarField& T, const Sinogram& g, int coarsest_m) {
    const CellGrid& fg = T.grid;
    if (!is_power_of_two(fg.m)) throw InvalidInput("build_pyramid: finest m must be a power of two");
    if (!is_power_of_two(coarsest_m) || coarsest_m < 8)
        throw InvalidInput("build_pyramid: coarsest m must be a power of two >= 8");
    if (g.geom.q != (3 * fg.m) / 2)
        throw InvalidInput("build_pyramid: sinogram q does not match the level rule 1.5*m");
    if (g.geom.dim != fg.d || (fg.d == 3 && g.geom.slices != fg.m))
        throw InvalidInput("build_pyramid: sinogram/grid dimension mismatch");
    if (coarsest_m > fg.m) coarsest_m = fg.m;

    std::vector<PyramidLevel> levels;
    ScalarField t = T;
    Sinogram s = g;
    while (true) {
        PyramidLevel lv{.grid = t.grid, .T = t, .g = s, .geom = s.geom};
        levels.push_back(std::move(lv));
        if (t.grid.m <= coarsest_m) break;
        t = restrict_average(t);
        s = downsample_sinogram(s);
        if (t.grid.d == 3) s.geom.slices = t.grid.m;
        // 3-D slice count halves with the grid: average slice pairs
        if (t.grid.d == 3) {
            const int m = t.grid.m;
            const int q = s.geom.q;
            Sinogram merged(s.geom);
            const std::size_t p = s.geom.angles_deg.size();
            for (std::size_t a = 0; a < p; ++a)
                for (int iz = 0; iz < m; ++iz)
                    for (int j = 0; j < q; ++j)
                        merged.data[(a * m + iz) * q + j] =
                            0.5 * (s.data[(a * 2 * m + 2 * iz) * q + j] +
                                   s.data[(a * 2 * m + 2 * iz + 1) * q + j]);
            s = std::move(merged);
        }
    }
    std::reverse(levels.begin(), levels.end());
    return levels;
}

ReconstructResult reconstruct(const ScalarField& T, const Sinogram& g,
                              const ReconstructConfig& cfg) {
    std::vector<PyramidLevel> levels = build_pyramid(T, g, cfg.coarsest_m);

    ReconstructResult res;
    VelocityField v;
    ScalarField z;
    double L1_carry = cfg.ipalm.L1_init;
    double L2_carry = cfg.ipalm.L2_init;

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const PyramidLevel& lv = levels[li];
        const CellGrid vgrid(lv.grid.d, lv.grid.m, cfg.mt);
        if (li == 0) {
            v = VelocityField(vgrid);
            z = ScalarField(lv.grid);
        } else {
            v = prolongate(v, vgrid);
            z = prolongate(z, lv.grid);
        }

        auto Ti = std::make_shared<FieldInterpolant>(lv.T, cfg.solver.template_order);
        auto K = std::make_shared<RadonOperator>(lv.geom, lv.grid);
        auto B = std::make_shared<RegOperatorB>(cfg.objective.e1_kind, vgrid);
        Objective obj(Ti, lv.g, K, B, cfg.objective, cfg.solver);

        IpalmConfig icfg = cfg.ipalm;
        icfg.L1_init = L1_carry;
        icfg.L2_init = L2_carry;

        LevelReport rep;
        rep.m = lv.grid.m;
        rep.q = lv.geom.q;
        rep.initial_J = obj.eval(v, z).parts.total();
        IpalmResult ir;
        const std::string where = "reconstruct: level m=" + std::to_string(lv.grid.m) + ": ";
        try {
            ir = ipalm_solve(obj, v, z, icfg);
        } catch (const ConvergenceFailure& e) {
            throw ConvergenceFailure(where + e.what(), e.residual);
        } catch (const NumericalBlowup& e) {
            throw NumericalBlowup(where + e.what());
        }
        v = std::move(ir.v);
        z = std::move(ir.z);
        L1_carry = ir.L1;
        L2_carry = ir.L2;
        rep.iterations = ir.iterations;
        rep.converged = ir.converged;
        rep.final_J = ir.final_J;
        rep.history = std::move(ir.history);
        res.levels.push_back(std::move(rep));

        if (li + 1 == levels.size()) {
            if (cfg.gauss_newton_post && cfg.objective.data == DataTerm::ssd) {
                bool improved = false;
                v = gauss_newton_refine_v(obj, v, z, cfg.gauss_newton, &improved);
                res.gn_improved = improved;
            }
            ObjectiveEval fin = obj.eval(v, z);
            res.final_J = fin.parts.total();
            res.R = std::move(fin.sm.R);
            res.deformed_template = ScalarField(lv.grid);
            res.deformed_template.values = std::move(fin.sm.template_vals);
        }
    }
    res.v = std::move(v);
    res.z = std::move(z);
    write_report(cfg.report_path, res, cfg);
    return res;
}

}  // namespace metarec
