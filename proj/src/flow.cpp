#include "metarec/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace metarec {

namespace {

constexpr int kMaxBlocks = 64;

// Small per-trajectory sparse collection of d x d blocks indexed by
// (time node, cell). Stage derivatives and their RK4 combination live here.
struct SparseBlocks {
    int n = 0;
    int tnode[kMaxBlocks];
    int cell[kMaxBlocks];
    double mat[kMaxBlocks][9];

    int find_or_add(int t, int c, int d) {
        for (int i = 0; i < n; ++i)
            if (tnode[i] == t && cell[i] == c) return i;
        if (n >= kMaxBlocks) throw NumericalBlowup("flow: derivative stencil overflow");
        tnode[n] = t;
        cell[n] = c;
        std::memset(mat[n], 0, sizeof(double) * d * d);
        return n++;
    }

    void clear() { n = 0; }
};

// dst += s * J * src  (all d x d row-major)
inline void add_scaled_matmul(double* dst, double s, const double* J, const double* src, int d) {
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double acc = 0.0;
            for (int k = 0; k < d; ++k) acc += J[i * d + k] * src[k * d + j];
            dst[i * d + j] += s * acc;
        }
}

// out = S (diagonal blocks w*I) + s * J * prev
void chain_stage_dv(const VelPointEval& st, double s, const double* J, const SparseBlocks& prev,
                    SparseBlocks& out, int d) {
    out.clear();
    for (int e = 0; e < st.nst; ++e) {
        const int i = out.find_or_add(st.tnode[e], st.cell[e], d);
        for (int c = 0; c < d; ++c) out.mat[i][c * d + c] += st.w[e];
    }
    for (int e = 0; e < prev.n; ++e) {
        const int i = out.find_or_add(prev.tnode[e], prev.cell[e], d);
        add_scaled_matmul(out.mat[i], s, J, prev.mat[e], d);
    }
}

void accumulate(SparseBlocks& acc, double s, const SparseBlocks& src, int d) {
    for (int e = 0; e < src.n; ++e) {
        const int i = acc.find_or_add(src.tnode[e], src.cell[e], d);
        for (int k = 0; k < d * d; ++k) acc.mat[i][k] += s * src.mat[e][k];
    }
}

}  // namespace

FlowResult solve_backward_flow(const VelocityField& v, const SolverConfig& cfg) {
    check_finite(v.values, "velocity");
    if (cfg.n_steps < 1) throw InvalidInput("flow: n_steps must be >= 1");
    const CellGrid& g = v.grid;
    const int d = g.d;
    const int nt = cfg.n_steps;
    const double dt = -1.0 / nt;

    FlowResult res;
    res.grid = g;
    res.phi0 = cell_centers(g);
    res.steps.resize(nt);
    const std::size_t n = res.phi0.n;

    for (int k = 0; k < nt; ++k) {
        auto& sf = res.steps[k];
        sf.A.resize(n * d * d);
        sf.offsets.assign(n + 1, 0);
    }

    std::vector<std::vector<FlowResult::Entry>> step_entries(nt);

    const bool rk4 = cfg.scheme == OdeScheme::rk4;
    for (int k = 0; k < nt; ++k) {
        const double tk = 1.0 + k * dt;  // t_k = 1 - k/N_t
        auto& sf = res.steps[k];
        auto& entries = step_entries[k];
        for (std::size_t p = 0; p < n; ++p) {
            double* x = &res.phi0.coords[p * d];
            double* A = &sf.A[p * d * d];
            SparseBlocks D1, D2, D3, D4, C;
            double xi[3];
            VelPointEval s1, s2, s3, s4;

            eval_velocity_at(v, tk, x, s1);
            if (!rk4) {
                // explicit Euler: phi += dt * v; A = I + dt*J; C = dt*S
                C.clear();
                for (int e = 0; e < s1.nst; ++e) {
                    const int i = C.find_or_add(s1.tnode[e], s1.cell[e], d);
                    for (int c = 0; c < d; ++c) C.mat[i][c * d + c] += dt * s1.w[e];
                }
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        A[i * d + j] = (i == j ? 1.0 : 0.0) + dt * s1.jac[i * d + j];
                for (int c = 0; c < d; ++c) x[c] += dt * s1.value[c];
            } else {
                const double half = 0.5 * dt;
                // stage 1
                D1.clear();
                for (int e = 0; e < s1.nst; ++e) {
                    const int i = D1.find_or_add(s1.tnode[e], s1.cell[e], d);
                    for (int c = 0; c < d; ++c) D1.mat[i][c * d + c] += s1.w[e];
                }
                double J1t[9];  // total d k_i / d phi_k, chained
                std::memcpy(J1t, s1.jac, sizeof(double) * d * d);
                // stage 2
                for (int c = 0; c < d; ++c) xi[c] = x[c] + half * s1.value[c];
                eval_velocity_at(v, std::clamp(tk + half, 0.0, 1.0), xi, s2);
                double J2t[9];
                std::memcpy(J2t, s2.jac, sizeof(double) * d * d);
                add_scaled_matmul(J2t, half, s2.jac, J1t, d);
                chain_stage_dv(s2, half, s2.jac, D1, D2, d);
                // stage 3
                for (int c = 0; c < d; ++c) xi[c] = x[c] + half * s2.value[c];
                eval_velocity_at(v, std::clamp(tk + half, 0.0, 1.0), xi, s3);
                double J3t[9];
                std::memcpy(J3t, s3.jac, sizeof(double) * d * d);
                add_scaled_matmul(J3t, half, s3.jac, J2t, d);
                chain_stage_dv(s3, half, s3.jac, D2, D3, d);
                // stage 4
                for (int c = 0; c < d; ++c) xi[c] = x[c] + dt * s3.value[c];
                eval_velocity_at(v, std::clamp(tk + dt, 0.0, 1.0), xi, s4);
                double J4t[9];
                std::memcpy(J4t, s4.jac, sizeof(double) * d * d);
                add_scaled_matmul(J4t, dt, s4.jac, J3t, d);
                chain_stage_dv(s4, dt, s4.jac, D3, D4, d);

                const double w6 = dt / 6.0;
                C.clear();
                accumulate(C, w6, D1, d);
                accumulate(C, 2.0 * w6, D2, d);
                accumulate(C, 2.0 * w6, D3, d);
                accumulate(C, w6, D4, d);
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        A[i * d + j] = (i == j ? 1.0 : 0.0) +
                                       w6 * (J1t[i * d + j] + 2.0 * J2t[i * d + j] +
                                             2.0 * J3t[i * d + j] + J4t[i * d + j]);
                for (int c = 0; c < d; ++c)
                    x[c] += w6 * (s1.value[c] + 2.0 * s2.value[c] + 2.0 * s3.value[c] +
                                  s4.value[c]);
            }
            for (int c = 0; c < d; ++c)
                if (!std::isfinite(x[c]))
                    throw NumericalBlowup("flow: non-finite state at step " + std::to_string(k));
            sf.offsets[p + 1] = sf.offsets[p] + C.n;
            for (int e = 0; e < C.n; ++e) {
                FlowResult::Entry en;
                en.tnode = C.tnode[e];
                en.cell = C.cell[e];
                std::memcpy(en.mat, C.mat[e], sizeof(en.mat));
                entries.push_back(en);
            }
        }
        sf.entries = std::move(entries);
    }
    return res;
}

std::vector<double> FlowResult::apply_dphi_dv(const VelocityField& dv) const {
    if (!dv.grid.same_layout(grid)) throw InvalidInput("apply_dphi_dv: grid mismatch");
    const int d = grid.d;
    const std::size_t n = phi0.n;
    const std::size_t md = grid.num_cells();
    std::vector<double> u(n * d, 0.0);
    double tmp[3];
    for (const auto& sf : steps) {
        for (std::size_t p = 0; p < n; ++p) {
            const double* A = &sf.A[p * d * d];
            double* up = &u[p * d];
            for (int i = 0; i < d; ++i) {
                tmp[i] = 0.0;
                for (int j = 0; j < d; ++j) tmp[i] += A[i * d + j] * up[j];
            }
            for (int e = sf.offsets[p]; e < sf.offsets[p + 1]; ++e) {
                const auto& en = sf.entries[e];
                const std::size_t base = (std::size_t)en.tnode * d * md;
                for (int cp = 0; cp < d; ++cp) {
                    const double dvc = dv.values[base + (std::size_t)cp * md + en.cell];
                    for (int i = 0; i < d; ++i) tmp[i] += en.mat[i * d + cp] * dvc;
                }
            }
            for (int i = 0; i < d; ++i) up[i] = tmp[i];
        }
    }
    return u;
}

VelocityField FlowResult::apply_dphi_dv_T(const std::vector<double>& w) const {
    const int d = grid.d;
    const std::size_t n = phi0.n;
    const std::size_t md = grid.num_cells();
    if (w.size() != n * d) throw InvalidInput("apply_dphi_dv_T: shape mismatch");
    VelocityField out(grid);
    std::vector<double> a(w);
    double tmp[3];
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        const auto& sf = *it;
        for (std::size_t p = 0; p < n; ++p) {
            double* ap = &a[p * d];
            for (int e = sf.offsets[p]; e < sf.offsets[p + 1]; ++e) {
                const auto& en = sf.entries[e];
                const std::size_t base = (std::size_t)en.tnode * d * md;
                for (int cp = 0; cp < d; ++cp) {
                    double acc = 0.0;
                    for (int i = 0; i < d; ++i) acc += en.mat[i * d + cp] * ap[i];
                    out.values[base + (std::size_t)cp * md + en.cell] += acc;
                }
            }
            const double* A = &sf.A[p * d * d];
            for (int j = 0; j < d; ++j) {
                tmp[j] = 0.0;
                for (int i = 0; i < d; ++i) tmp[j] += A[i * d + j] * ap[i];
            }
            for (int j = 0; j < d; ++j) ap[j] = tmp[j];
        }
    }
    return out;
}

SolutionMap solution_map(const FieldInterpolant& T, const VelocityField& v,
                         const ScalarField& z, const SolverConfig& cfg) {
    if (T.grid().m != v.grid.m || T.grid().d != v.grid.d)
        throw InvalidInput("solution_map: template grid mismatch");
    if (z.grid.m != v.grid.m || z.grid.d != v.grid.d)
        throw InvalidInput("solution_map: source grid mismatch");
    SolutionMap sm;
    sm.flow = solve_backward_flow(v, cfg);
    InterpResult ir = T.eval(sm.flow.phi0);
    sm.template_vals = std::move(ir.values);
    sm.template_grads = std::move(ir.grads);
    sm.R = ScalarField(z.grid);
    for (std::size_t i = 0; i < sm.R.size(); ++i)
        sm.R.values[i] = sm.template_vals[i] + z.values[i];
    return sm;
}

SolutionMap solution_map(const ScalarField& T, const VelocityField& v, const ScalarField& z,
                         const SolverConfig& cfg) {
    FieldInterpolant interp(T, cfg.template_order);
    return solution_map(interp, v, z, cfg);
}

std::vector<double> apply_dR_dv(const SolutionMap& sm, const VelocityField& dv) {
    const int d = sm.flow.grid.d;
    std::vector<double> u = sm.flow.apply_dphi_dv(dv);
    std::vector<double> out(sm.flow.phi0.n, 0.0);
    for (std::size_t p = 0; p < out.size(); ++p)
        for (int c = 0; c < d; ++c) out[p] += sm.template_grads[p * d + c] * u[p * d + c];
    return out;
}

VelocityField apply_dR_dv_T(const SolutionMap& sm, const std::vector<double>& w) {
    const int d = sm.flow.grid.d;
    if (w.size() != sm.flow.phi0.n) throw InvalidInput("apply_dR_dv_T: shape mismatch");
    std::vector<double> wv(w.size() * d);
    for (std::size_t p = 0; p < w.size(); ++p)
        for (int c = 0; c < d; ++c) wv[p * d + c] = sm.template_grads[p * d + c] * w[p];
    return sm.flow.apply_dphi_dv_T(wv);
}

}  // namespace metarec
