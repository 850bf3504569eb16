#include "metarec/interp.hpp"

#include <algorithm>
#include <cmath>

namespace metarec {

namespace {

// Per-axis locate on the cell-center lattice with clamping.
struct AxisLoc {
    int i0;
    double f;
    bool clamped;
};

AxisLoc locate(const CellGrid& g, double x) {
    const double h = g.hx();
    const double lo = 0.5 * h, hi = 1.0 - 0.5 * h;
    AxisLoc loc;
    loc.clamped = (x < lo || x > hi);
    const double xc = std::clamp(x, lo, hi);
    double u = xc / h - 0.5;  // in [0, m-1]
    int i0 = static_cast<int>(std::floor(u));
    i0 = std::clamp(i0, 0, g.m - 2);
    loc.i0 = i0;
    loc.f = u - i0;
    return loc;
}

void cubic_weights(double f, double* w, double* dw) {
    const double f2 = f * f, f3 = f2 * f;
    const double omf = 1.0 - f;
    w[0] = omf * omf * omf / 6.0;
    w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    w[3] = f3 / 6.0;
    if (dw) {
        dw[0] = -0.5 * omf * omf;
        dw[1] = 0.5 * (3.0 * f2 - 4.0 * f);
        dw[2] = 0.5 * (-3.0 * f2 + 2.0 * f + 1.0);
        dw[3] = 0.5 * f2;
    }
}

// Solve (c[j-1] + 4 c[j] + c[j+1]) / 6 = s[j] with end rows c[0] = s[0],
// c[m-1] = s[m-1] (ghosts extrapolate linearly). Thomas algorithm on a line
// with stride access.
void prefilter_line(double* data, int m, int stride, std::vector<double>& cp,
                    std::vector<double>& dp) {
    if (m < 3) return;  // end rows already interpolate
    cp.resize(m);
    dp.resize(m);
    // rows: [1 0 ...], [1/6 4/6 1/6], ..., [... 0 1]
    cp[0] = 0.0;
    dp[0] = data[0];
    for (int i = 1; i < m - 1; ++i) {
        const double a = 1.0 / 6.0, b = 4.0 / 6.0, c = 1.0 / 6.0;
        const double denom = b - a * cp[i - 1];
        cp[i] = c / denom;
        dp[i] = (data[i * stride] - a * dp[i - 1]) / denom;
    }
    const double denom = 1.0 - 0.0 * cp[m - 2];
    dp[m - 1] = data[(m - 1) * stride] / denom;
    cp[m - 1] = 0.0;
    data[(m - 1) * stride] = dp[m - 1];
    for (int i = m - 2; i >= 0; --i)
        data[i * stride] = dp[i] - cp[i] * data[(i + 1) * stride];
}

// Coefficient fetch with linear extrapolation outside [0, m-1].
inline double coef_at(const double* c, int m, long stride, int j) {
    if (j < 0) return 2.0 * c[0] - c[stride];
    if (j > m - 1) return 2.0 * c[(m - 1) * stride] - c[(m - 2) * stride];
    return c[j * stride];
}

}  // namespace

void linear_stencil(const CellGrid& g, const double* x, LinStencil& out) {
    const int d = g.d;
    AxisLoc loc[3];
    for (int k = 0; k < d; ++k) loc[k] = locate(g, x[k]);
    const double hinv = static_cast<double>(g.m);
    const int ncorner = 1 << d;
    out.n = ncorner;
    std::size_t stride[3] = {1, static_cast<std::size_t>(g.m),
                             static_cast<std::size_t>(g.m) * g.m};
    for (int c = 0; c < ncorner; ++c) {
        std::size_t idx = 0;
        double wt = 1.0;
        for (int k = 0; k < d; ++k) {
            const int bit = (c >> k) & 1;
            idx += stride[k] * (loc[k].i0 + bit);
            wt *= bit ? loc[k].f : (1.0 - loc[k].f);
        }
        out.idx[c] = static_cast<int>(idx);
        out.w[c] = wt;
        for (int a = 0; a < d; ++a) {
            double dwt = 1.0;
            for (int k = 0; k < d; ++k) {
                const int bit = (c >> k) & 1;
                if (k == a)
                    dwt *= loc[k].clamped ? 0.0 : (bit ? hinv : -hinv);
                else
                    dwt *= bit ? loc[k].f : (1.0 - loc[k].f);
            }
            out.dw[c * d + a] = dwt;
        }
    }
}

FieldInterpolant::FieldInterpolant(const ScalarField& f, InterpOrder order)
    : grid_(f.grid), order_(order), coef_(f.values) {
    check_finite(f.values, "interp field");
    if (order_ == InterpOrder::cubic) {
        const int m = grid_.m;
        std::vector<double> cp, dp;
        if (grid_.d == 2) {
            for (int j = 0; j < m; ++j) prefilter_line(&coef_[j * (std::size_t)m], m, 1, cp, dp);
            for (int i = 0; i < m; ++i) prefilter_line(&coef_[i], m, m, cp, dp);
        } else {
            const std::size_t mm = (std::size_t)m * m;
            for (std::size_t p = 0; p < mm; ++p)
                prefilter_line(&coef_[(p / m) * (std::size_t)m * m + (p % m)], m, m, cp, dp);
            // axis 0 and 2
            for (int k = 0; k < m; ++k)
                for (int j = 0; j < m; ++j)
                    prefilter_line(&coef_[k * mm + j * (std::size_t)m], m, 1, cp, dp);
            for (int j = 0; j < m; ++j)
                for (int i = 0; i < m; ++i)
                    prefilter_line(&coef_[j * (std::size_t)m + i], m, (int)mm, cp, dp);
        }
    }
}

void FieldInterpolant::eval(const double* x, double* value, double* grad) const {
    const int d = grid_.d;
    const int m = grid_.m;
    const double hinv = static_cast<double>(m);
    if (order_ == InterpOrder::linear) {
        LinStencil st;
        linear_stencil(grid_, x, st);
        double v = 0.0, gr[3] = {0, 0, 0};
        for (int c = 0; c < st.n; ++c) {
            const double cf = coef_[st.idx[c]];
            v += st.w[c] * cf;
            for (int a = 0; a < d; ++a) gr[a] += st.dw[c * d + a] * cf;
        }
        *value = v;
        if (grad)
            for (int a = 0; a < d; ++a) grad[a] = gr[a];
        return;
    }
    AxisLoc loc[3];
    double w[3][4], dw[3][4];
    for (int k = 0; k < d; ++k) {
        loc[k] = locate(grid_, x[k]);
        cubic_weights(loc[k].f, w[k], dw[k]);
    }
    double v = 0.0, gr[3] = {0, 0, 0};
    if (d == 2) {
        for (int jy = 0; jy < 4; ++jy) {
            const int iy = loc[1].i0 - 1 + jy;
            // gather a row of x-coefficients at (possibly ghost) row iy
            double row[4];
            for (int jx = 0; jx < 4; ++jx) {
                const int ix = loc[0].i0 - 1 + jx;
                double cxy;
                if (iy >= 0 && iy <= m - 1) {
                    cxy = coef_at(&coef_[(std::size_t)iy * m], m, 1, ix);
                } else {
                    const int r0 = iy < 0 ? 0 : m - 1;
                    const int r1 = iy < 0 ? 1 : m - 2;
                    const double c0 = coef_at(&coef_[(std::size_t)r0 * m], m, 1, ix);
                    const double c1 = coef_at(&coef_[(std::size_t)r1 * m], m, 1, ix);
                    cxy = 2.0 * c0 - c1;
                }
                row[jx] = cxy;
            }
            double sv = 0.0, sg = 0.0;
            for (int jx = 0; jx < 4; ++jx) {
                sv += w[0][jx] * row[jx];
                sg += dw[0][jx] * row[jx];
            }
            v += w[1][jy] * sv;
            gr[0] += w[1][jy] * sg;
            gr[1] += dw[1][jy] * sv;
        }
    } else {
        for (int jz = 0; jz < 4; ++jz)
            for (int jy = 0; jy < 4; ++jy)
                for (int jx = 0; jx < 4; ++jx) {
                    const int iz = loc[2].i0 - 1 + jz;
                    const int iy = loc[1].i0 - 1 + jy;
                    const int ix = loc[0].i0 - 1 + jx;
                    // ghost handling via nested extrapolation
                    auto fetch2 = [&](int zz) {
                        auto fetch1 = [&](int yy) {
                            return coef_at(&coef_[((std::size_t)zz * m + yy) * m], m, 1, ix);
                        };
                        if (iy >= 0 && iy <= m - 1) return fetch1(iy);
                        const int r0 = iy < 0 ? 0 : m - 1;
                        const int r1 = iy < 0 ? 1 : m - 2;
                        return 2.0 * fetch1(r0) - fetch1(r1);
                    };
                    double cf;
                    if (iz >= 0 && iz <= m - 1)
                        cf = fetch2(iz);
                    else {
                        const int r0 = iz < 0 ? 0 : m - 1;
                        const int r1 = iz < 0 ? 1 : m - 2;
                        cf = 2.0 * fetch2(r0) - fetch2(r1);
                    }
                    const double wxy = w[0][jx] * w[1][jy] * w[2][jz];
                    v += wxy * cf;
                    gr[0] += dw[0][jx] * w[1][jy] * w[2][jz] * cf;
                    gr[1] += w[0][jx] * dw[1][jy] * w[2][jz] * cf;
                    gr[2] += w[0][jx] * w[1][jy] * dw[2][jz] * cf;
                }
    }
    *value = v;
    if (grad)
        for (int a = 0; a < d; ++a)
            grad[a] = loc[a].clamped ? 0.0 : gr[a] * hinv;
}

InterpResult FieldInterpolant::eval(const PointSet& pts) const {
    if (pts.d != grid_.d) throw InvalidInput("interp: point dimension mismatch");
    check_finite(pts.coords, "interp points");
    InterpResult r;
    r.values.resize(pts.n);
    r.grads.resize(pts.n * grid_.d);
    for (std::size_t p = 0; p < pts.n; ++p)
        eval(&pts.coords[p * grid_.d], &r.values[p], &r.grads[p * grid_.d]);
    return r;
}

InterpResult interp_spline(const ScalarField& f, const PointSet& pts, InterpOrder order) {
    return FieldInterpolant(f, order).eval(pts);
}

void eval_velocity_at(const VelocityField& v, double t, const double* x, VelPointEval& out) {
    if (t < 0.0 || t > 1.0) throw InvalidInput("eval_velocity_at: t outside [0,1]");
    const CellGrid& g = v.grid;
    const int d = g.d;
    const std::size_t md = g.num_cells();
    int tn[2];
    double tw[2];
    int ntt;
    if (g.mt == 0) {
        ntt = 1;
        tn[0] = 0;
        tw[0] = 1.0;
    } else {
        double tt = t * g.mt;
        int j0 = std::clamp((int)std::floor(tt), 0, g.mt - 1);
        ntt = 2;
        tn[0] = j0;
        tn[1] = j0 + 1;
        tw[1] = tt - j0;
        tw[0] = 1.0 - tw[1];
    }
    LinStencil st;
    linear_stencil(g, x, st);
    out.nst = 0;
    for (int c = 0; c < d; ++c) out.value[c] = 0.0;
    for (int e = 0; e < d * d; ++e) out.jac[e] = 0.0;
    for (int j = 0; j < ntt; ++j) {
        for (int c = 0; c < st.n; ++c) {
            const int k = out.nst++;
            out.tnode[k] = tn[j];
            out.cell[k] = st.idx[c];
            out.w[k] = tw[j] * st.w[c];
            const std::size_t base = (std::size_t)tn[j] * d * md;
            for (int comp = 0; comp < d; ++comp) {
                const double cf = v.values[base + (std::size_t)comp * md + st.idx[c]];
                out.value[comp] += out.w[k] * cf;
                for (int a = 0; a < d; ++a)
                    out.jac[comp * d + a] += tw[j] * st.dw[c * d + a] * cf;
            }
        }
    }
}

VelInterpResult interp_velocity(const VelocityField& v, double t, const PointSet& pts) {
    if (t < 0.0 || t > 1.0) throw InvalidInput("interp_velocity: t outside [0,1]");
    if (pts.d != v.grid.d) throw InvalidInput("interp_velocity: dimension mismatch");
    check_finite(v.values, "velocity");
    const int d = v.grid.d;
    VelInterpResult r;
    r.values.resize(pts.n * d);
    r.jac_pts.resize(pts.n * d * d);
    r.stencils.resize(pts.n);
    for (std::size_t p = 0; p < pts.n; ++p) {
        eval_velocity_at(v, t, &pts.coords[p * d], r.stencils[p]);
        for (int c = 0; c < d; ++c) r.values[p * d + c] = r.stencils[p].value[c];
        for (int e = 0; e < d * d; ++e) r.jac_pts[p * d * d + e] = r.stencils[p].jac[e];
    }
    return r;
}

namespace {

template <typename FieldLike>
void check_doubling(const CellGrid& coarse, const CellGrid& fine) {
    if (fine.m != 2 * coarse.m || fine.d != coarse.d)
        throw InvalidInput("prolongate: fine grid must double the coarse resolution");
}

// Multilinear interpolation of one coarse component at the fine cell centers.
void prolongate_component(const CellGrid& coarse, const CellGrid& fine, const double* src,
                          double* dst) {
    PointSet pts = cell_centers(fine);
    const int d = coarse.d;
    for (std::size_t p = 0; p < pts.n; ++p) {
        LinStencil st;
        linear_stencil(coarse, &pts.coords[p * d], st);
        double v = 0.0;
        for (int c = 0; c < st.n; ++c) v += st.w[c] * src[st.idx[c]];
        dst[p] = v;
    }
}

}  // namespace

ScalarField prolongate(const ScalarField& coarse, const CellGrid& fine) {
    check_doubling<ScalarField>(coarse.grid, fine);
    ScalarField out(fine);
    out.lo = coarse.lo;
    out.hi = coarse.hi;
    prolongate_component(coarse.grid, fine, coarse.values.data(), out.values.data());
    return out;
}

VelocityField prolongate(const VelocityField& coarse, const CellGrid& fine) {
    check_doubling<VelocityField>(coarse.grid, fine);
    if (fine.mt != coarse.grid.mt)
        throw InvalidInput("prolongate: time nodes must be unchanged");
    VelocityField out(fine);
    const int blocks = coarse.grid.time_nodes() * coarse.grid.d;
    const std::size_t cmd = coarse.grid.num_cells();
    const std::size_t fmd = fine.num_cells();
    for (int b = 0; b < blocks; ++b)
        prolongate_component(coarse.grid, fine, &coarse.values[b * cmd], &out.values[b * fmd]);
    return out;
}

ScalarField restrict_average(const ScalarField& fine) {
    if (fine.grid.m % 2 != 0) throw InvalidInput("restrict: odd resolution");
    CellGrid cg(fine.grid.d, fine.grid.m / 2, fine.grid.mt);
    ScalarField out(cg);
    out.lo = fine.lo;
    out.hi = fine.hi;
    const int d = cg.d;
    const int mc = cg.m, mf = fine.grid.m;
    const int ncorner = 1 << d;
    std::vector<int> idx(d, 0);
    for (std::size_t p = 0; p < out.size(); ++p) {
        double s = 0.0;
        for (int c = 0; c < ncorner; ++c) {
            std::size_t fi = 0;
            for (int k = d - 1; k >= 0; --k) fi = fi * mf + (2 * idx[k] + ((c >> k) & 1));
            s += fine.values[fi];
        }
        out.values[p] = s / ncorner;
        for (int k = 0; k < d; ++k) {
            if (++idx[k] < mc) break;
            idx[k] = 0;
        }
    }
    return out;
}

}  // namespace metarec
