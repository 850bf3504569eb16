#include "metarec/regop.hpp"

#include <array>
#include <cmath>

namespace metarec {

namespace {

// 1-D stencils over symmetric offsets, scaled by the matching power of 1/h.
struct Stencil1D {
    int lo, hi;
    std::array<double, 5> w;  // indexed by offset - lo
};

Stencil1D identity_st() { return {0, 0, {1, 0, 0, 0, 0}}; }
Stencil1D d1_central(double hinv) { return {-1, 1, {-0.5 * hinv, 0.0, 0.5 * hinv, 0, 0}}; }
Stencil1D d2_central(double hinv) {
    const double s = hinv * hinv;
    return {-1, 1, {s, -2.0 * s, s, 0, 0}};
}
Stencil1D d3_central(double hinv) {
    const double s = hinv * hinv * hinv;
    return {-2, 2, {-0.5 * s, s, 0.0, -s, 0.5 * s}};
}
Stencil1D d1_forward(double hinv) { return {0, 1, {-hinv, hinv, 0, 0, 0}}; }

}  // namespace

RegOperatorB::RegOperatorB(RegKind kind, const CellGrid& grid) : kind_(kind), grid_(grid) {
    const int d = grid.d;
    const int m = grid.m;
    const double hinv = (double)m;
    const int pw = pad_;
    const int mp = m + 2 * pw;
    const std::size_t md = grid.num_cells();

    // Stencil sets as per-axis tensor products. third_order: all distinct
    // third partials; curvature: the Laplacian; diffusion: all first partials.
    std::vector<std::array<Stencil1D, 3>> types;
    auto axis_combo = [&](const Stencil1D& a, const Stencil1D& b, const Stencil1D& c) {
        std::array<Stencil1D, 3> t = {a, b, c};
        types.push_back(t);
    };
    const Stencil1D id = identity_st();
    if (kind == RegKind::third_order) {
        if (d == 2) {
            axis_combo(d3_central(hinv), id, id);
            axis_combo(d2_central(hinv), d1_central(hinv), id);
            axis_combo(d1_central(hinv), d2_central(hinv), id);
            axis_combo(id, d3_central(hinv), id);
        } else {
            const Stencil1D s1 = d1_central(hinv), s2 = d2_central(hinv), s3 = d3_central(hinv);
            const Stencil1D opts[3] = {id, s1, s2};
            // orders (a,b,c) with a+b+c = 3
            for (int a = 0; a <= 3; ++a)
                for (int b = 0; b + a <= 3; ++b) {
                    const int c = 3 - a - b;
                    auto pick = [&](int o) { return o == 3 ? s3 : opts[o]; };
                    axis_combo(pick(a), pick(b), pick(c));
                }
        }
    } else if (kind == RegKind::diffusion) {
        for (int a = 0; a < d; ++a) {
            std::array<Stencil1D, 3> t = {id, id, id};
            t[a] = d1_forward(hinv);
            types.push_back(t);
        }
    } else {  // curvature: single Laplacian stencil, assembled as a sum below
        std::array<Stencil1D, 3> t = {id, id, id};
        types.push_back(t);  // placeholder, handled specially
    }

    // map a padded coordinate to its replicated interior cell index
    auto clamp_cell = [&](int i) { return std::min(std::max(i - pw, 0), m - 1); };

    std::vector<Eigen::Triplet<double>> trips;
    std::vector<bool> interior;
    long row = 0;
    std::vector<int> pos(d, 0);
    const std::size_t np = [&] {
        std::size_t r = 1;
        for (int k = 0; k < d; ++k) r *= (std::size_t)mp;
        return r;
    }();

    auto emit_stencil = [&](const std::vector<int>& center,
                            const std::array<Stencil1D, 3>& type) {
        // reject if the stencil leaves the padded domain
        for (int k = 0; k < d; ++k)
            if (center[k] + type[k].lo < 0 || center[k] + type[k].hi > mp - 1) return false;
        bool inside = true;
        std::vector<int> off(d, 0);
        for (int k = 0; k < d; ++k) off[k] = type[k].lo;
        while (true) {
            double w = 1.0;
            std::size_t idx = 0;
            for (int k = d - 1; k >= 0; --k) {
                w *= type[k].w[off[k] - type[k].lo];
                const int pc = center[k] + off[k];
                if (pc < pw || pc > pw + m - 1) inside = false;
                idx = idx * m + clamp_cell(pc);
            }
            if (w != 0.0) trips.emplace_back(row, (long)idx, w);
            int k = 0;
            for (; k < d; ++k) {
                if (++off[k] <= type[k].hi) break;
                off[k] = type[k].lo;
            }
            if (k == d) break;
        }
        return inside;
    };

    if (kind == RegKind::curvature) {
        const Stencil1D s2 = d2_central(hinv);
        for (std::size_t p = 0; p < np; ++p) {
            std::size_t rem = p;
            std::vector<int> center(d);
            for (int k = 0; k < d; ++k) {
                center[k] = (int)(rem % mp);
                rem /= mp;
            }
            bool ok = true;
            for (int k = 0; k < d; ++k)
                if (center[k] < 1 || center[k] > mp - 2) ok = false;
            if (!ok) continue;
            bool inside = true;
            for (int a = 0; a < d; ++a) {
                std::array<Stencil1D, 3> t = {id, id, id};
                t[a] = s2;
                // accumulate all axis contributions into the same row
                std::vector<int> offc(d, 0);
                for (int o = t[a].lo; o <= t[a].hi; ++o) {
                    std::size_t idx = 0;
                    for (int k = d - 1; k >= 0; --k) {
                        const int pc = center[k] + (k == a ? o : 0);
                        if (pc < pw || pc > pw + m - 1) inside = false;
                        idx = idx * m + clamp_cell(pc);
                    }
                    trips.emplace_back(row, (long)idx, t[a].w[o - t[a].lo]);
                }
            }
            interior.push_back(inside);
            ++row;
        }
    } else {
        for (const auto& type : types) {
            for (std::size_t p = 0; p < np; ++p) {
                std::size_t rem = p;
                std::vector<int> center(d);
                for (int k = 0; k < d; ++k) {
                    center[k] = (int)(rem % mp);
                    rem /= mp;
                }
                bool fits = true;
                for (int k = 0; k < d; ++k)
                    if (center[k] + type[k].lo < 0 || center[k] + type[k].hi > mp - 1)
                        fits = false;
                if (!fits) continue;
                interior.push_back(emit_stencil(center, type));
                ++row;
            }
        }
    }

    B_.resize(row, (long)md);
    B_.setFromTriplets(trips.begin(), trips.end());
    BtB_ = (Eigen::SparseMatrix<double>(B_.transpose()) * B_).pruned();
    interior_row_ = std::move(interior);
    btb_diag_.assign(md, 0.0);
    for (long j = 0; j < BtB_.outerSize(); ++j)
        for (Eigen::SparseMatrix<double>::InnerIterator it(BtB_, j); it; ++it)
            if (it.row() == it.col()) btb_diag_[it.row()] = it.value();
}

Eigen::VectorXd RegOperatorB::apply_Bs(const Eigen::VectorXd& comp) const {
    return B_ * comp;
}

void RegOperatorB::apply_weighted_BtB(const VelocityField& v, const Lambda1& lam,
                                      VelocityField& out) const {
    if (!v.grid.same_layout(grid_)) throw InvalidInput("regop: velocity grid mismatch");
    const std::size_t md = grid_.num_cells();
    const int d = grid_.d;
    const int tn = grid_.time_nodes();
    out = VelocityField(grid_);
    Eigen::Map<const Eigen::MatrixXd> vin(v.values.data(), (long)md, (long)d * tn);
    Eigen::Map<Eigen::MatrixXd> vout(out.values.data(), (long)md, (long)d * tn);
    if (lam.spatial != 0.0) vout = lam.spatial * (BtB_ * vin);
    if (lam.l2 != 0.0) vout += lam.l2 * vin;
    if (lam.temporal != 0.0 && grid_.mt >= 1) {
        const double s = lam.temporal * (double)grid_.mt * grid_.mt;  // 1/h_t^2
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < md; ++i) {
                for (int t = 0; t < tn; ++t) {
                    const auto blk = [&](int tt) {
                        return v.values[((std::size_t)tt * d + c) * md + i];
                    };
                    double acc = 0.0;
                    if (t < tn - 1) acc += blk(t) - blk(t + 1);
                    if (t > 0) acc += blk(t) - blk(t - 1);
                    out.values[((std::size_t)t * d + c) * md + i] += s * acc;
                }
            }
    }
}

std::vector<double> RegOperatorB::weighted_diagonal(const Lambda1& lam) const {
    const std::size_t md = grid_.num_cells();
    const int d = grid_.d;
    const int tn = grid_.time_nodes();
    std::vector<double> diag(grid_.velocity_size(), 0.0);
    const double s = grid_.mt >= 1 ? lam.temporal * (double)grid_.mt * grid_.mt : 0.0;
    for (int t = 0; t < tn; ++t)
        for (int c = 0; c < d; ++c)
            for (std::size_t i = 0; i < md; ++i) {
                double v = lam.spatial * btb_diag_[i] + lam.l2;
                if (grid_.mt >= 1) v += s * ((t > 0 ? 1.0 : 0.0) + (t < tn - 1 ? 1.0 : 0.0));
                diag[((std::size_t)t * d + c) * md + i] = v;
            }
    return diag;
}

double RegOperatorB::prox_residual(const VelocityField& x, const VelocityField& v, double c,
                                   const Lambda1& lam, VelocityField& r) const {
    if (!x.grid.same_layout(grid_) || !v.grid.same_layout(grid_))
        throw InvalidInput("prox_residual: velocity grid mismatch");
    const std::size_t md = grid_.num_cells();
    const int d = grid_.d;
    const int tn = grid_.time_nodes();
    r = VelocityField(grid_);
    const long double cs = (long double)c * lam.spatial;
    const long double cl = (long double)c * lam.l2;
    const long double ct =
        grid_.mt >= 1 ? (long double)c * lam.temporal * grid_.mt * grid_.mt : 0.0L;
    long double rn = 0.0L, bn = 0.0L;
    for (int t = 0; t < tn; ++t)
        for (int comp = 0; comp < d; ++comp) {
            const std::size_t base = ((std::size_t)t * d + comp) * md;
            for (std::size_t i = 0; i < md; ++i) {
                // BtB_ is symmetric, so column i holds row i
                long double acc = 0.0L;
                for (Eigen::SparseMatrix<double>::InnerIterator it(BtB_, (long)i); it; ++it)
                    acc += (long double)it.value() * x.values[base + (std::size_t)it.row()];
                long double wi = cs * acc + (1.0L + cl) * x.values[base + i];
                if (ct != 0.0L) {
                    const long double xi = x.values[base + i];
                    if (t > 0) wi += ct * (xi - x.values[base + i - (std::size_t)d * md]);
                    if (t < tn - 1) wi += ct * (xi - x.values[base + i + (std::size_t)d * md]);
                }
                const long double ri = (long double)v.values[base + i] - wi;
                r.values[base + i] = (double)ri;
                rn += ri * ri;
                bn += (long double)v.values[base + i] * v.values[base + i];
            }
        }
    return bn > 0.0L ? (double)sqrtl(rn / bn) : 0.0;
}

Eigen::VectorXd RegOperatorB::solve_spatial(const Eigen::VectorXd& r, double a, double b) const {
    if (a <= 0.0) throw InvalidInput("solve_spatial: diagonal shift must be positive");
    if (b == 0.0) return r / a;
    std::shared_ptr<Factorization> fac;
    {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        for (auto& entry : factor_cache_)
            if (entry.first.first == a && entry.first.second == b) {
                fac = entry.second;
                break;
            }
    }
    if (!fac) {
        Eigen::SparseMatrix<double> S = b * BtB_;
        Eigen::SparseMatrix<double> eye((long)grid_.num_cells(), (long)grid_.num_cells());
        eye.setIdentity();
        S += a * eye;
        fac = std::make_shared<Factorization>(S);
        if (fac->info() != Eigen::Success)
            throw ConvergenceFailure("solve_spatial: factorization failed", 0.0);
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (factor_cache_.size() >= 8) factor_cache_.erase(factor_cache_.begin());
        factor_cache_.emplace_back(std::make_pair(a, b), fac);
    }
    return fac->solve(r);
}

std::pair<double, VelocityField> e1_value_grad(const VelocityField& v, const RegOperatorB& B,
                                               const Lambda1& lam) {
    const CellGrid& g = v.grid;
    VelocityField wv;
    B.apply_weighted_BtB(v, lam, wv);
    const double scale = g.ht() * g.cell_volume();
    double quad = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) quad += v.values[i] * wv.values[i];
    VelocityField grad(g);
    for (std::size_t i = 0; i < v.size(); ++i) grad.values[i] = scale * wv.values[i];
    return {0.5 * scale * quad, std::move(grad)};
}

}  // namespace metarec
