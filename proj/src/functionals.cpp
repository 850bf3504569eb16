#include "metarec/functionals.hpp"

#include <cmath>

namespace metarec {

namespace {

void check_same_geometry(const Sinogram& x, const Sinogram& y, const char* what) {
    if (!x.geom.compatible(y.geom)) throw InvalidInput(std::string(what) + ": geometry mismatch");
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

RadonOperator::RadonOperator(const SinogramGeometry& geom, const CellGrid& grid)
    : geom_(geom), opnorm_(metarec::opnorm_KtK(geom, grid)) {}

Sinogram RadonOperator::forward(const ScalarField& f) const { return radon_forward(f, geom_); }

ScalarField RadonOperator::adjoint(const Sinogram& s, const CellGrid& grid) const {
    return radon_adjoint(s, grid);
}

IdentityOperator::IdentityOperator(const CellGrid& grid) {
    geom_.dim = grid.d;
    geom_.q = (int)grid.num_cells();
    geom_.slices = 1;
    geom_.angles_deg = {0.0};
    geom_.level = 0;
}

Sinogram IdentityOperator::forward(const ScalarField& f) const {
    Sinogram s(geom_);
    s.data = f.values;
    return s;
}

ScalarField IdentityOperator::adjoint(const Sinogram& s, const CellGrid& grid) const {
    ScalarField f(grid);
    f.values = s.data;
    return f;
}

double ssd(const Sinogram& x, const Sinogram& y) {
    check_same_geometry(x, y, "ssd");
    double s = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = x.data[i] - y.data[i];
        s += d * d;
    }
    return 0.5 * x.geom.hy() * s;
}

std::vector<double> ssd_grad(const Sinogram& x, const Sinogram& y) {
    check_same_geometry(x, y, "ssd_grad");
    std::vector<double> g(x.data.size());
    const double hy = x.geom.hy();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = hy * (x.data[i] - y.data[i]);
    return g;
}

double ncc(const Sinogram& x, const Sinogram& y) {
    check_same_geometry(x, y, "ncc");
    const double xx = dot(x.data, x.data), yy = dot(y.data, y.data), xy = dot(x.data, y.data);
    if (xx == 0.0 || yy == 0.0) throw InvalidInput("ncc: zero-norm input");
    return 1.0 - (xy * xy) / (xx * yy);
}

std::vector<double> ncc_grad(const Sinogram& x, const Sinogram& y) {
    check_same_geometry(x, y, "ncc_grad");
    const double xx = dot(x.data, x.data), yy = dot(y.data, y.data), xy = dot(x.data, y.data);
    if (xx == 0.0 || yy == 0.0) throw InvalidInput("ncc_grad: zero-norm input");
    std::vector<double> g(x.data.size());
    const double a = -2.0 * xy / (xx * yy);
    const double b = 2.0 * xy * xy / (xx * xx * yy);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = a * y.data[i] + b * x.data[i];
    return g;
}

double tv_value(const ScalarField& z) {
    check_finite(z.values, "tv_value");
    const CellGrid& g = z.grid;
    const int d = g.d;
    const int m = g.m;
    const double hinv = (double)m;
    std::size_t stride[3] = {1, (std::size_t)m, (std::size_t)m * m};
    std::vector<int> idx(d, 0);
    double acc = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            if (idx[k] < m - 1) {
                const double dz = (z.values[i + stride[k]] - z.values[i]) * hinv;
                s += dz * dz;
            }
        }
        acc += std::sqrt(s);
        for (int k = 0; k < d; ++k) {
            if (++idx[k] < m) break;
            idx[k] = 0;
        }
    }
    return g.cell_volume() * acc;
}

Objective::Objective(std::shared_ptr<const FieldInterpolant> T, Sinogram g,
                     std::shared_ptr<const ForwardOperator> K,
                     std::shared_ptr<const RegOperatorB> B, ObjectiveConfig cfg,
                     SolverConfig solver)
    : T_(std::move(T)), g_(std::move(g)), K_(std::move(K)), B_(std::move(B)), cfg_(cfg),
      solver_(solver) {}

double Objective::e2_value(const ScalarField& z) const {
    if (cfg_.e2 == SourceReg::tv) return cfg_.lambda2 * tv_value(z);
    // L^2 source: lambda2 * 1/2 h_X^d z^T z
    double s = 0.0;
    for (double v : z.values) s += v * v;
    return cfg_.lambda2 * 0.5 * z.grid.cell_volume() * s;
}

ObjectiveEval Objective::eval(const VelocityField& v, const ScalarField& z) const {
    ObjectiveEval ev;
    ev.sm = solution_map(*T_, v, z, solver_);
    ev.Kr = K_->forward(ev.sm.R);
    ev.parts.data = cfg_.data == DataTerm::ssd ? ssd(ev.Kr, g_) : ncc(ev.Kr, g_);
    ev.parts.e1 = e1_value_grad(v, *B_, cfg_.lambda1).first;
    ev.parts.e2 = e2_value(z);
    return ev;
}

double Objective::data_value(const SolutionMap& sm, const ScalarField& z, Sinogram* KrOut) const {
    ScalarField R(z.grid);
    for (std::size_t i = 0; i < R.size(); ++i) R.values[i] = sm.template_vals[i] + z.values[i];
    Sinogram Kr = K_->forward(R);
    const double val = cfg_.data == DataTerm::ssd ? ssd(Kr, g_) : ncc(Kr, g_);
    if (KrOut) *KrOut = std::move(Kr);
    return val;
}

double Objective::data_value(const VelocityField& v, const ScalarField& z) const {
    SolutionMap sm = solution_map(*T_, v, z, solver_);
    return data_value(sm, z);
}

std::vector<double> Objective::data_grad(const Sinogram& Kr) const {
    return cfg_.data == DataTerm::ssd ? ssd_grad(Kr, g_) : ncc_grad(Kr, g_);
}

VelocityField Objective::grad_v_H(const ObjectiveEval& ev) const {
    return grad_v_from(ev.sm, ev.Kr);
}

std::vector<double> Objective::grad_z_H(const ObjectiveEval& ev) const {
    return grad_z_from(ev.Kr, ev.sm.R.grid);
}

VelocityField Objective::grad_v_from(const SolutionMap& sm, const Sinogram& Kr) const {
    Sinogram dg(Kr.geom);
    dg.data = data_grad(Kr);
    ScalarField back = K_->adjoint(dg, sm.R.grid);
    return apply_dR_dv_T(sm, back.values);
}

std::vector<double> Objective::grad_z_from(const Sinogram& Kr, const CellGrid& grid) const {
    Sinogram dg(Kr.geom);
    dg.data = data_grad(Kr);
    return K_->adjoint(dg, grid).values;
}

}  // namespace metarec
