#ifndef METAREC_INTERP_HPP
#define METAREC_INTERP_HPP

#include <array>
#include <vector>

#include "metarec/types.hpp"

namespace metarec {

enum class InterpOrder { linear, cubic };

struct InterpResult {
    std::vector<double> values;  // n
    std::vector<double> grads;   // n*d, point-major
};

// Interpolant of a scalar field with analytic spatial gradients.
// Queries are clamped to the cell-center bounding box and extended by the
// nearest value; the gradient vanishes in clamped directions.
// The cubic variant is an interpolating B-spline: coefficients come from a
// tridiagonal prefilter with linear extrapolation at the boundary, so affine
// fields are reproduced exactly.
class FieldInterpolant {
public:
    FieldInterpolant(const ScalarField& f, InterpOrder order);

    void eval(const double* x, double* value, double* grad) const;
    InterpResult eval(const PointSet& pts) const;

    const CellGrid& grid() const { return grid_; }
    InterpOrder order() const { return order_; }

private:
    CellGrid grid_;
    InterpOrder order_;
    std::vector<double> coef_;
};

InterpResult interp_spline(const ScalarField& f, const PointSet& pts, InterpOrder order);

// Multilinear stencil at a single spatial point: cell indices, weights and
// weight gradients (zero along clamped axes).
struct LinStencil {
    int n = 0;
    int idx[8];
    double w[8];
    double dw[8 * 3];  // dw[c*d + a] = d w_c / d x_a
};

void linear_stencil(const CellGrid& g, const double* x, LinStencil& out);

// Space-time multilinear evaluation of the velocity at one point.
// The stencil lists (time-node, cell) pairs with their weights; the
// coefficient of component c at node entry e is v[(tnode[e]*d + c)*m^d + cell[e]].
struct VelPointEval {
    double value[3];
    double jac[9];  // jac[c*d + a] = d value_c / d x_a
    int nst = 0;
    int tnode[16];
    int cell[16];
    double w[16];
};

void eval_velocity_at(const VelocityField& v, double t, const double* x, VelPointEval& out);

struct VelInterpResult {
    std::vector<double> values;   // n*d
    std::vector<double> jac_pts;  // n*d*d
    std::vector<VelPointEval> stencils;
};

VelInterpResult interp_velocity(const VelocityField& v, double t, const PointSet& pts);

// Coarse-to-fine transfer: fine.m must be exactly twice the coarse m.
ScalarField prolongate(const ScalarField& coarse, const CellGrid& fine);
VelocityField prolongate(const VelocityField& coarse, const CellGrid& fine);

// 2^d block averaging onto a grid with half the resolution.
ScalarField restrict_average(const ScalarField& fine);

}  // namespace metarec

#endif
