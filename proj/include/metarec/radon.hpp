#ifndef METAREC_RADON_HPP
#define METAREC_RADON_HPP

#include <vector>

#include "metarec/types.hpp"

namespace metarec {

// Parallel-beam measurement layout. The detector line covers the diagonal of
// the unit cube (length sqrt(d)) with q cells; h_Y = 1/q stays the quadrature
// weight of the data term. For d = 3 the geometry is a stack of 2-D
// parallel-beam projections rotating about the third axis (`slices` rows per
// angle).
struct SinogramGeometry {
    std::vector<double> angles_deg;  // in [0, 180)
    int q = 0;
    int level = 0;
    int dim = 2;
    int slices = 1;

    double hy() const { return 1.0 / q; }
    std::size_t size() const { return angles_deg.size() * (std::size_t)q * slices; }
    bool compatible(const SinogramGeometry& o) const {
        return angles_deg == o.angles_deg && q == o.q && dim == o.dim && slices == o.slices;
    }
};

struct Sinogram {
    SinogramGeometry geom;
    std::vector<double> data;  // angle-major, then slice, then detector cell

    Sinogram() = default;
    explicit Sinogram(const SinogramGeometry& g, double fill = 0.0)
        : geom(g), data(g.size(), fill) {}
};

// p equally distributed angles in [0, 180) and the level rule q = 1.5 * m.
SinogramGeometry make_geometry(int p, const CellGrid& grid);

// Matrix-free discrete Radon transform: ray-driven with exact
// pixel-intersection lengths, adjoint shares the same weights.
Sinogram radon_forward(const ScalarField& f, const SinogramGeometry& geom);
ScalarField radon_adjoint(const Sinogram& s, const CellGrid& grid);

// Largest eigenvalue of K^T K by power iteration (relative tolerance 1e-4).
double opnorm_KtK(const SinogramGeometry& geom, const CellGrid& grid, double tol = 1e-4);

// Level k -> k-1 measurement downsampling: pairwise (a + b) / 4, bit-exact.
Sinogram downsample_sinogram(const Sinogram& s);

}  // namespace metarec

#endif
