#ifndef METAREC_TYPES_HPP
#define METAREC_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace metarec {

// Error categories; the C API and the CLI map these onto exit codes.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& msg, double residual)
        : std::runtime_error(msg), residual(residual) {}
    double residual;
};

class NumericalBlowup : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Cell-centered discretization of (0,1)^d plus a uniform time partition.
// Cell centers are x_i = (i + 1/2) * h_x for i = 0..m-1 per axis (0-based).
// mt = 0 means a stationary velocity field with a single time node.
struct CellGrid {
    int d = 2;
    int m = 0;
    int mt = 0;

    CellGrid() = default;
    CellGrid(int d_, int m_, int mt_ = 0) : d(d_), m(m_), mt(mt_) {
        if (d < 2 || d > 3) throw InvalidInput("CellGrid: dimension must be 2 or 3");
        if (m < 1) throw InvalidInput("CellGrid: cells-per-axis must be positive");
        if (mt < 0) throw InvalidInput("CellGrid: time-node count must be non-negative");
    }

    double hx() const { return 1.0 / m; }
    // Quadrature weight for the time integral; a stationary field covers [0,1].
    double ht() const { return mt >= 1 ? 1.0 / mt : 1.0; }
    int time_nodes() const { return mt + 1; }

    std::size_t num_cells() const {
        std::size_t n = 1;
        for (int k = 0; k < d; ++k) n *= static_cast<std::size_t>(m);
        return n;
    }
    std::size_t velocity_size() const {
        return static_cast<std::size_t>(d) * time_nodes() * num_cells();
    }
    double cell_volume() const { return std::pow(hx(), d); }

    bool same_layout(const CellGrid& o) const { return d == o.d && m == o.m && mt == o.mt; }
};

// Image sampled at the cell centers, lexicographic order (first axis fastest).
struct ScalarField {
    CellGrid grid;
    std::vector<double> values;
    double lo = 0.0, hi = 1.0;  // range hint for export scaling only

    ScalarField() = default;
    explicit ScalarField(const CellGrid& g, double fill = 0.0)
        : grid(g), values(g.num_cells(), fill) {}

    std::size_t size() const { return values.size(); }
};

// Time-dependent velocity field, layout time-major, then component-major,
// then lexicographic space: index = (t * d + c) * m^d + s.
struct VelocityField {
    CellGrid grid;
    std::vector<double> values;

    VelocityField() = default;
    explicit VelocityField(const CellGrid& g, double fill = 0.0)
        : grid(g), values(g.velocity_size(), fill) {}

    std::size_t size() const { return values.size(); }
    std::size_t block_offset(int t, int c) const {
        return (static_cast<std::size_t>(t) * grid.d + c) * grid.num_cells();
    }
};

// A batch of query points, point-major layout: coords[p * d + axis].
struct PointSet {
    int d = 2;
    std::size_t n = 0;
    std::vector<double> coords;

    PointSet() = default;
    PointSet(int d_, std::size_t n_) : d(d_), n(n_), coords(n_ * d_, 0.0) {}

    double& at(std::size_t p, int axis) { return coords[p * d + axis]; }
    double at(std::size_t p, int axis) const { return coords[p * d + axis]; }
};

// All cell centers of a grid, in field order.
PointSet cell_centers(const CellGrid& g);

// Lexicographic index helpers (first axis fastest).
inline std::size_t lex_index(const CellGrid& g, const int* idx) {
    std::size_t s = 0;
    for (int k = g.d - 1; k >= 0; --k) s = s * g.m + idx[k];
    return s;
}

void check_finite(const std::vector<double>& v, const char* what);

}  // namespace metarec

#endif
