#include "metarec/radon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metarec {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Walk a ray p0 + t*dir through the m x m pixel grid on [0,1]^2 and report
// exact intersection lengths per cell.
template <class Visit>
void trace_ray(int m, const double* p0, const double* dir, Visit&& visit) {
    const double h = 1.0 / m;
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    // clip against the unit square
    for (int a = 0; a < 2; ++a) {
        if (std::abs(dir[a]) < 1e-14) {
            if (p0[a] <= 0.0 || p0[a] >= 1.0) return;
        } else {
            double t0 = (0.0 - p0[a]) / dir[a];
            double t1 = (1.0 - p0[a]) / dir[a];
            if (t0 > t1) std::swap(t0, t1);
            tmin = std::max(tmin, t0);
            tmax = std::min(tmax, t1);
        }
    }
    if (tmax - tmin <= 1e-14) return;

    const double eps = 1e-12;
    double start[2] = {p0[0] + (tmin + eps) * dir[0], p0[1] + (tmin + eps) * dir[1]};
    int cell[2];
    int step[2];
    double tnext[2], tdelta[2];
    for (int a = 0; a < 2; ++a) {
        cell[a] = std::min(std::max((int)std::floor(start[a] / h), 0), m - 1);
        if (std::abs(dir[a]) < 1e-14) {
            step[a] = 0;
            tnext[a] = std::numeric_limits<double>::infinity();
            tdelta[a] = std::numeric_limits<double>::infinity();
        } else {
            step[a] = dir[a] > 0 ? 1 : -1;
            const double boundary = (cell[a] + (step[a] > 0 ? 1 : 0)) * h;
            tnext[a] = (boundary - p0[a]) / dir[a];
            tdelta[a] = h / std::abs(dir[a]);
        }
    }
    double t = tmin;
    while (t < tmax - 1e-14) {
        const int axis = tnext[0] <= tnext[1] ? 0 : 1;
        const double tstop = std::min(tnext[axis], tmax);
        const double len = tstop - t;
        if (len > 0.0) visit(cell[1] * m + cell[0], len);
        t = tstop;
        if (tstop >= tmax) break;
        cell[axis] += step[axis];
        if (cell[axis] < 0 || cell[axis] >= m) break;
        tnext[axis] += tdelta[axis];
    }
}

struct RayOrigin {
    double p0[2];
    double dir[2];
};

RayOrigin ray_for(double angle_deg, double s) {
    const double th = angle_deg * kPi / 180.0;
    RayOrigin r;
    const double n0 = std::cos(th), n1 = std::sin(th);
    r.p0[0] = 0.5 + s * n0;
    r.p0[1] = 0.5 + s * n1;
    r.dir[0] = -n1;
    r.dir[1] = n0;
    return r;
}

void check_geom(const SinogramGeometry& geom) {
    if (geom.angles_deg.empty() || geom.q < 1)
        throw InvalidInput("radon: empty measurement geometry");
}

}  // namespace

SinogramGeometry make_geometry(int p, const CellGrid& grid) {
    if (p < 1) throw InvalidInput("make_geometry: need at least one angle");
    SinogramGeometry geom;
    geom.dim = grid.d;
    geom.slices = grid.d == 3 ? grid.m : 1;
    geom.q = (3 * grid.m) / 2;  // q = 1.5 * 2^k
    geom.level = (int)std::lround(std::log2((double)grid.m));
    geom.angles_deg.resize(p);
    for (int i = 0; i < p; ++i) geom.angles_deg[i] = 180.0 * i / p;
    return geom;
}

Sinogram radon_forward(const ScalarField& f, const SinogramGeometry& geom) {
    check_geom(geom);
    const CellGrid& g = f.grid;
    if (geom.dim != g.d || (g.d == 3 && geom.slices != g.m))
        throw InvalidInput("radon_forward: geometry/grid mismatch");
    check_finite(f.values, "radon input");
    Sinogram out(geom);
    const int p = (int)geom.angles_deg.size();
    const int q = geom.q;
    const int m = g.m;
    const double extent = std::sqrt((double)g.d);
    const double ds = extent / q;
    const std::size_t slice_stride = (std::size_t)m * m;
    for (int i = 0; i < p; ++i) {
        for (int iz = 0; iz < geom.slices; ++iz) {
            const double* img = f.values.data() + (std::size_t)iz * slice_stride;
            double* row = out.data.data() + ((std::size_t)i * geom.slices + iz) * q;
            for (int j = 0; j < q; ++j) {
                const double s = (j + 0.5) * ds - 0.5 * extent;
                RayOrigin r = ray_for(geom.angles_deg[i], s);
                double acc = 0.0;
                trace_ray(m, r.p0, r.dir,
                          [&](int cell, double len) { acc += len * img[cell]; });
                row[j] = acc;
            }
        }
    }
    return out;
}

ScalarField radon_adjoint(const Sinogram& s, const CellGrid& grid) {
    check_geom(s.geom);
    if (s.geom.dim != grid.d || (grid.d == 3 && s.geom.slices != grid.m))
        throw InvalidInput("radon_adjoint: geometry/grid level mismatch");
    ScalarField out(grid);
    const int p = (int)s.geom.angles_deg.size();
    const int q = s.geom.q;
    const int m = grid.m;
    const double extent = std::sqrt((double)grid.d);
    const double ds = extent / q;
    const std::size_t slice_stride = (std::size_t)m * m;
    for (int i = 0; i < p; ++i) {
        for (int iz = 0; iz < s.geom.slices; ++iz) {
            double* img = out.values.data() + (std::size_t)iz * slice_stride;
            const double* row = s.data.data() + ((std::size_t)i * s.geom.slices + iz) * q;
            for (int j = 0; j < q; ++j) {
                const double sv = row[j];
                if (sv == 0.0) continue;
                const double off = (j + 0.5) * ds - 0.5 * extent;
                RayOrigin r = ray_for(s.geom.angles_deg[i], off);
                trace_ray(m, r.p0, r.dir,
                          [&](int cell, double len) { img[cell] += len * sv; });
            }
        }
    }
    return out;
}

double opnorm_KtK(const SinogramGeometry& geom, const CellGrid& grid, double tol) {
    check_geom(geom);
    ScalarField x(grid, 1.0);
    // deterministic perturbation so the start vector overlaps the principal mode
    unsigned long long state = 0x9e3779b97f4a7c15ull;
    for (double& v : x.values) {
        state = state * 6364136223846793005ull + 1442695040888963407ull;
        v += 1e-3 * (double)(state >> 40) / (double)(1 << 24);
    }
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        double nx = 0.0;
        for (double v : x.values) nx += v * v;
        nx = std::sqrt(nx);
        if (nx == 0.0) return 0.0;
        for (double& v : x.values) v /= nx;
        ScalarField y = radon_adjoint(radon_forward(x, geom), grid);
        double lam = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) lam += x.values[i] * y.values[i];
        if (it > 0 && std::abs(lam - lambda) <= tol * std::abs(lam)) return lam;
        lambda = lam;
        x.values = std::move(y.values);
    }
    return lambda;
}

Sinogram downsample_sinogram(const Sinogram& s) {
    if (s.geom.q % 2 != 0) throw InvalidInput("downsample_sinogram: q must be even");
    SinogramGeometry g = s.geom;
    g.q = s.geom.q / 2;
    g.level = s.geom.level - 1;
    Sinogram out(g);
    const std::size_t rows = s.geom.angles_deg.size() * (std::size_t)s.geom.slices;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = s.data.data() + r * s.geom.q;
        double* dst = out.data.data() + r * g.q;
        for (int j = 0; j < g.q; ++j) dst[j] = (src[2 * j] + src[2 * j + 1]) / 4.0;
    }
    return out;
}

}  // namespace metarec
