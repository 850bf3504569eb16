#include "metarec/types.hpp"

#include <cmath>

namespace metarec {

PointSet cell_centers(const CellGrid& g) {
    PointSet pts(g.d, g.num_cells());
    const double h = g.hx();
    std::vector<int> idx(g.d, 0);
    for (std::size_t p = 0; p < pts.n; ++p) {
        for (int k = 0; k < g.d; ++k) pts.at(p, k) = (idx[k] + 0.5) * h;
        for (int k = 0; k < g.d; ++k) {
            if (++idx[k] < g.m) break;
            idx[k] = 0;
        }
    }
    return pts;
}

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace metarec
