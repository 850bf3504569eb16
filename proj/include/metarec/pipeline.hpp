#ifndef METAREC_PIPELINE_HPP
#define METAREC_PIPELINE_HPP

#include <string>
#include <vector>

#include "metarec/ipalm.hpp"

namespace metarec {

struct PyramidLevel {
    CellGrid grid;       // image grid at this level
    ScalarField T;       // block-averaged template
    Sinogram g;          // pairwise-downsampled measurements
    SinogramGeometry geom;
};

// Coarse-to-fine pyramid: image side halves per level via 2^d block averaging,
// measurements follow the pairwise /4 rule, q = 1.5 * 2^k. Returned coarsest
// first.
std::vector<PyramidLevel> build_pyramid(const ScalarField& T, const Sinogram& g,
                                        int coarsest_m = 32);

struct ReconstructConfig {
    ObjectiveConfig objective;
    SolverConfig solver;
    IpalmConfig ipalm;
    int coarsest_m = 32;
    int mt = 0;  // velocity time intervals; 0 = stationary field
    bool gauss_newton_post = true;
    GaussNewtonConfig gauss_newton;
    std::string report_path;  // per-level diagnostics, optional
};

struct LevelReport {
    int m = 0;
    int q = 0;
    int iterations = 0;
    bool converged = false;
    double initial_J = 0.0;
    double final_J = 0.0;
    std::vector<IpalmIterRecord> history;
};

struct ReconstructResult {
    ScalarField R;                  // reconstruction = deformed template + z
    ScalarField deformed_template;  // T(phi(0, .)) at the finest level
    ScalarField z;
    VelocityField v;
    double final_J = 0.0;
    bool gn_improved = false;
    std::vector<LevelReport> levels;
};

// Full coarse-to-fine reconstruction: iPALM per level starting from zeros at
// the coarsest grid, minimizers prolongated upward, optional Gauss-Newton
// velocity refinement at the finest level (SSD only).
ReconstructResult reconstruct(const ScalarField& T, const Sinogram& g,
                              const ReconstructConfig& cfg);

}  // namespace metarec

#endif
