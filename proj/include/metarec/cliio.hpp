#ifndef METAREC_CLIIO_HPP
#define METAREC_CLIIO_HPP

#include <cstdint>
#include <string>

#include "metarec/flow.hpp"
#include "metarec/functionals.hpp"
#include "metarec/radon.hpp"
#include "metarec/types.hpp"

namespace metarec {

// Builtin phantoms rasterized at the cell centers, values in [0, 1]:
//   shepp-logan         standard ten-ellipse head phantom mapped to (0,1)^2
//   shepp-logan-square  same plus an axis-aligned square of side 0.08 and
//                       intensity 1 centered at (0.63, 0.37)
//   gauss-bump          exp(-|x - (0.5,0.5)|^2 / (2 * 0.15^2))
//   disk                indicator of the disk with center (0.5,0.5), r = 0.3
ScalarField make_phantom(const std::string& name, int m);

// Named smooth velocity fields used to manufacture (template, target) pairs
// with a known ground-truth deformation:
//   swirl           rotation about (0.5,0.5) with a Gaussian envelope
//   bend            vertical shear growing with x, Gaussian envelope
//   translate-bump  translation (0.05, 0) * scale under a wide plateau bump
// `scale` multiplies the documented base amplitude.
VelocityField preset_velocity(const std::string& preset, const CellGrid& grid,
                              double scale = 1.0);

// Warp an image by the preset field through the flow solver (source z = 0).
ScalarField synth_deform(const ScalarField& T, const std::string& preset, double scale = 1.0,
                         const SolverConfig& solver = SolverConfig{});

// Additive Gaussian noise with sigma = level * ||g||_2 / sqrt(M) (relative
// RMS-energy convention). Deterministic for a fixed seed.
Sinogram add_noise(const Sinogram& g, double level, std::uint64_t seed);

// Image metrics of the experiment tables. SSD uses the data-term quadrature
// 1/2 h_X^d ||a - b||^2; SSIM uses an 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1.0, averaged over valid windows.
double metric_ssd(const ScalarField& a, const ScalarField& b);
double metric_ssim(const ScalarField& a, const ScalarField& b);

// L^2-TV comparison model min_R ||K R - g||^2 + lambda TV(R), solved by
// PDHG. Hitting the iteration cap returns the best iterate with a warning
// flag instead of throwing.
struct BaselineResult {
    ScalarField R;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
};
BaselineResult l2tv_baseline(const ForwardOperator& K, const Sinogram& g, const CellGrid& grid,
                             double lambda, double tol = 1e-6, int max_iter = 20000);

// Sinogram CSV: header `angles=<a1,...,ap>;q=<q>;level=<k>` then p rows of q
// values (2-D geometries). Raw import reads row-major angle-major float32
// with a key-value sidecar geometry file (keys: angles, q, level).
void write_sinogram_csv(const std::string& path, const Sinogram& s);
Sinogram read_sinogram_csv(const std::string& path);
Sinogram read_sinogram_raw(const std::string& data_path, const std::string& geom_path);

// Float32 raster with a one-line text header `mrf <d> <m> <lo> <hi>` followed
// by little-endian float32 samples in field order; lo/hi is the range hint.
void write_image(const std::string& path, const ScalarField& f);
ScalarField read_image(const std::string& path);

}  // namespace metarec

#endif
