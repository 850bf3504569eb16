#ifndef METAREC_PROX_HPP
#define METAREC_PROX_HPP

#include <vector>

#include "metarec/regop.hpp"
#include "metarec/types.hpp"

namespace metarec {

// argmin_x 1/(2 sigma) ||x - v||^2 + 1/2 h_t h_X^d x^T (weighted B^T B) x,
// i.e. the linear system (Id + sigma h_t h_X^d W) x = v, solved by Jacobi-PCG.
VelocityField prox_quadratic(const VelocityField& v, double sigma, const RegOperatorB& B,
                             const Lambda1& lam, double tol = 1e-8, int max_iter = 2000,
                             double* residual_out = nullptr);

struct TvProxResult {
    std::vector<double> x;
    bool converged = true;
    int iterations = 0;
    double gap = 0.0;
};

// argmin_x 1/2 ||x - z||^2 + weight * sum_i ||(grad_h x)_i|| via PDHG on the
// dual; dims gives the tensor shape (axis 0 fastest), hx the cell spacing of
// the difference stencil. Hitting max_iter returns the best iterate with
// converged = false.
// dual_warm, if given, seeds the dual variable and receives its final value
// (warm-starting across outer iterations).
TvProxResult prox_tv(const std::vector<double>& z, const std::vector<int>& dims, double hx,
                     double weight, double tol = 1e-6, int max_iter = 500,
                     std::vector<double>* dual_warm = nullptr);

TvProxResult prox_tv(const ScalarField& z, double weight, double tol = 1e-6, int max_iter = 500,
                     std::vector<double>* dual_warm = nullptr);

// Exact 1-D solution of argmin_x 1/2 sum (x-z)^2 + weight * sum |x_{i+1}-x_i|
// (plain differences), O(n).
std::vector<double> prox_tv_1d_exact(const std::vector<double>& z, double weight);

// Closed-form prox of s * 1/2 * cell_volume * ||x||^2: z / (1 + s*cell_volume).
std::vector<double> prox_l2_source(const std::vector<double>& z, double s, double cell_volume);

}  // namespace metarec

#endif
