#ifndef METAREC_IPALM_HPP
#define METAREC_IPALM_HPP

#include <string>
#include <vector>

#include "metarec/functionals.hpp"
#include "metarec/prox.hpp"

namespace metarec {

enum class IpalmMode { guaranteed, heuristic };

struct IpalmConfig {
    IpalmMode mode = IpalmMode::heuristic;
    int max_iter = 200;
    double tol = 1e-6;   // relative objective decrease
    int tol_streak = 5;  // consecutive small decreases before stopping
    double eta = 2.0;    // backtracking factor
    double L1_init = 1.0;
    double L2_init = 1.0;          // NCC only; SSD uses h_Y * ||K^T K||
    double alpha_guaranteed = 0.4;  // constant inertia in guaranteed mode
    double alpha_override = -1.0;   // >= 0 forces a constant inertia (testing)
    bool freeze_v = false;          // skip the v block (degenerate convex runs)
    std::string log_path;           // per-iteration diagnostics, appended
    std::string dump_path = "ipalm_blowup.bin";
};

struct IpalmIterRecord {
    int iter = 0;
    double J = 0.0, data = 0.0, e1 = 0.0, e2 = 0.0;
    double L1 = 0.0, L2 = 0.0, alpha = 0.0;
    double sigma1 = 0.0, sigma2 = 0.0;  // step constants actually used
    int bt_count = 0;
    double pcg_residual = 0.0;       // prox_quadratic relative residual
    double prox_grad_residual = 0.0;  // stationarity proxy sigma*||x+ - xbar||
    bool tv_warn = false;             // TV prox hit its iteration cap
};

struct IpalmResult {
    VelocityField v;
    ScalarField z;
    ScalarField R;
    std::vector<IpalmIterRecord> history;
    double final_J = 0.0;
    int iterations = 0;
    bool converged = false;  // stopped on tolerance rather than iteration cap
    double L1 = 0.0;         // final Lipschitz estimates, reusable across levels
    double L2 = 0.0;
};

// Inertial PALM on the blocks (v, z): extrapolate, gradient step on the data
// term at the extrapolated point, prox of the respective regularizer.
// The v-block Lipschitz estimate is backtracked via the descent lemma.
IpalmResult ipalm_solve(const Objective& obj, const VelocityField& v0, const ScalarField& z0,
                        const IpalmConfig& cfg);

struct GaussNewtonConfig {
    int max_outer = 5;
    double cg_tol = 1e-2;
    int cg_max_iter = 20;
    double armijo_slope = 1e-4;
    int max_halvings = 10;
};

// Inexact Gauss-Newton refinement of v with z frozen (SSD data term):
// normal operator J^T J + weighted B^T B applied matrix-free, inner CG,
// Armijo line search. Never increases the objective; on line-search failure
// the incoming v is returned and *improved stays false.
VelocityField gauss_newton_refine_v(const Objective& obj, const VelocityField& v0,
                                    const ScalarField& z, const GaussNewtonConfig& cfg = {},
                                    bool* improved = nullptr);

}  // namespace metarec

#endif
