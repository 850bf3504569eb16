#ifndef METAREC_FLOW_HPP
#define METAREC_FLOW_HPP

#include <vector>

#include "metarec/interp.hpp"
#include "metarec/types.hpp"

namespace metarec {

enum class OdeScheme { euler, rk4 };

struct SolverConfig {
    int n_steps = 5;
    OdeScheme scheme = OdeScheme::rk4;
    InterpOrder template_order = InterpOrder::cubic;
};

// Backward characteristics phi_{1,v}(0, x_c) together with matrix-free
// apply / apply-transpose of d phi / d v, accumulated as one sparse factor
// pair (A_k, C_k) per time step:
//   u_{k+1} = A_k u_k + C_k dv.
class FlowResult {
public:
    PointSet phi0;

    struct Entry {
        int tnode;
        int cell;
        double mat[9];  // d x d, mat[c*d + c'] = d phi_c / d coeff(tnode, c', cell)
    };
    struct StepFactors {
        std::vector<double> A;  // n*d*d
        std::vector<int> offsets;
        std::vector<Entry> entries;
    };

    CellGrid grid;
    std::vector<StepFactors> steps;

    // Jacobian-vector product: dv on the velocity grid -> n*d trajectory shifts.
    std::vector<double> apply_dphi_dv(const VelocityField& dv) const;
    // Transpose: n*d weights -> velocity-sized gradient.
    VelocityField apply_dphi_dv_T(const std::vector<double>& w) const;
};

FlowResult solve_backward_flow(const VelocityField& v, const SolverConfig& cfg);

// Everything iPALM needs per objective evaluation: the deformed template,
// its gradient at the foot points, and the assembled reconstruction.
struct SolutionMap {
    FlowResult flow;
    std::vector<double> template_vals;   // T(phi0)
    std::vector<double> template_grads;  // grad T(phi0), n*d
    ScalarField R;
};

SolutionMap solution_map(const FieldInterpolant& T, const VelocityField& v,
                         const ScalarField& z, const SolverConfig& cfg);
SolutionMap solution_map(const ScalarField& T, const VelocityField& v, const ScalarField& z,
                         const SolverConfig& cfg);

// dR/dv products through the chain grad T(phi0) * dphi/dv.
std::vector<double> apply_dR_dv(const SolutionMap& sm, const VelocityField& dv);
VelocityField apply_dR_dv_T(const SolutionMap& sm, const std::vector<double>& w);

}  // namespace metarec

#endif
