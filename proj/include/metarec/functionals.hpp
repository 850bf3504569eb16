#ifndef METAREC_FUNCTIONALS_HPP
#define METAREC_FUNCTIONALS_HPP

#include <memory>

#include "metarec/flow.hpp"
#include "metarec/radon.hpp"
#include "metarec/regop.hpp"
#include "metarec/types.hpp"

namespace metarec {

enum class DataTerm { ssd, ncc };
enum class SourceReg { tv, l2 };

struct ObjectiveConfig {
    DataTerm data = DataTerm::ssd;
    RegKind e1_kind = RegKind::third_order;
    Lambda1 lambda1{0.001, 0.001, 1e-6};
    SourceReg e2 = SourceReg::tv;
    double lambda2 = 0.1;
    double pcg_tol = 1e-8;
    double pdhg_tol = 1e-6;
    int pdhg_max_iter = 500;
    double backtrack_eta = 2.0;
};

// Forward operator abstraction so tests can swap the Radon transform for the
// identity. Adjoint must be the exact transpose of forward.
class ForwardOperator {
public:
    virtual ~ForwardOperator() = default;
    virtual Sinogram forward(const ScalarField& f) const = 0;
    virtual ScalarField adjoint(const Sinogram& s, const CellGrid& grid) const = 0;
    virtual const SinogramGeometry& geometry() const = 0;
    virtual double opnorm_KtK() const = 0;
};

class RadonOperator final : public ForwardOperator {
public:
    RadonOperator(const SinogramGeometry& geom, const CellGrid& grid);
    Sinogram forward(const ScalarField& f) const override;
    ScalarField adjoint(const Sinogram& s, const CellGrid& grid) const override;
    const SinogramGeometry& geometry() const override { return geom_; }
    double opnorm_KtK() const override { return opnorm_; }

private:
    SinogramGeometry geom_;
    double opnorm_;
};

class IdentityOperator final : public ForwardOperator {
public:
    explicit IdentityOperator(const CellGrid& grid);
    Sinogram forward(const ScalarField& f) const override;
    ScalarField adjoint(const Sinogram& s, const CellGrid& grid) const override;
    const SinogramGeometry& geometry() const override { return geom_; }
    double opnorm_KtK() const override { return 1.0; }

private:
    SinogramGeometry geom_;
};

// Data fidelity terms on sinograms; gradients are with respect to the first
// argument.
double ssd(const Sinogram& x, const Sinogram& y);
std::vector<double> ssd_grad(const Sinogram& x, const Sinogram& y);
double ncc(const Sinogram& x, const Sinogram& y);
std::vector<double> ncc_grad(const Sinogram& x, const Sinogram& y);

// Isotropic discrete TV with the forward-looking backward-difference stencil
// and zero extension at the far boundary: h_X^d sum_i ||(grad_h z)_i||.
double tv_value(const ScalarField& z);

struct ObjectiveParts {
    double data = 0.0;
    double e1 = 0.0;
    double e2 = 0.0;
    double total() const { return data + e1 + e2; }
};

// One objective evaluation with everything needed for the block gradients.
struct ObjectiveEval {
    ObjectiveParts parts;
    SolutionMap sm;
    Sinogram Kr;
};

class Objective {
public:
    Objective(std::shared_ptr<const FieldInterpolant> T, Sinogram g,
              std::shared_ptr<const ForwardOperator> K, std::shared_ptr<const RegOperatorB> B,
              ObjectiveConfig cfg, SolverConfig solver);

    ObjectiveEval eval(const VelocityField& v, const ScalarField& z) const;
    // Data-term value only (the smooth H of the splitting), reusing a cached flow.
    double data_value(const SolutionMap& sm, const ScalarField& z, Sinogram* Kr = nullptr) const;
    double data_value(const VelocityField& v, const ScalarField& z) const;

    VelocityField grad_v_H(const ObjectiveEval& ev) const;
    std::vector<double> grad_z_H(const ObjectiveEval& ev) const;

    // Same gradients from a precomputed projection, for mixed-point evaluations
    // inside the optimizer (e.g. grad at (v_{k+1}, z_bar) reusing the flow of
    // v_{k+1}).
    VelocityField grad_v_from(const SolutionMap& sm, const Sinogram& Kr) const;
    std::vector<double> grad_z_from(const Sinogram& Kr, const CellGrid& grid) const;

    double e2_value(const ScalarField& z) const;

    const ObjectiveConfig& config() const { return cfg_; }
    const SolverConfig& solver() const { return solver_; }
    const ForwardOperator& op() const { return *K_; }
    const RegOperatorB& regop() const { return *B_; }
    const FieldInterpolant& template_interp() const { return *T_; }
    const Sinogram& measurements() const { return g_; }

private:
    std::vector<double> data_grad(const Sinogram& Kr) const;
    std::shared_ptr<const FieldInterpolant> T_;
    Sinogram g_;
    std::shared_ptr<const ForwardOperator> K_;
    std::shared_ptr<const RegOperatorB> B_;
    ObjectiveConfig cfg_;
    SolverConfig solver_;
};

}  // namespace metarec

#endif
