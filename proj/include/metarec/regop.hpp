#ifndef METAREC_REGOP_HPP
#define METAREC_REGOP_HPP

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "metarec/types.hpp"

namespace metarec {

enum class RegKind { third_order, curvature, diffusion };

// Weights for the three parts of E1: spatial-derivative blocks, temporal
// difference blocks, and the L^2 identity block.
struct Lambda1 {
    double spatial = 0.0;
    double temporal = 0.0;
    double l2 = 0.0;
};

// Finite-difference counterpart of the differential operator B acting on one
// velocity component, assembled on a replicate-padded domain (zero Neumann).
// The temporal part (forward differences over time nodes) and the identity
// block are applied matrix-free.
class RegOperatorB {
public:
    RegOperatorB(RegKind kind, const CellGrid& grid);

    RegKind kind() const { return kind_; }
    const CellGrid& grid() const { return grid_; }

    // Spatial stencil rows applied to one scalar component (m^d values).
    Eigen::VectorXd apply_Bs(const Eigen::VectorXd& comp) const;
    // True for rows whose stencil support lies inside the unpadded domain.
    const std::vector<bool>& interior_rows() const { return interior_row_; }

    // out = (lam.spatial Bs^T Bs + lam.temporal Bt^T Bt + lam.l2 I) v,
    // without the h_t h_X^d quadrature factor.
    void apply_weighted_BtB(const VelocityField& v, const Lambda1& lam, VelocityField& out) const;

    // Diagonal of the weighted B^T B above, velocity-sized.
    std::vector<double> weighted_diagonal(const Lambda1& lam) const;

    // Residual r = v - (I + c W) x of the proximal system, accumulated in
    // extended precision: the third-order stencil weights reach h^-6, so a
    // plain double evaluation saturates near 1e-8 at m >= 64. Returns the
    // relative residual ||r|| / ||v||.
    double prox_residual(const VelocityField& x, const VelocityField& v, double c,
                         const Lambda1& lam, VelocityField& r) const;

    // Solve (a I + b Bs^T Bs) x = r for one scalar component by sparse
    // Cholesky; factorizations are cached per (a, b) since the proximal solver
    // revisits the same shifts across iterations. Thread-safe.
    Eigen::VectorXd solve_spatial(const Eigen::VectorXd& r, double a, double b) const;

private:
    using Factorization = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;
    mutable std::vector<std::pair<std::pair<double, double>, std::shared_ptr<Factorization>>>
        factor_cache_;
    mutable std::mutex cache_mutex_;
    RegKind kind_;
    CellGrid grid_;
    int pad_ = 3;
    Eigen::SparseMatrix<double> B_;    // stencil rows x m^d (includes padding map)
    Eigen::SparseMatrix<double> BtB_;  // m^d x m^d
    std::vector<double> btb_diag_;
    std::vector<bool> interior_row_;
};

// E1(v) = 1/2 h_t h_X^d v^T (weighted B^T B) v and its gradient.
std::pair<double, VelocityField> e1_value_grad(const VelocityField& v, const RegOperatorB& B,
                                               const Lambda1& lam);

}  // namespace metarec

#endif
