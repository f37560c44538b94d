#pragma once

#include <Eigen/Core>
#include <vector>

#include "arh/grid.hpp"

namespace arh {

/// Kernel-valued linear operator on the discretized H. The action is
/// (A f)(t_i) = sum_j w_j K[i,j] f_j, so the kernel matrix is metric-free
/// and the quadrature weights enter only through the action.
class LinOperator {
public:
    LinOperator(GridPtr grid, Eigen::MatrixXd kernel);

    static LinOperator zero(const GridPtr& grid);
    /// Kernel delta_ij / w_j, the identity of the discretized metric.
    static LinOperator identity(const GridPtr& grid);

    const GridPtr& grid() const { return grid_; }
    const Eigen::MatrixXd& kernel() const { return kernel_; }
    std::size_t size() const { return grid_->size(); }

private:
    GridPtr grid_;
    Eigen::MatrixXd kernel_;
};

GridFunction apply(const LinOperator& a, const GridFunction& f);

/// Bosq's convention: (x (x) y)(h) = <x, h> y, kernel K[i,j] = y_i x_j.
/// With it the cross-covariance of an ARH(1) process factors as rho o C_X.
LinOperator tensor_product(const GridFunction& x, const GridFunction& y);

LinOperator compose(const LinOperator& a, const LinOperator& b);
LinOperator add(const LinOperator& a, const LinOperator& b);
LinOperator scale(const LinOperator& a, double c);
/// Exact adjoint in the discretized metric (kernel transpose).
LinOperator adjoint(const LinOperator& a);

inline LinOperator operator+(const LinOperator& a, const LinOperator& b) { return add(a, b); }
LinOperator operator-(const LinOperator& a, const LinOperator& b);
inline LinOperator operator*(double c, const LinOperator& a) { return scale(a, c); }

/// Singular values of the operator in the weighted metric, descending.
/// Computed from the symmetrized matrix W^{1/2} K W^{1/2}.
Eigen::VectorXd singular_values(const LinOperator& a);

double operator_norm(const LinOperator& a); ///< largest singular value
double hs_norm(const LinOperator& a);       ///< sqrt of sum of squared singular values
double trace_norm(const LinOperator& a);    ///< sum of singular values

/// All three norms from one singular value decomposition; the ordering
/// op <= hs <= tr then holds by construction.
struct OperatorNorms {
    double op;
    double hs;
    double tr;
};
OperatorNorms all_norms(const LinOperator& a);

/// sum_i w_i K[i,i]; equals sum_j <A e_j, e_j> over any weighted-orthonormal
/// basis.
double trace(const LinOperator& a);

/// Sorted eigendecomposition of a self-adjoint operator. Eigenfunctions are
/// orthonormal in the weighted inner product; rank counts eigenvalues whose
/// magnitude clears the floor.
struct EigenSystem {
    Eigen::VectorXd eigenvalues;             ///< descending
    std::vector<GridFunction> eigenfunctions;
    std::size_t rank = 0;

    const GridFunction& eigenfunction(std::size_t j) const { return eigenfunctions.at(j); }
};

/// Eigendecomposition via the similarity S = W^{1/2} K W^{1/2}: a plain
/// symmetric solve, eigenvectors mapped back by W^{-1/2}. The kernel must be
/// self-adjoint within 1e-10 (max elementwise asymmetry); worse than that is
/// rejected rather than silently symmetrized.
EigenSystem eigh(const LinOperator& a, double rank_floor_rel = 1e-12);

/// Largest residual ||A phi_j - lambda_j phi_j||_H over the decomposition.
double eigh_max_residual(const LinOperator& a, const EigenSystem& es);

/// sgn(<empirical, reference>) * reference, with sgn(t) = +1 for t >= 0.
GridFunction align_sign(const GridFunction& empirical, const GridFunction& reference);

} // namespace arh
