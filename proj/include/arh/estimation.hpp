#pragma once

#include <optional>

#include "arh/model.hpp"

namespace arh {

/// Knobs for the truncation rule and the componentwise estimator.
struct EstimatorConfig {
    /// Rate exponent, strictly above 1/2.
    double beta = 0.55;
    /// Multiplier in the truncation rule k = ceil(c * n^{1/4} / (ln n)^beta).
    double c_trunc = 1.0;
    /// Eigenvalue floor relative to the top empirical eigenvalue; empirical
    /// eigenvalues at or below floor * C_{n,1} are never used as divisors.
    double eigen_floor = 1e-8;
    /// Forces the truncation level (still subject to the floor and n-1 caps).
    std::optional<std::size_t> k_override;
    /// When set, replaces the n^{1/4} factor by n^gamma (faster-growing
    /// truncation for norm-bounded regimes); gamma in (1/4, 1/2).
    std::optional<double> gamma;

    void validate() const;
};

/// C_n = (1/n) sum_i X_i (x) X_i.
LinOperator empirical_covariance(const Sample& sample);

/// D_n = (1/(n-1)) sum_{i<=n-2} X_i (x) X_{i+1}; generally not self-adjoint.
LinOperator empirical_cross_covariance(const Sample& sample);

/// Projection scores table[i][j] = <X_i, phi_j> for the leading j_count
/// eigenfunctions.
Eigen::MatrixXd project(const Sample& sample, const EigenSystem& eigen,
                        std::size_t j_count);

/// Componentwise cross-covariance scores. `full` holds
/// D*[j][l] = (1/(n-1)) sum_i <X_i, phi_j><X_{i+1}, phi_l>; `diagonal` is its
/// diagonal. Both the projection route and the operator route
/// <D_n phi_j, phi_j> are evaluated and must agree within 1e-9.
struct DiagonalCross {
    Eigen::MatrixXd full;
    Eigen::VectorXd diagonal;
};
DiagonalCross diagonal_cross(const Sample& sample, const EigenSystem& eigen,
                             std::size_t j_count);

/// Truncation level: the rate value capped by the largest index whose
/// empirical eigenvalue clears the floor and by n-1; at least 1. Throws
/// EstimationError when no eigenvalue clears the floor.
std::size_t select_truncation(const EigenSystem& eigen, std::size_t n,
                              const EstimatorConfig& cfg);

/// The assembled diagonal componentwise estimator.
struct RhoEstimate {
    std::size_t k_n;
    Eigen::VectorXd coefficients;           ///< rho_{n,1..k_n}
    std::vector<GridFunction> eigenvectors; ///< phi_{n,1..k_n}; empty when reloaded
    LinOperator op;                         ///< sum_j rho_{n,j} phi_j (x) phi_j
    double eigen_floor_abs;                 ///< floor actually applied
};

/// Estimates rho from a sample: empirical eigenstructure, truncation
/// selection, then coefficients by the ratio-of-sums form
/// rho_{n,j} = (n/(n-1)) sum_i X_{i,j} X_{i+1,j} / sum_i X_{i,j}^2.
/// The D_{n,j}/C_{n,j} route is evaluated as a cross-check and must agree
/// within 1e-9.
RhoEstimate estimate_rho(const Sample& sample, const EstimatorConfig& cfg);

/// Same, with a caller-supplied eigendecomposition of C_n.
RhoEstimate estimate_rho_with_eigen(const Sample& sample, const EigenSystem& eigen,
                                    const EstimatorConfig& cfg);

/// Assembles sum_j coeff_j phi_j (x) phi_j.
LinOperator assemble_diagonal_operator(const Eigen::VectorXd& coefficients,
                                       const std::vector<GridFunction>& eigenvectors);

/// Empirical moments bundle: C_n, D_n, the eigendecomposition of C_n, and
/// the projection scores over its numerical rank.
struct EmpiricalMoments {
    LinOperator c_n;
    LinOperator d_n;
    EigenSystem eigen;
    Eigen::MatrixXd projections;
};
EmpiricalMoments empirical_moments(const Sample& sample);

/// Maximal inverse spectral gap Lambda_k = max_{1<=j<=k} 1/(C_j - C_{j+1}).
/// Requires eigenvalues through index k+1, strictly decreasing; tied or
/// increasing neighbors raise InfiniteGapError.
double lambda_gap(const Eigen::VectorXd& eigenvalues, std::size_t k);

} // namespace arh
