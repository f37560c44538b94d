#pragma once

#include <cstdint>
#include <string>

#include "arh/linop.hpp"
#include "arh/rng.hpp"

namespace arh {

enum class InnovationMode { gaussian, truncated_gaussian };

/// ARH(1) model: X_n = rho(X_{n-1}) + eps_n with strong-white-noise
/// innovations of covariance innovation_cov. In truncated_gaussian mode the
/// standard-normal component scores are resampled until |z| <= bound, which
/// keeps every realization norm-bounded; plain gaussian innovations satisfy
/// the fourth-moment condition only.
struct Arh1Spec {
    LinOperator rho;
    LinOperator innovation_cov;
    InnovationMode mode = InnovationMode::gaussian;
    double bound = 4.0;
    std::uint64_t seed = 0;

    /// Throws unless operator_norm(rho) < 1, the innovation covariance is
    /// self-adjoint with spectrum >= -1e-10, and bound > 0 in truncated mode.
    void validate() const;
};

/// An ordered functional trajectory X_0, ..., X_{n-1} on a common grid,
/// stored row-wise.
class Sample {
public:
    Sample(GridPtr grid, Eigen::MatrixXd observations);

    const GridPtr& grid() const { return grid_; }
    const Eigen::MatrixXd& observations() const { return observations_; }
    std::size_t size() const { return static_cast<std::size_t>(observations_.rows()); }
    GridFunction observation(std::size_t i) const;

    /// The trajectory restricted to its first n observations.
    Sample head(std::size_t n) const;

private:
    GridPtr grid_;
    Eigen::MatrixXd observations_;
};

/// Variance retention factor E[z^2 | |z| <= bound] of a truncated standard
/// normal. The effective innovation covariance in truncated mode is this
/// factor times the nominal one.
double truncation_variance_factor(double bound);

/// The covariance actually realized by draws under the spec's innovation
/// mode: innovation_cov itself for gaussian, scaled by the truncation factor
/// otherwise.
LinOperator effective_innovation_cov(const Arh1Spec& spec);

/// Stationary covariance C_X = sum_k rho^k C_eps (rho*)^k, truncated when a
/// term's trace falls to tol. The result satisfies the fixed-point identity
/// C_X = rho C_X rho* + C_eps up to trace norm tol.
LinOperator stationary_covariance(const Arh1Spec& spec, double tol);

/// D_X = rho o C_X under the tensor convention.
LinOperator cross_covariance(const Arh1Spec& spec, const LinOperator& c_x);

/// Burn-in length making the initial transient's covariance contribution
/// fall below tol in trace norm, from ||rho^B||^2 <= ||rho||^{2B}.
std::size_t default_burn_in(const Arh1Spec& spec, double tol = 1e-10);

/// Zero-mean Gaussian sampler for a positive self-adjoint covariance;
/// factorizes once, draws many.
class GaussianSampler {
public:
    GaussianSampler(const LinOperator& cov, InnovationMode mode, double bound);

    GridFunction draw(Rng& rng) const;
    std::size_t rank() const { return static_cast<std::size_t>(factor_.cols()); }

private:
    GridPtr grid_;
    Eigen::MatrixXd factor_; // columns sqrt(lambda_j) phi_j
    InnovationMode mode_;
    double bound_;
};

/// One-off draw from N(0, cov).
GridFunction gaussian_draw(const LinOperator& cov, Rng& rng,
                           InnovationMode mode = InnovationMode::gaussian,
                           double bound = 4.0);

/// Iterates the ARH(1) recursion from X = 0, discards burn_in steps, and
/// returns X_0, ..., X_{n-1}. Deterministic given spec.seed.
Sample simulate(const Arh1Spec& spec, std::size_t n, std::size_t burn_in);

/// j-th element of the sine system sqrt(2) sin(j pi t); on the uniform
/// midpoint grid the elements with j < m are exactly orthonormal.
GridFunction sine_basis(const GridPtr& grid, std::size_t j);

/// Shared-eigenbasis model: rho and C_eps diagonal over the sine system with
/// coefficients rho_j = c_rho j^{-2} and sigma_j^2 = c_sigma j^{-2}.
Arh1Spec diagonal_preset(std::size_t m, std::uint64_t seed,
                         InnovationMode mode = InnovationMode::gaussian,
                         double bound = 4.0, double c_rho = 0.8,
                         double c_sigma = 1.0);

/// rho = R o P with P diagonal as above and R a rotation by `angle` in each
/// plane of neighboring sine functions, then rescaled to operator norm
/// `target_norm`; rho is not diagonal in the eigenbasis of the stationary
/// covariance. Innovations carry a geometric spectrum
/// sigma_j^2 = c_sigma 2^{-(j-1)}, whose uniform relative gaps keep every
/// retained eigenvector equally estimable.
Arh1Spec nondiagonal_preset(std::size_t m, std::uint64_t seed,
                            InnovationMode mode = InnovationMode::gaussian,
                            double bound = 4.0, double angle = 0.05,
                            double target_norm = 0.8, double c_sigma = 1.0);

/// Preset lookup by name ("diagonal" | "nondiagonal").
Arh1Spec preset_by_name(const std::string& name, std::size_t m,
                        std::uint64_t seed, InnovationMode mode,
                        double bound);

} // namespace arh
