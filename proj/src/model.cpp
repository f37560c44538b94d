#include "arh/model.hpp"

#include <cmath>
#include <string>

namespace arh {

namespace {

/// Kernel of the operator with coefficient matrix M over the basis whose
/// values form the columns of Phi: K = Phi M Phi^T.
Eigen::MatrixXd basis_kernel(const Eigen::MatrixXd& phi, const Eigen::MatrixXd& coeff) {
    return phi * coeff * phi.transpose();
}

Eigen::MatrixXd sine_matrix(const GridPtr& grid, std::size_t count) {
    const auto m = static_cast<Eigen::Index>(grid->size());
    Eigen::MatrixXd phi(m, static_cast<Eigen::Index>(count));
    for (std::size_t j = 1; j <= count; ++j) {
        phi.col(static_cast<Eigen::Index>(j - 1)) = sine_basis(grid, j).values();
    }
    return phi;
}

double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

double normal_cdf(double x) {
    return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
}

} // namespace

void Arh1Spec::validate() const {
    require_same_grid(*rho.grid(), *innovation_cov.grid());
    const double norm = operator_norm(rho);
    if (!(norm < 1.0)) {
        throw DivergenceError("ARH(1) spec: operator norm of rho is " +
                              std::to_string(norm) + ", must be < 1");
    }
    const Eigen::MatrixXd& k = innovation_cov.kernel();
    if ((k - k.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw NumericError("ARH(1) spec: innovation covariance must be self-adjoint");
    }
    const EigenSystem es = eigh(innovation_cov);
    const auto mm = es.eigenvalues.size();
    if (mm > 0 && es.eigenvalues[mm - 1] < -1e-10) {
        throw NumericError("ARH(1) spec: innovation covariance has eigenvalue " +
                           std::to_string(es.eigenvalues[mm - 1]) + " below the clip tolerance");
    }
    if (mode == InnovationMode::truncated_gaussian && !(bound > 0.0)) {
        throw NumericError("ARH(1) spec: truncation bound must be positive");
    }
}

Sample::Sample(GridPtr grid, Eigen::MatrixXd observations)
    : grid_(std::move(grid)), observations_(std::move(observations)) {
    if (!grid_) throw DimensionError("sample: null grid");
    if (observations_.rows() < 2) {
        throw DimensionError("sample: n >= 2 required");
    }
    if (static_cast<std::size_t>(observations_.cols()) != grid_->size()) {
        throw DimensionError("sample: observation length must equal grid size");
    }
    if (!observations_.allFinite()) {
        throw NumericError("sample: observations must be finite");
    }
}

GridFunction Sample::observation(std::size_t i) const {
    return GridFunction(grid_, observations_.row(static_cast<Eigen::Index>(i)).transpose());
}

Sample Sample::head(std::size_t n) const {
    return Sample(grid_, observations_.topRows(static_cast<Eigen::Index>(n)));
}

double truncation_variance_factor(double bound) {
    if (!(bound > 0.0)) throw NumericError("truncation bound must be positive");
    const double mass = 2.0 * normal_cdf(bound) - 1.0;
    return 1.0 - 2.0 * bound * normal_pdf(bound) / mass;
}

LinOperator effective_innovation_cov(const Arh1Spec& spec) {
    if (spec.mode == InnovationMode::truncated_gaussian) {
        return scale(spec.innovation_cov, truncation_variance_factor(spec.bound));
    }
    return spec.innovation_cov;
}

LinOperator stationary_covariance(const Arh1Spec& spec, double tol) {
    if (!(tol > 0.0)) throw NumericError("stationary covariance: tol must be positive");
    const double norm = operator_norm(spec.rho);
    if (!(norm < 1.0)) {
        throw DivergenceError("stationary covariance: operator norm of rho is " +
                              std::to_string(norm) + ", series diverges");
    }
    spec.validate();

    const Eigen::VectorXd& w = spec.rho.grid()->weights();
    const Eigen::MatrixXd rho_w = spec.rho.kernel() * w.asDiagonal();
    Eigen::MatrixXd term = effective_innovation_cov(spec).kernel();
    const auto m = term.rows();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);

    auto term_trace = [&](const Eigen::MatrixXd& k) {
        double t = 0.0;
        for (Eigen::Index i = 0; i < k.rows(); ++i) t += w[i] * k(i, i);
        return t;
    };

    while (term_trace(term) > tol) {
        acc += term;
        term = rho_w * term * rho_w.transpose();
    }
    acc = 0.5 * (acc + acc.transpose().eval());
    return LinOperator(spec.rho.grid(), std::move(acc));
}

LinOperator cross_covariance(const Arh1Spec& spec, const LinOperator& c_x) {
    return compose(spec.rho, c_x);
}

std::size_t default_burn_in(const Arh1Spec& spec, double tol) {
    const double norm = operator_norm(spec.rho);
    if (norm <= 0.0) return 0;
    if (!(norm < 1.0)) {
        throw DivergenceError("burn-in: operator norm of rho must be < 1");
    }
    return static_cast<std::size_t>(std::ceil(std::log(tol) / std::log(norm)));
}

GaussianSampler::GaussianSampler(const LinOperator& cov, InnovationMode mode, double bound)
    : grid_(cov.grid()), mode_(mode), bound_(bound) {
    const EigenSystem es = eigh(cov);
    const auto m = es.eigenvalues.size();
    if (m > 0 && es.eigenvalues[m - 1] < -1e-10) {
        throw NumericError("gaussian draw: covariance eigenvalue " +
                           std::to_string(es.eigenvalues[m - 1]) +
                           " below the clip tolerance -1e-10");
    }
    std::size_t r = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (es.eigenvalues[j] > 0.0) ++r;
    }
    factor_.resize(m, static_cast<Eigen::Index>(r));
    Eigen::Index col = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (es.eigenvalues[j] > 0.0) {
            factor_.col(col++) =
                std::sqrt(es.eigenvalues[j]) * es.eigenfunctions[static_cast<std::size_t>(j)].values();
        }
    }
    if (mode_ == InnovationMode::truncated_gaussian && !(bound_ > 0.0)) {
        throw NumericError("gaussian draw: truncation bound must be positive");
    }
}

GridFunction GaussianSampler::draw(Rng& rng) const {
    Eigen::VectorXd z(factor_.cols());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        z[j] = mode_ == InnovationMode::truncated_gaussian ? rng.truncated_normal(bound_)
                                                           : rng.normal();
    }
    return GridFunction(grid_, factor_ * z);
}

GridFunction gaussian_draw(const LinOperator& cov, Rng& rng, InnovationMode mode, double bound) {
    return GaussianSampler(cov, mode, bound).draw(rng);
}

Sample simulate(const Arh1Spec& spec, std::size_t n, std::size_t burn_in) {
    if (n < 2) throw DimensionError("simulate: n >= 2 required");
    spec.validate();

    const GaussianSampler sampler(spec.innovation_cov, spec.mode, spec.bound);
    Rng rng(spec.seed);

    const Eigen::VectorXd& w = spec.rho.grid()->weights();
    const Eigen::MatrixXd rho_w = spec.rho.kernel() * w.asDiagonal();
    const auto m = static_cast<Eigen::Index>(spec.rho.grid()->size());

    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(n), m);
    for (std::size_t step = 0; step < burn_in + n; ++step) {
        x = rho_w * x + sampler.draw(rng).values();
        if (step >= burn_in) {
            obs.row(static_cast<Eigen::Index>(step - burn_in)) = x.transpose();
        }
    }
    return Sample(spec.rho.grid(), std::move(obs));
}

GridFunction sine_basis(const GridPtr& grid, std::size_t j) {
    if (j == 0) throw DimensionError("sine basis: index starts at 1");
    const auto m = static_cast<Eigen::Index>(grid->size());
    Eigen::VectorXd v(m);
    const double sqrt2 = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < m; ++i) {
        v[i] = sqrt2 * std::sin(static_cast<double>(j) * M_PI * grid->points()[i]);
    }
    return GridFunction(grid, std::move(v));
}

Arh1Spec diagonal_preset(std::size_t m, std::uint64_t seed, InnovationMode mode,
                         double bound, double c_rho, double c_sigma) {
    const GridPtr grid = Grid::uniform(m);
    const std::size_t count = m - 1;
    const Eigen::MatrixXd phi = sine_matrix(grid, count);
    Eigen::VectorXd rho_coeff(count), sigma_coeff(count);
    for (std::size_t j = 1; j <= count; ++j) {
        const double jj = static_cast<double>(j);
        rho_coeff[static_cast<Eigen::Index>(j - 1)] = c_rho / (jj * jj);
        sigma_coeff[static_cast<Eigen::Index>(j - 1)] = c_sigma / (jj * jj);
    }
    Arh1Spec spec{
        LinOperator(grid, basis_kernel(phi, rho_coeff.asDiagonal())),
        LinOperator(grid, basis_kernel(phi, sigma_coeff.asDiagonal())),
        mode, bound, seed};
    return spec;
}

Arh1Spec nondiagonal_preset(std::size_t m, std::uint64_t seed, InnovationMode mode,
                            double bound, double angle, double target_norm,
                            double c_sigma) {
    const GridPtr grid = Grid::uniform(m);
    const std::size_t count = m - 1;
    const Eigen::MatrixXd phi = sine_matrix(grid, count);

    // Geometric innovation spectrum: relative spectral gaps are constant, so
    // eigenvector estimation error does not blow up as deeper components
    // enter the truncation.
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count),
                                              static_cast<Eigen::Index>(count));
    Eigen::VectorXd sigma_coeff(static_cast<Eigen::Index>(count));
    for (std::size_t j = 1; j <= count; ++j) {
        const double jj = static_cast<double>(j);
        p(static_cast<Eigen::Index>(j - 1), static_cast<Eigen::Index>(j - 1)) = 1.0 / (jj * jj);
        sigma_coeff[static_cast<Eigen::Index>(j - 1)] =
            c_sigma * std::pow(2.0, -(jj - 1.0));
    }
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(count),
                                                  static_cast<Eigen::Index>(count));
    const double c = std::cos(angle), s = std::sin(angle);
    for (std::size_t j = 0; j + 1 < count; j += 2) {
        const auto a = static_cast<Eigen::Index>(j);
        r(a, a) = c;
        r(a, a + 1) = -s;
        r(a + 1, a) = s;
        r(a + 1, a + 1) = c;
    }

    LinOperator rho(grid, basis_kernel(phi, r * p));
    const double norm = operator_norm(rho);
    rho = scale(rho, target_norm / norm);

    Arh1Spec spec{std::move(rho),
                  LinOperator(grid, basis_kernel(phi, sigma_coeff.asDiagonal())),
                  mode, bound, seed};
    return spec;
}

Arh1Spec preset_by_name(const std::string& name, std::size_t m, std::uint64_t seed,
                        InnovationMode mode, double bound) {
    if (name == "diagonal") return diagonal_preset(m, seed, mode, bound);
    if (name == "nondiagonal") return nondiagonal_preset(m, seed, mode, bound);
    throw ConfigError("unknown preset '" + name + "' (expected diagonal or nondiagonal)");
}

} // namespace arh
