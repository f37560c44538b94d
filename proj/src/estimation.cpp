#include "arh/estimation.hpp"

#include <cmath>
#include <string>

namespace arh {

void EstimatorConfig::validate() const {
    if (!(beta > 0.5)) {
        throw ConfigError("estimator: beta must be strictly greater than 1/2");
    }
    if (!(c_trunc > 0.0)) {
        throw ConfigError("estimator: c_trunc must be positive");
    }
    if (!(eigen_floor > 0.0)) {
        throw ConfigError("estimator: eigen_floor must be positive");
    }
    if (gamma && !(*gamma > 0.25 && *gamma < 0.5)) {
        throw ConfigError("estimator: gamma must lie in (1/4, 1/2)");
    }
    if (k_override && *k_override == 0) {
        throw ConfigError("estimator: k_override must be at least 1");
    }
}

LinOperator empirical_covariance(const Sample& sample) {
    const auto n = static_cast<double>(sample.size());
    const Eigen::MatrixXd& obs = sample.observations();
    Eigen::MatrixXd k = (obs.transpose() * obs) / n;
    k = 0.5 * (k + k.transpose().eval());
    return LinOperator(sample.grid(), std::move(k));
}

LinOperator empirical_cross_covariance(const Sample& sample) {
    const auto n = static_cast<Eigen::Index>(sample.size());
    const Eigen::MatrixXd& obs = sample.observations();
    // Kernel of x (x) y is y_i x_j, so rows lead and columns lag.
    Eigen::MatrixXd k = (obs.bottomRows(n - 1).transpose() * obs.topRows(n - 1)) /
                        static_cast<double>(n - 1);
    return LinOperator(sample.grid(), std::move(k));
}

Eigen::MatrixXd project(const Sample& sample, const EigenSystem& eigen,
                        std::size_t j_count) {
    if (j_count > eigen.eigenfunctions.size()) {
        throw DimensionError("project: not enough eigenfunctions");
    }
    const auto n = static_cast<Eigen::Index>(sample.size());
    Eigen::MatrixXd table(n, static_cast<Eigen::Index>(j_count));
    for (std::size_t j = 0; j < j_count; ++j) {
        const GridFunction& phi = eigen.eigenfunctions[j];
        require_same_grid(*sample.grid(), *phi.grid());
        for (Eigen::Index i = 0; i < n; ++i) {
            table(i, static_cast<Eigen::Index>(j)) =
                inner_product(sample.observation(static_cast<std::size_t>(i)), phi);
        }
    }
    return table;
}

DiagonalCross diagonal_cross(const Sample& sample, const EigenSystem& eigen,
                             std::size_t j_count) {
    const auto n = static_cast<Eigen::Index>(sample.size());
    const Eigen::MatrixXd scores = project(sample, eigen, j_count);
    DiagonalCross out;
    out.full = (scores.topRows(n - 1).transpose() * scores.bottomRows(n - 1)) /
               static_cast<double>(n - 1);
    out.diagonal = out.full.diagonal();

    // Dual route through the assembled operator, per the defining identity
    // D_{n,j} = <D_n(phi_j), phi_j>.
    const LinOperator d_n = empirical_cross_covariance(sample);
    for (std::size_t j = 0; j < j_count; ++j) {
        const GridFunction& phi = eigen.eigenfunctions[j];
        const double via_op = inner_product(apply(d_n, phi), phi);
        if (std::abs(via_op - out.diagonal[static_cast<Eigen::Index>(j)]) > 1e-9) {
            throw NumericError("diagonal cross-covariance: projection and operator "
                               "routes disagree at j=" + std::to_string(j + 1));
        }
    }
    return out;
}

std::size_t select_truncation(const EigenSystem& eigen, std::size_t n,
                              const EstimatorConfig& cfg) {
    cfg.validate();
    if (n < 2) throw DimensionError("select_truncation: n >= 2 required");
    if (eigen.eigenvalues.size() == 0 || !(eigen.eigenvalues[0] > 0.0)) {
        throw EstimationError("no positive empirical eigenvalue; estimation impossible", 1);
    }
    const double floor_abs = cfg.eigen_floor * eigen.eigenvalues[0];
    std::size_t above = 0;
    for (Eigen::Index j = 0; j < eigen.eigenvalues.size(); ++j) {
        if (eigen.eigenvalues[j] > floor_abs) {
            ++above;
        } else {
            break;
        }
    }
    if (above == 0) {
        throw EstimationError("no empirical eigenvalue clears the floor", 1);
    }

    const double nn = static_cast<double>(n);
    const double exponent = cfg.gamma ? *cfg.gamma : 0.25;
    const double rate =
        cfg.c_trunc * std::pow(nn, exponent) / std::pow(std::log(nn), cfg.beta);
    std::size_t k = cfg.k_override
                        ? *cfg.k_override
                        : static_cast<std::size_t>(std::ceil(rate));
    k = std::max<std::size_t>(k, 1);
    k = std::min(k, above);
    k = std::min(k, n - 1);
    return k;
}

LinOperator assemble_diagonal_operator(const Eigen::VectorXd& coefficients,
                                       const std::vector<GridFunction>& eigenvectors) {
    if (static_cast<std::size_t>(coefficients.size()) != eigenvectors.size() ||
        eigenvectors.empty()) {
        throw DimensionError("assemble: coefficient/eigenvector count mismatch");
    }
    const GridPtr& grid = eigenvectors.front().grid();
    const auto m = static_cast<Eigen::Index>(grid->size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < eigenvectors.size(); ++j) {
        const Eigen::VectorXd& v = eigenvectors[j].values();
        k += coefficients[static_cast<Eigen::Index>(j)] * (v * v.transpose());
    }
    return LinOperator(grid, std::move(k));
}

RhoEstimate estimate_rho_with_eigen(const Sample& sample, const EigenSystem& eigen,
                                    const EstimatorConfig& cfg) {
    const std::size_t n = sample.size();
    const std::size_t k_n = select_truncation(eigen, n, cfg);
    const Eigen::MatrixXd scores = project(sample, eigen, k_n);
    const DiagonalCross cross = diagonal_cross(sample, eigen, k_n);

    Eigen::VectorXd coefficients(static_cast<Eigen::Index>(k_n));
    std::vector<GridFunction> eigenvectors(
        eigen.eigenfunctions.begin(),
        eigen.eigenfunctions.begin() + static_cast<std::ptrdiff_t>(k_n));

    const auto nn = static_cast<Eigen::Index>(n);
    for (std::size_t j = 0; j < k_n; ++j) {
        const auto jc = static_cast<Eigen::Index>(j);
        double num = 0.0, den = 0.0;
        for (Eigen::Index i = 0; i + 1 < nn; ++i) num += scores(i, jc) * scores(i + 1, jc);
        for (Eigen::Index i = 0; i < nn; ++i) den += scores(i, jc) * scores(i, jc);
        if (!(den > 0.0)) {
            throw EstimationError("zero projected variance at component " +
                                  std::to_string(j + 1), j + 1);
        }
        const double ratio_form = (static_cast<double>(n) / static_cast<double>(n - 1)) *
                                  (num / den);
        const double moment_form = cross.diagonal[jc] / eigen.eigenvalues[jc];
        if (std::abs(ratio_form - moment_form) > 1e-9) {
            throw NumericError("estimator: ratio-of-sums and moment-ratio routes "
                               "disagree at component " + std::to_string(j + 1));
        }
        coefficients[jc] = ratio_form;
    }
    LinOperator op = assemble_diagonal_operator(coefficients, eigenvectors);
    return RhoEstimate{k_n, std::move(coefficients), std::move(eigenvectors),
                       std::move(op), cfg.eigen_floor * eigen.eigenvalues[0]};
}

RhoEstimate estimate_rho(const Sample& sample, const EstimatorConfig& cfg) {
    const LinOperator c_n = empirical_covariance(sample);
    return estimate_rho_with_eigen(sample, eigh(c_n), cfg);
}

EmpiricalMoments empirical_moments(const Sample& sample) {
    LinOperator c_n = empirical_covariance(sample);
    LinOperator d_n = empirical_cross_covariance(sample);
    EigenSystem eigen = eigh(c_n);
    Eigen::MatrixXd proj = project(sample, eigen, eigen.rank);
    return EmpiricalMoments{std::move(c_n), std::move(d_n), std::move(eigen),
                            std::move(proj)};
}

double lambda_gap(const Eigen::VectorXd& eigenvalues, std::size_t k) {
    if (k == 0) throw DimensionError("lambda_gap: k >= 1 required");
    if (static_cast<std::size_t>(eigenvalues.size()) < k + 1) {
        throw DimensionError("lambda_gap: need eigenvalues through index k+1");
    }
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        const double gap = eigenvalues[static_cast<Eigen::Index>(j)] -
                           eigenvalues[static_cast<Eigen::Index>(j + 1)];
        if (!(gap > 0.0)) {
            throw InfiniteGapError("lambda_gap: eigenvalues tied or increasing at index " +
                                   std::to_string(j + 1));
        }
        worst = std::max(worst, 1.0 / gap);
    }
    return worst;
}

} // namespace arh
