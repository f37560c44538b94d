#include "arh/linop.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace arh {

namespace {

/// W^{1/2} K W^{1/2}: the matrix whose ordinary spectral data coincide with
/// the operator's spectral data in the weighted metric.
Eigen::MatrixXd weighted_similarity(const LinOperator& a) {
    const Eigen::VectorXd sqrt_w = a.grid()->weights().cwiseSqrt();
    return sqrt_w.asDiagonal() * a.kernel() * sqrt_w.asDiagonal();
}

} // namespace

LinOperator::LinOperator(GridPtr grid, Eigen::MatrixXd kernel)
    : grid_(std::move(grid)), kernel_(std::move(kernel)) {
    if (!grid_) throw DimensionError("operator: null grid");
    const auto m = static_cast<Eigen::Index>(grid_->size());
    if (kernel_.rows() != m || kernel_.cols() != m) {
        throw DimensionError("operator: kernel must be m x m for the grid size m");
    }
    if (!kernel_.allFinite()) {
        throw NumericError("operator: kernel entries must be finite");
    }
}

LinOperator LinOperator::zero(const GridPtr& grid) {
    const auto m = static_cast<Eigen::Index>(grid->size());
    return LinOperator(grid, Eigen::MatrixXd::Zero(m, m));
}

LinOperator LinOperator::identity(const GridPtr& grid) {
    const auto m = static_cast<Eigen::Index>(grid->size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) k(i, i) = 1.0 / grid->weights()[i];
    return LinOperator(grid, std::move(k));
}

GridFunction apply(const LinOperator& a, const GridFunction& f) {
    require_same_grid(*a.grid(), *f.grid());
    const Eigen::VectorXd wf = a.grid()->weights().cwiseProduct(f.values());
    return GridFunction(a.grid(), a.kernel() * wf);
}

LinOperator tensor_product(const GridFunction& x, const GridFunction& y) {
    require_same_grid(*x.grid(), *y.grid());
    return LinOperator(x.grid(), y.values() * x.values().transpose());
}

LinOperator compose(const LinOperator& a, const LinOperator& b) {
    require_same_grid(*a.grid(), *b.grid());
    const Eigen::VectorXd& w = a.grid()->weights();
    return LinOperator(a.grid(), a.kernel() * w.asDiagonal() * b.kernel());
}

LinOperator add(const LinOperator& a, const LinOperator& b) {
    require_same_grid(*a.grid(), *b.grid());
    return LinOperator(a.grid(), a.kernel() + b.kernel());
}

LinOperator scale(const LinOperator& a, double c) {
    return LinOperator(a.grid(), c * a.kernel());
}

LinOperator adjoint(const LinOperator& a) {
    return LinOperator(a.grid(), a.kernel().transpose());
}

LinOperator operator-(const LinOperator& a, const LinOperator& b) {
    require_same_grid(*a.grid(), *b.grid());
    return LinOperator(a.grid(), a.kernel() - b.kernel());
}

Eigen::VectorXd singular_values(const LinOperator& a) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(weighted_similarity(a));
    return svd.singularValues();
}

double operator_norm(const LinOperator& a) {
    const Eigen::VectorXd s = singular_values(a);
    return s.size() > 0 ? s[0] : 0.0;
}

double hs_norm(const LinOperator& a) {
    // Frobenius norm of the similarity; no SVD needed.
    return weighted_similarity(a).norm();
}

double trace_norm(const LinOperator& a) {
    return singular_values(a).sum();
}

OperatorNorms all_norms(const LinOperator& a) {
    const Eigen::VectorXd s = singular_values(a);
    OperatorNorms n{};
    n.op = s.size() > 0 ? s[0] : 0.0;
    n.hs = std::sqrt(s.squaredNorm());
    n.tr = s.sum();
    return n;
}

double trace(const LinOperator& a) {
    const Eigen::VectorXd& w = a.grid()->weights();
    const Eigen::MatrixXd& k = a.kernel();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k.rows(); ++i) acc += w[i] * k(i, i);
    return acc;
}

EigenSystem eigh(const LinOperator& a, double rank_floor_rel) {
    const Eigen::MatrixXd& k = a.kernel();
    const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        throw NumericError("eigh: kernel asymmetry " + std::to_string(asym) +
                           " exceeds the self-adjointness tolerance 1e-10");
    }
    const auto m = k.rows();
    const Eigen::VectorXd sqrt_w = a.grid()->weights().cwiseSqrt();
    const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
    const Eigen::MatrixXd s = sqrt_w.asDiagonal() * sym * sqrt_w.asDiagonal();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success) {
        throw NumericError("eigh: eigensolver failed to converge");
    }

    EigenSystem es;
    es.eigenvalues.resize(m);
    es.eigenfunctions.reserve(static_cast<std::size_t>(m));
    const Eigen::VectorXd inv_sqrt_w = sqrt_w.cwiseInverse();
    // Solver returns ascending order; flip to the descending convention.
    for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index src = m - 1 - j;
        es.eigenvalues[j] = solver.eigenvalues()[src];
        es.eigenfunctions.emplace_back(
            a.grid(), inv_sqrt_w.cwiseProduct(solver.eigenvectors().col(src)));
    }
    const double top = es.eigenvalues.size() > 0 ? std::max(std::abs(es.eigenvalues[0]),
                                                            std::abs(es.eigenvalues[m - 1]))
                                                 : 0.0;
    const double floor = rank_floor_rel * std::max(1.0, top);
    es.rank = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        if (std::abs(es.eigenvalues[j]) > floor) ++es.rank;
    }
    return es;
}

double eigh_max_residual(const LinOperator& a, const EigenSystem& es) {
    double worst = 0.0;
    for (std::size_t j = 0; j < es.eigenfunctions.size(); ++j) {
        const GridFunction& phi = es.eigenfunctions[j];
        const GridFunction r = apply(a, phi) - phi * es.eigenvalues[static_cast<Eigen::Index>(j)];
        worst = std::max(worst, h_norm(r));
    }
    return worst;
}

GridFunction align_sign(const GridFunction& empirical, const GridFunction& reference) {
    const double ip = inner_product(empirical, reference);
    return ip >= 0.0 ? reference : reference * -1.0;
}

} // namespace arh
