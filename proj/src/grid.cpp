#include "arh/grid.hpp"

#include <cmath>

namespace arh {

Grid::Grid(Eigen::VectorXd points, Eigen::VectorXd weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.size() == 0 || points_.size() != weights_.size()) {
        throw DimensionError("grid: points and weights must be non-empty and equal-length");
    }
    double wsum = 0.0;
    for (Eigen::Index i = 0; i < points_.size(); ++i) {
        const double p = points_[i];
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
            throw NumericError("grid: points must be finite and lie in [0,1]");
        }
        if (i > 0 && !(points_[i - 1] < p)) {
            throw NumericError("grid: points must be strictly increasing");
        }
        const double w = weights_[i];
        if (!std::isfinite(w) || w <= 0.0) {
            throw NumericError("grid: weights must be finite and positive");
        }
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
        throw NumericError("grid: weights must sum to 1 within 1e-12");
    }
}

std::shared_ptr<const Grid> Grid::uniform(std::size_t m) {
    if (m == 0) throw DimensionError("grid: size must be positive");
    Eigen::VectorXd pts(m), wts(m);
    const double h = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        pts[static_cast<Eigen::Index>(i)] = (static_cast<double>(i) + 0.5) * h;
        wts[static_cast<Eigen::Index>(i)] = h;
    }
    return std::make_shared<const Grid>(std::move(pts), std::move(wts));
}

bool same_grid(const Grid& a, const Grid& b) {
    if (&a == &b) return true;
    return a.size() == b.size() && a.points() == b.points() &&
           a.weights() == b.weights();
}

void require_same_grid(const Grid& a, const Grid& b) {
    if (!same_grid(a, b)) {
        throw DimensionError("objects live on different grids");
    }
}

GridFunction::GridFunction(GridPtr grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DimensionError("grid function: null grid");
    if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
        throw DimensionError("grid function: value count must equal grid size");
    }
    if (!values_.allFinite()) {
        throw NumericError("grid function: values must be finite");
    }
}

GridFunction GridFunction::zero(const GridPtr& grid) {
    return GridFunction(grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->size())));
}

GridFunction GridFunction::constant(const GridPtr& grid, double c) {
    return GridFunction(grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid->size()), c));
}

GridFunction GridFunction::operator+(const GridFunction& other) const {
    require_same_grid(*grid_, *other.grid_);
    return GridFunction(grid_, values_ + other.values_);
}

GridFunction GridFunction::operator-(const GridFunction& other) const {
    require_same_grid(*grid_, *other.grid_);
    return GridFunction(grid_, values_ - other.values_);
}

GridFunction GridFunction::operator*(double c) const {
    return GridFunction(grid_, values_ * c);
}

double inner_product(const GridFunction& f, const GridFunction& g) {
    require_same_grid(*f.grid(), *g.grid());
    const Eigen::VectorXd& w = f.grid()->weights();
    const Eigen::VectorXd& a = f.values();
    const Eigen::VectorXd& b = g.values();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        acc += w[i] * a[i] * b[i];
    }
    return acc;
}

double h_norm(const GridFunction& f) {
    return std::sqrt(inner_product(f, f));
}

} // namespace arh
