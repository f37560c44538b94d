#pragma once

#include <Eigen/Core>
#include <memory>

#include "arh/errors.hpp"

namespace arh {

/// Discretization of H = L2([0,1]): quadrature nodes in [0,1] with positive
/// weights summing to one. Immutable after construction and shared by
/// reference between the functions and operators living on it.
class Grid {
public:
    Grid(Eigen::VectorXd points, Eigen::VectorXd weights);

    /// Midpoint rule: t_i = (i + 1/2)/m, w_i = 1/m. The default and only
    /// built-in scheme; with it the weighted eigenproblem reduces to a
    /// plain symmetric one after a constant scaling.
    static std::shared_ptr<const Grid> uniform(std::size_t m);

    std::size_t size() const { return static_cast<std::size_t>(points_.size()); }
    const Eigen::VectorXd& points() const { return points_; }
    const Eigen::VectorXd& weights() const { return weights_; }

private:
    Eigen::VectorXd points_;
    Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// True when the two grids are the same object or hold identical nodes and
/// weights.
bool same_grid(const Grid& a, const Grid& b);

/// Throws DimensionError unless same_grid(a, b).
void require_same_grid(const Grid& a, const Grid& b);

/// An element of the discretized H: values at the grid nodes.
class GridFunction {
public:
    GridFunction(GridPtr grid, Eigen::VectorXd values);

    static GridFunction zero(const GridPtr& grid);
    static GridFunction constant(const GridPtr& grid, double c);

    const GridPtr& grid() const { return grid_; }
    const Eigen::VectorXd& values() const { return values_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    GridFunction operator+(const GridFunction& other) const;
    GridFunction operator-(const GridFunction& other) const;
    GridFunction operator*(double c) const;

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
};

inline GridFunction operator*(double c, const GridFunction& f) { return f * c; }

/// Weighted inner product sum_i w_i f_i g_i, accumulated in ascending index
/// order so results are reproducible bit for bit.
double inner_product(const GridFunction& f, const GridFunction& g);

/// Norm induced by inner_product.
double h_norm(const GridFunction& f);

} // namespace arh
