#pragma once

#include <optional>

#include "arh/estimation.hpp"

namespace arh {

/// One-step-ahead plug-in forecast and, when the true operator is known,
/// its distance to the oracle forecast.
struct Prediction {
    GridFunction x_hat;
    std::optional<GridFunction> oracle;
    std::optional<double> error_h;
};

/// rho_hat(last); identical to sum_j rho_{n,j} <last, phi_j> phi_j.
GridFunction predict(const RhoEstimate& estimate, const GridFunction& last);

/// ||rho_hat(last) - rho_true(last)||_H. The bound
/// gap <= ||rho_hat - rho_true|| * ||last|| is re-checked on every call.
double oracle_gap(const RhoEstimate& estimate, const LinOperator& rho_true,
                  const GridFunction& last);

Prediction predict_with_oracle(const RhoEstimate& estimate,
                               const std::optional<LinOperator>& rho_true,
                               const GridFunction& last);

} // namespace arh
