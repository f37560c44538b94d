#include "arh/predict.hpp"

#include <cmath>

namespace arh {

GridFunction predict(const RhoEstimate& estimate, const GridFunction& last) {
    return apply(estimate.op, last);
}

double oracle_gap(const RhoEstimate& estimate, const LinOperator& rho_true,
                  const GridFunction& last) {
    require_same_grid(*estimate.op.grid(), *rho_true.grid());
    const double gap = h_norm(predict(estimate, last) - apply(rho_true, last));
    const double bound = operator_norm(estimate.op - rho_true) * h_norm(last);
    if (gap > bound + 1e-9) {
        throw NumericError("oracle gap exceeds the operator-norm bound; "
                           "internal invariant violated");
    }
    return gap;
}

Prediction predict_with_oracle(const RhoEstimate& estimate,
                               const std::optional<LinOperator>& rho_true,
                               const GridFunction& last) {
    Prediction p{predict(estimate, last), std::nullopt, std::nullopt};
    if (rho_true) {
        p.oracle = apply(*rho_true, last);
        p.error_h = h_norm(p.x_hat - *p.oracle);
    }
    return p;
}

} // namespace arh
