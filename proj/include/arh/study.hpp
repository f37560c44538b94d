#pragma once

#include <string>
#include <vector>

#include "arh/estimation.hpp"
#include "arh/predict.hpp"

namespace arh {

/// Monte Carlo experiment frame: one ARH(1) model, several sample sizes,
/// R replicates per size.
struct StudyConfig {
    Arh1Spec spec;
    std::vector<std::size_t> sample_sizes;
    std::size_t replicates = 1;
    EstimatorConfig est;
    std::uint64_t master_seed = 0;
    /// Canonical metric names to compute; empty means all.
    std::vector<std::string> metrics;
    /// Burn-in override; by default chosen analytically from ||rho||.
    std::optional<std::size_t> burn_in;
    double failure_budget = 0.05;
    std::size_t jobs = 1;

    void validate() const;
};

/// Exact model quantities every study metric is measured against.
struct GroundTruth {
    LinOperator rho;
    LinOperator c_x;
    LinOperator d_x;
    EigenSystem eigen;      ///< of c_x
    Eigen::VectorXd d_diag; ///< D_j = <D_X phi_j, phi_j>
};
GroundTruth compute_ground_truth(const Arh1Spec& spec, double tol = 1e-10);

/// One replicate's measurements. Failed replicates keep their flag and
/// reason; their metric fields are NaN and excluded from aggregation.
struct StudyRow {
    std::size_t n = 0;
    std::size_t replicate = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure_reason;

    std::size_t k_n = 0;
    double lambda_kn = 0.0;
    double scale = 0.0; ///< n^{1/4} / (ln n)^beta

    double err_cov_hs = 0.0;
    double err_cross_hs = 0.0;
    double err_eig_sup = 0.0;
    double err_evec_sup = 0.0;
    double err_diag_sup = 0.0;
    double err_rho_tr = 0.0;
    double err_rho_hs = 0.0;
    double err_rho_op = 0.0;
    double err_pred = 0.0;

    double scaled_err_cov_hs = 0.0;
    double scaled_err_cross_hs = 0.0;
    double scaled_err_eig_sup = 0.0;
    double scaled_err_evec_sup = 0.0;
    double scaled_err_diag_sup = 0.0;
    double scaled_err_rho_tr = 0.0;
    double scaled_err_rho_hs = 0.0;
    double scaled_err_rho_op = 0.0;
    double scaled_err_pred = 0.0;

    double x_last_norm = 0.0;
    double innovation_norm = 0.0;
    double remark_lhs = 0.0;
    double remark_rhs = 0.0;
    /// |  ||rho_hat||_1 - ||rho||_1 |: the max-minus-min surrogate for the
    /// trace distance. Valid only under an ordering of the operators; shipped
    /// next to err_rho_tr so the gap between the two is visible in reports.
    double err_rho_tr_maxmin = 0.0;
};

/// The nine canonical error metrics, in report column order.
const std::vector<std::string>& metric_names();

/// Row field lookup by metric name; accepts canonical names, their
/// "scaled_" twins, and the derived "remark_gap" = max(0, lhs - rhs).
double metric_value(const StudyRow& row, const std::string& name);

struct StudyReport {
    std::vector<std::size_t> sample_sizes;
    std::size_t replicates = 0;
    std::uint64_t master_seed = 0;
    double beta = 0.0;
    std::string regime; ///< which norm hypothesis the innovations satisfy
    std::vector<StudyRow> rows;

    std::size_t failure_count = 0;
    bool norm_ordering_ok = true; ///< err_rho_op <= err_rho_hs <= err_rho_tr per row
    bool eig_le_cov_ok = true;    ///< err_eig_sup <= err_cov_hs per row
    bool determinism_ok = true;   ///< first replicate recomputed bit-identically
};

/// Runs the full experiment. Replicates execute independently (optionally in
/// parallel); rows come back ordered by (sample size, replicate) and the
/// whole report is a pure function of the config.
StudyReport run_study(const StudyConfig& cfg);

/// Per-tier median of a metric over successful rows.
std::vector<double> tier_medians(const StudyReport& report, const std::string& metric);

/// Spearman rank correlation between sample size and the per-tier median of
/// the metric, midrank convention for ties. Negative values indicate decay.
double trend_statistic(const StudyReport& report, const std::string& metric);

/// Both sides of the Hilbert-Schmidt remainder bound: lhs is the squared
/// HS estimation error, rhs the off-diagonal energy
/// sum_{j != k} (<D_X phi_j, phi_k> / C_j)^2 over the ground-truth basis.
struct RemarkCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    std::size_t skipped_terms = 0; ///< terms dropped because C_j < 1e-12
};
RemarkCheck remark_bound_check(const RhoEstimate& estimate, const GroundTruth& truth);

/// rhs of the remainder bound alone (sample independent).
double remark_rhs_value(const GroundTruth& truth, std::size_t* skipped = nullptr);

/// Diagnostic for the inverse-gap growth condition: per tier,
/// Lambda_{k_n} / (n^{1/4} (ln n)^{beta - 1/2}).
struct LambdaProbeRow {
    std::size_t n = 0;
    std::size_t k_n = 0;
    double lambda_kn = 0.0;
    double denom = 0.0;
    double ratio = 0.0;
};
std::vector<LambdaProbeRow> lambda_condition_probe(const StudyReport& report,
                                                   const GroundTruth& truth);

} // namespace arh
