#include "arh/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace arh {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median(std::vector<double> v) {
    if (v.empty()) throw InsufficientDataError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::vector<double> midranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double rate_scale(std::size_t n, double beta) {
    const double nn = static_cast<double>(n);
    return std::pow(nn, 0.25) / std::pow(std::log(nn), beta);
}

/// Which metric groups the config selects. Empty selector or "all" keeps
/// everything; unselected metrics stay NaN in the report.
struct MetricMask {
    bool cov = true, cross = true, eig = true, evec = true, diag = true,
         rho = true, pred = true, remark = true;
};

MetricMask make_mask(const std::vector<std::string>& metrics) {
    MetricMask mask;
    if (metrics.empty()) return mask;
    for (const std::string& name : metrics) {
        if (name == "all") return mask;
    }
    mask = MetricMask{false, false, false, false, false, false, false, false};
    for (const std::string& name : metrics) {
        if (name == "err_cov_hs") mask.cov = true;
        else if (name == "err_cross_hs") mask.cross = true;
        else if (name == "err_eig_sup") mask.eig = true;
        else if (name == "err_evec_sup") mask.evec = true;
        else if (name == "err_diag_sup") mask.diag = true;
        else if (name == "err_rho_tr" || name == "err_rho_hs" || name == "err_rho_op")
            mask.rho = true;
        else if (name == "err_pred") mask.pred = true;
        else if (name == "remark") mask.remark = true;
        else throw ConfigError("unknown metric selector '" + name + "'");
    }
    return mask;
}

/// One replicate: simulate, estimate, measure. Throws arh::Error on failure.
StudyRow run_replicate(const StudyConfig& cfg, const MetricMask& mask,
                       const GroundTruth& truth, double remark_rhs,
                       double rho_trace_norm, std::size_t n,
                       std::size_t replicate, std::uint64_t seed,
                       std::size_t burn_in) {
    StudyRow row;
    row.n = n;
    row.replicate = replicate;
    row.seed = seed;
    row.scale = rate_scale(n, cfg.est.beta);

    Arh1Spec spec = cfg.spec;
    spec.seed = seed;
    // One extra observation: X_n itself, held out as the prediction target's
    // context (the innovation norm reported alongside the oracle gap).
    const Sample trajectory = simulate(spec, n + 1, burn_in);
    const Sample sample = trajectory.head(n);
    const GridFunction x_last = sample.observation(n - 1);
    const GridFunction x_next = trajectory.observation(n);

    const LinOperator c_n = empirical_covariance(sample);
    const EigenSystem eigen = eigh(c_n);
    const RhoEstimate estimate = estimate_rho_with_eigen(sample, eigen, cfg.est);
    row.k_n = estimate.k_n;

    row.err_cov_hs = mask.cov ? hs_norm(c_n - truth.c_x) : kNaN;
    row.err_cross_hs =
        mask.cross ? hs_norm(empirical_cross_covariance(sample) - truth.d_x) : kNaN;

    const std::size_t rank = truth.eigen.rank;
    if (mask.eig) {
        double eig_sup = 0.0;
        for (std::size_t j = 0; j < rank; ++j) {
            const auto jc = static_cast<Eigen::Index>(j);
            eig_sup = std::max(
                eig_sup, std::abs(eigen.eigenvalues[jc] - truth.eigen.eigenvalues[jc]));
        }
        row.err_eig_sup = eig_sup;
    } else {
        row.err_eig_sup = kNaN;
    }

    const std::size_t j_sup = std::min(estimate.k_n, rank);
    if (mask.evec) {
        double evec_sup = 0.0;
        for (std::size_t j = 0; j < j_sup; ++j) {
            const GridFunction& emp = eigen.eigenfunctions[j];
            const GridFunction aligned = align_sign(emp, truth.eigen.eigenfunctions[j]);
            evec_sup = std::max(evec_sup, h_norm(aligned - emp));
        }
        row.err_evec_sup = evec_sup;
    } else {
        row.err_evec_sup = kNaN;
    }

    if (mask.diag) {
        const DiagonalCross cross = diagonal_cross(sample, eigen, j_sup);
        double diag_sup = 0.0;
        for (std::size_t j = 0; j < j_sup; ++j) {
            const auto jc = static_cast<Eigen::Index>(j);
            diag_sup = std::max(diag_sup, std::abs(cross.diagonal[jc] - truth.d_diag[jc]));
        }
        row.err_diag_sup = diag_sup;
    } else {
        row.err_diag_sup = kNaN;
    }

    if (mask.rho) {
        const OperatorNorms rho_err = all_norms(estimate.op - truth.rho);
        row.err_rho_op = rho_err.op;
        row.err_rho_hs = rho_err.hs;
        row.err_rho_tr = rho_err.tr;
        row.err_rho_tr_maxmin = std::abs(trace_norm(estimate.op) - rho_trace_norm);
    } else {
        row.err_rho_op = row.err_rho_hs = row.err_rho_tr = kNaN;
        row.err_rho_tr_maxmin = kNaN;
    }

    row.err_pred =
        mask.pred ? h_norm(predict(estimate, x_last) - apply(truth.rho, x_last)) : kNaN;
    row.x_last_norm = h_norm(x_last);
    row.innovation_norm = h_norm(x_next - apply(truth.rho, x_last));

    if (mask.remark) {
        const double hs = mask.rho ? row.err_rho_hs : hs_norm(estimate.op - truth.rho);
        row.remark_lhs = hs * hs;
        row.remark_rhs = remark_rhs;
    } else {
        row.remark_lhs = row.remark_rhs = kNaN;
    }

    try {
        row.lambda_kn = lambda_gap(truth.eigen.eigenvalues, estimate.k_n);
    } catch (const InfiniteGapError&) {
        row.lambda_kn = kNaN;
    }

    row.scaled_err_cov_hs = row.err_cov_hs * row.scale;
    row.scaled_err_cross_hs = row.err_cross_hs * row.scale;
    row.scaled_err_eig_sup = row.err_eig_sup * row.scale;
    row.scaled_err_evec_sup = row.err_evec_sup * row.scale;
    row.scaled_err_diag_sup = row.err_diag_sup * row.scale;
    row.scaled_err_rho_tr = row.err_rho_tr * row.scale;
    row.scaled_err_rho_hs = row.err_rho_hs * row.scale;
    row.scaled_err_rho_op = row.err_rho_op * row.scale;
    row.scaled_err_pred = row.err_pred * row.scale;
    return row;
}

void mark_failed(StudyRow& row, const std::string& reason) {
    row.failed = true;
    row.failure_reason = reason;
    row.k_n = 0;
    for (double* f : {&row.lambda_kn, &row.err_cov_hs, &row.err_cross_hs,
                      &row.err_eig_sup, &row.err_evec_sup, &row.err_diag_sup,
                      &row.err_rho_tr, &row.err_rho_hs, &row.err_rho_op,
                      &row.err_pred, &row.scaled_err_cov_hs, &row.scaled_err_cross_hs,
                      &row.scaled_err_eig_sup, &row.scaled_err_evec_sup,
                      &row.scaled_err_diag_sup, &row.scaled_err_rho_tr,
                      &row.scaled_err_rho_hs, &row.scaled_err_rho_op,
                      &row.scaled_err_pred, &row.x_last_norm, &row.innovation_norm,
                      &row.remark_lhs, &row.remark_rhs, &row.err_rho_tr_maxmin}) {
        *f = kNaN;
    }
}

bool rows_identical(const StudyRow& a, const StudyRow& b) {
    auto same = [](double x, double y) {
        return (std::isnan(x) && std::isnan(y)) || x == y;
    };
    return a.n == b.n && a.k_n == b.k_n && a.failed == b.failed &&
           same(a.lambda_kn, b.lambda_kn) && same(a.err_cov_hs, b.err_cov_hs) &&
           same(a.err_cross_hs, b.err_cross_hs) && same(a.err_eig_sup, b.err_eig_sup) &&
           same(a.err_evec_sup, b.err_evec_sup) && same(a.err_diag_sup, b.err_diag_sup) &&
           same(a.err_rho_tr, b.err_rho_tr) && same(a.err_rho_hs, b.err_rho_hs) &&
           same(a.err_rho_op, b.err_rho_op) && same(a.err_pred, b.err_pred) &&
           same(a.x_last_norm, b.x_last_norm) &&
           same(a.innovation_norm, b.innovation_norm) &&
           same(a.remark_lhs, b.remark_lhs) &&
           same(a.err_rho_tr_maxmin, b.err_rho_tr_maxmin);
}

} // namespace

void StudyConfig::validate() const {
    spec.validate();
    est.validate();
    if (sample_sizes.empty()) throw ConfigError("study: sample_sizes must be non-empty");
    for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
        if (sample_sizes[i] < 2) throw ConfigError("study: every sample size must be >= 2");
        if (i > 0 && sample_sizes[i] <= sample_sizes[i - 1]) {
            throw ConfigError("study: sample_sizes must be strictly increasing");
        }
    }
    if (replicates < 1) throw ConfigError("study: replicates must be >= 1");
    if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) {
        throw ConfigError("study: failure_budget must lie in [0,1]");
    }
    for (const std::string& name : metrics) {
        if (name != "all" && name != "remark") metric_value(StudyRow{}, name);
    }
}

GroundTruth compute_ground_truth(const Arh1Spec& spec, double tol) {
    GroundTruth truth{spec.rho, stationary_covariance(spec, tol),
                      LinOperator::zero(spec.rho.grid()), EigenSystem{}, {}};
    truth.d_x = cross_covariance(spec, truth.c_x);
    truth.eigen = eigh(truth.c_x);
    const std::size_t rank = truth.eigen.rank;
    truth.d_diag.resize(static_cast<Eigen::Index>(rank));
    for (std::size_t j = 0; j < rank; ++j) {
        const GridFunction& phi = truth.eigen.eigenfunctions[j];
        truth.d_diag[static_cast<Eigen::Index>(j)] = inner_product(apply(truth.d_x, phi), phi);
    }
    return truth;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "err_cov_hs",  "err_cross_hs", "err_eig_sup",
        "err_evec_sup", "err_diag_sup", "err_rho_tr",
        "err_rho_hs",  "err_rho_op",   "err_pred"};
    return names;
}

double metric_value(const StudyRow& row, const std::string& name) {
    if (name == "err_cov_hs") return row.err_cov_hs;
    if (name == "err_cross_hs") return row.err_cross_hs;
    if (name == "err_eig_sup") return row.err_eig_sup;
    if (name == "err_evec_sup") return row.err_evec_sup;
    if (name == "err_diag_sup") return row.err_diag_sup;
    if (name == "err_rho_tr") return row.err_rho_tr;
    if (name == "err_rho_hs") return row.err_rho_hs;
    if (name == "err_rho_op") return row.err_rho_op;
    if (name == "err_pred") return row.err_pred;
    if (name == "scaled_err_cov_hs") return row.scaled_err_cov_hs;
    if (name == "scaled_err_cross_hs") return row.scaled_err_cross_hs;
    if (name == "scaled_err_eig_sup") return row.scaled_err_eig_sup;
    if (name == "scaled_err_evec_sup") return row.scaled_err_evec_sup;
    if (name == "scaled_err_diag_sup") return row.scaled_err_diag_sup;
    if (name == "scaled_err_rho_tr") return row.scaled_err_rho_tr;
    if (name == "scaled_err_rho_hs") return row.scaled_err_rho_hs;
    if (name == "scaled_err_rho_op") return row.scaled_err_rho_op;
    if (name == "scaled_err_pred") return row.scaled_err_pred;
    if (name == "err_rho_tr_maxmin") return row.err_rho_tr_maxmin;
    if (name == "remark_gap") {
        const double gap = row.remark_lhs - row.remark_rhs;
        return gap > 0.0 ? gap : 0.0;
    }
    if (name == "k_n") return static_cast<double>(row.k_n);
    if (name == "lambda_kn") return row.lambda_kn;
    throw ConfigError("unknown metric '" + name + "'");
}

StudyReport run_study(const StudyConfig& cfg) {
    cfg.validate();
    const MetricMask mask = make_mask(cfg.metrics);
    const GroundTruth truth = compute_ground_truth(cfg.spec, 1e-10);
    const double remark_rhs = mask.remark ? remark_rhs_value(truth) : 0.0;
    const double rho_trace_norm = mask.rho ? trace_norm(truth.rho) : 0.0;
    const std::size_t burn = cfg.burn_in ? *cfg.burn_in : default_burn_in(cfg.spec);

    StudyReport report;
    report.sample_sizes = cfg.sample_sizes;
    report.replicates = cfg.replicates;
    report.master_seed = cfg.master_seed;
    report.beta = cfg.est.beta;
    report.regime = cfg.spec.mode == InnovationMode::truncated_gaussian
                        ? "bounded-norm innovations (truncated gaussian): sharp-rate "
                          "and gap-condition hypotheses apply"
                        : "gaussian innovations: fourth-moment hypothesis only, "
                          "norm-bounded hypotheses not satisfied";

    const std::size_t tiers = cfg.sample_sizes.size();
    const std::size_t total = tiers * cfg.replicates;
    report.rows.resize(total);

    auto run_task = [&](std::size_t task) {
        const std::size_t tier = task / cfg.replicates;
        const std::size_t rep = task % cfg.replicates;
        const std::size_t n = cfg.sample_sizes[tier];
        const std::uint64_t seed = derive_seed(cfg.master_seed, task);
        try {
            report.rows[task] = run_replicate(cfg, mask, truth, remark_rhs,
                                              rho_trace_norm, n, rep, seed, burn);
        } catch (const Error& e) {
            StudyRow row;
            row.n = n;
            row.replicate = rep;
            row.seed = seed;
            row.scale = rate_scale(n, cfg.est.beta);
            mark_failed(row, e.what());
            report.rows[task] = row;
        }
    };

    const std::size_t jobs = std::max<std::size_t>(1, cfg.jobs);
    if (jobs == 1) {
        for (std::size_t task = 0; task < total; ++task) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(jobs);
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t task = next.fetch_add(1);
                    if (task >= total) return;
                    try {
                        run_task(task);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
        for (std::thread& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    for (const StudyRow& row : report.rows) {
        if (row.failed) {
            ++report.failure_count;
            continue;
        }
        if (mask.rho &&
            !(row.err_rho_op <= row.err_rho_hs && row.err_rho_hs <= row.err_rho_tr)) {
            report.norm_ordering_ok = false;
        }
        if (mask.eig && mask.cov && !(row.err_eig_sup <= row.err_cov_hs)) {
            report.eig_le_cov_ok = false;
        }
    }

    // Determinism spot check: replay the first task and compare.
    {
        StudyRow replay;
        const std::size_t n = cfg.sample_sizes[0];
        const std::uint64_t seed = derive_seed(cfg.master_seed, 0);
        try {
            replay = run_replicate(cfg, mask, truth, remark_rhs, rho_trace_norm, n,
                                   0, seed, burn);
        } catch (const Error& e) {
            replay.n = n;
            replay.seed = seed;
            mark_failed(replay, e.what());
        }
        report.determinism_ok = rows_identical(replay, report.rows[0]);
    }
    return report;
}

std::vector<double> tier_medians(const StudyReport& report, const std::string& metric) {
    std::vector<double> medians;
    medians.reserve(report.sample_sizes.size());
    for (std::size_t n : report.sample_sizes) {
        std::vector<double> values;
        for (const StudyRow& row : report.rows) {
            if (row.n != n || row.failed) continue;
            const double v = metric_value(row, metric);
            if (std::isfinite(v)) values.push_back(v);
        }
        if (values.empty()) {
            throw InsufficientDataError("metric '" + metric + "' has no finite values at n=" +
                                        std::to_string(n));
        }
        medians.push_back(median(std::move(values)));
    }
    return medians;
}

double trend_statistic(const StudyReport& report, const std::string& metric) {
    if (report.sample_sizes.size() < 3) {
        throw InsufficientDataError("trend statistic needs at least 3 sample sizes");
    }
    if (report.replicates < 5) {
        throw InsufficientDataError("trend statistic needs at least 5 replicates");
    }
    const std::vector<double> medians = tier_medians(report, metric);
    std::vector<double> x(medians.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
    return pearson(x, midranks(medians));
}

double remark_rhs_value(const GroundTruth& truth, std::size_t* skipped) {
    const std::size_t rank = truth.eigen.rank;
    Eigen::MatrixXd coeff(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(rank));
    for (std::size_t j = 0; j < rank; ++j) {
        const GridFunction dphi = apply(truth.d_x, truth.eigen.eigenfunctions[j]);
        for (std::size_t l = 0; l < rank; ++l) {
            coeff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) =
                inner_product(dphi, truth.eigen.eigenfunctions[l]);
        }
    }
    double rhs = 0.0;
    std::size_t dropped = 0;
    for (std::size_t j = 0; j < rank; ++j) {
        const double c_j = truth.eigen.eigenvalues[static_cast<Eigen::Index>(j)];
        for (std::size_t l = 0; l < rank; ++l) {
            if (j == l) continue;
            if (c_j < 1e-12) {
                ++dropped;
                continue;
            }
            const double term =
                coeff(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l)) / c_j;
            rhs += term * term;
        }
    }
    if (skipped) *skipped = dropped;
    return rhs;
}

RemarkCheck remark_bound_check(const RhoEstimate& estimate, const GroundTruth& truth) {
    RemarkCheck check;
    const double hs = hs_norm(estimate.op - truth.rho);
    check.lhs = hs * hs;
    check.rhs = remark_rhs_value(truth, &check.skipped_terms);
    return check;
}

std::vector<LambdaProbeRow> lambda_condition_probe(const StudyReport& report,
                                                   const GroundTruth& truth) {
    std::vector<LambdaProbeRow> probe;
    probe.reserve(report.sample_sizes.size());
    for (std::size_t n : report.sample_sizes) {
        std::vector<double> ks;
        for (const StudyRow& row : report.rows) {
            if (row.n == n && !row.failed) ks.push_back(static_cast<double>(row.k_n));
        }
        if (ks.empty()) {
            throw InsufficientDataError("lambda probe: no successful replicate at n=" +
                                        std::to_string(n));
        }
        LambdaProbeRow p;
        p.n = n;
        p.k_n = static_cast<std::size_t>(median(std::move(ks)));
        p.lambda_kn = lambda_gap(truth.eigen.eigenvalues, p.k_n);
        const double nn = static_cast<double>(n);
        p.denom = std::pow(nn, 0.25) * std::pow(std::log(nn), report.beta - 0.5);
        p.ratio = p.lambda_kn / p.denom;
        probe.push_back(p);
    }
    return probe;
}

} // namespace arh
