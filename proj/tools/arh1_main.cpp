#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "arh/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;     // malformed config or domain error
constexpr int kExitAssumption = 3; // eigenvalue floor (A2) failure
constexpr int kExitStudy = 4;      // failure budget or hard assertion

struct CommonOpts {
    std::string config;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::size_t jobs = 1;
};

std::size_t default_jobs() {
    if (const char* env = std::getenv("ARH1_JOBS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return v;
    }
    return 1;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "JSON configuration file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "override the configured seed");
    cmd->add_flag("--force", opts.force, "overwrite existing output files");
    cmd->add_option("--jobs", opts.jobs,
                    "replicate-level parallelism (default: ARH1_JOBS or 1)");
}

int cmd_simulate(const CommonOpts& opts) {
    const json cfg = arh::load_json_file(opts.config);
    const fs::path base = fs::path(opts.config).parent_path();
    arh::Arh1Spec spec = arh::spec_from_json(
        cfg.contains("spec") ? cfg.at("spec") : throw arh::ConfigError("missing 'spec'"),
        base);
    if (opts.seed) spec.seed = *opts.seed;
    if (!cfg.contains("n")) throw arh::ConfigError("missing 'n'");
    const auto n = cfg.at("n").get<std::size_t>();
    if (n < 2) throw arh::ConfigError("n >= 2 required");
    const std::size_t burn = cfg.contains("burn_in") && !cfg.at("burn_in").is_null()
                                 ? cfg.at("burn_in").get<std::size_t>()
                                 : arh::default_burn_in(spec);

    const arh::Sample sample = arh::simulate(spec, n, burn);
    const fs::path out(opts.out_dir);
    arh::write_sample_csv(out / "sample.csv", sample, opts.force);

    json prov = arh::provenance_json("simulate", opts.config, spec.seed);
    prov["n"] = n;
    prov["burn_in"] = burn;
    arh::write_text_file(out / "provenance.json", prov.dump(2) + "\n", opts.force);
    std::cout << "wrote " << (out / "sample.csv").string() << " (" << n << " x "
              << sample.grid()->size() << ")\n";
    return kExitOk;
}

int cmd_estimate(const CommonOpts& opts) {
    const json cfg = arh::load_json_file(opts.config);
    const fs::path base = fs::path(opts.config).parent_path();
    if (!cfg.contains("sample_csv")) throw arh::ConfigError("missing 'sample_csv'");
    fs::path sample_path(cfg.at("sample_csv").get<std::string>());
    if (!sample_path.is_absolute()) sample_path = base / sample_path;

    const arh::Sample sample = arh::read_sample_csv(sample_path);
    const arh::EstimatorConfig est = cfg.contains("estimator")
                                         ? arh::estimator_from_json(cfg.at("estimator"))
                                         : arh::EstimatorConfig{};
    const arh::RhoEstimate estimate = arh::estimate_rho(sample, est);

    const fs::path out(opts.out_dir);
    arh::write_estimate(out / "estimate.json", out / "rho_hat.csv", estimate, opts.force);
    json prov = arh::provenance_json("estimate", opts.config, 0);
    prov["sample_csv"] = sample_path.filename().string();
    arh::write_text_file(out / "provenance.json", prov.dump(2) + "\n", opts.force);

    std::cout << "k_n = " << estimate.k_n << "\n";
    for (Eigen::Index j = 0; j < estimate.coefficients.size(); ++j) {
        std::cout << "rho_n," << (j + 1) << " = " << arh::fmt_sci(estimate.coefficients[j])
                  << "\n";
    }
    std::cout << "trace_norm = " << arh::fmt_sci(arh::trace_norm(estimate.op)) << "\n";
    return kExitOk;
}

int cmd_predict(const CommonOpts& opts) {
    const json cfg = arh::load_json_file(opts.config);
    const fs::path base = fs::path(opts.config).parent_path();
    auto path_of = [&](const char* key) -> fs::path {
        if (!cfg.contains(key))
            throw arh::ConfigError(std::string("missing '") + key + "'");
        fs::path p(cfg.at(key).get<std::string>());
        return p.is_absolute() ? p : base / p;
    };

    const arh::RhoEstimate estimate = arh::read_estimate(path_of("estimate_json"));
    const arh::GridFunction last = arh::read_last_function_csv(path_of("last_csv"));

    std::optional<arh::LinOperator> rho_true;
    if (cfg.contains("rho_true_csv")) {
        rho_true = arh::read_operator_csv(path_of("rho_true_csv"), last.grid());
    }
    const arh::Prediction pred = arh::predict_with_oracle(estimate, rho_true, last);

    const fs::path out(opts.out_dir);
    arh::write_function_csv(out / "prediction.csv", pred.x_hat, opts.force);
    if (pred.error_h) {
        json err;
        err["error_h"] = *pred.error_h;
        err["x_last_norm"] = arh::h_norm(last);
        arh::write_text_file(out / "prediction.json", err.dump(2) + "\n", opts.force);
    }
    json prov = arh::provenance_json("predict", opts.config, 0);
    arh::write_text_file(out / "provenance.json", prov.dump(2) + "\n", opts.force);
    if (pred.error_h) {
        std::cout << "error_h = " << arh::fmt_sci(*pred.error_h) << "\n";
    }
    std::cout << "wrote " << (out / "prediction.csv").string() << "\n";
    return kExitOk;
}

int cmd_study(const CommonOpts& opts) {
    const json cfg = arh::load_json_file(opts.config);
    const fs::path base = fs::path(opts.config).parent_path();
    arh::StudyConfig study = arh::study_config_from_json(cfg, base);
    if (opts.seed) study.master_seed = *opts.seed;
    study.jobs = opts.jobs;

    const arh::StudyReport report = arh::run_study(study);
    const arh::GroundTruth truth = arh::compute_ground_truth(study.spec, 1e-10);

    const fs::path out(opts.out_dir);
    arh::write_study_csv(out / "report.csv", report, opts.force);
    const json summary = arh::study_summary(report, truth);
    arh::write_text_file(out / "summary.json", summary.dump(2) + "\n", opts.force);
    json prov = arh::provenance_json("study", opts.config, study.master_seed);
    arh::write_text_file(out / "provenance.json", prov.dump(2) + "\n", opts.force);

    const double failure_fraction =
        static_cast<double>(report.failure_count) /
        static_cast<double>(report.rows.empty() ? 1 : report.rows.size());
    std::cout << "rows = " << report.rows.size()
              << ", failures = " << report.failure_count << "\n";
    for (const std::string& name : arh::metric_names()) {
        try {
            std::cout << "trend(" << name
                      << ") = " << arh::trend_statistic(report, name) << "\n";
        } catch (const arh::InsufficientDataError&) {
            // Smoke-sized studies have no trend; the CSV still has the rows.
        }
    }

    if (failure_fraction > study.failure_budget) {
        std::cerr << "failure fraction " << failure_fraction << " exceeds budget "
                  << study.failure_budget << "\n";
        return kExitStudy;
    }
    if (!report.norm_ordering_ok || !report.eig_le_cov_ok || !report.determinism_ok) {
        std::cerr << "hard assertion failed (norm ordering / eigenvalue bound / "
                     "determinism)\n";
        return kExitStudy;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ARH(1) toolkit: simulation, componentwise estimation of the "
                 "autocorrelation operator, plug-in prediction, and Monte Carlo "
                 "convergence-rate studies"};
    app.require_subcommand(1);

    CommonOpts opts;
    opts.jobs = default_jobs();
    CLI::App* simulate = app.add_subcommand("simulate", "draw an ARH(1) trajectory");
    CLI::App* estimate = app.add_subcommand("estimate", "estimate rho from a sample CSV");
    CLI::App* predict = app.add_subcommand("predict", "one-step plug-in forecast");
    CLI::App* study = app.add_subcommand("study", "Monte Carlo convergence-rate study");
    for (CLI::App* cmd : {simulate, estimate, predict, study}) add_common(cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (estimate->parsed()) return cmd_estimate(opts);
        if (predict->parsed()) return cmd_predict(opts);
        if (study->parsed()) return cmd_study(opts);
    } catch (const arh::EstimationError& e) {
        std::cerr << "error: " << e.what() << " (eigenvalue index " << e.index() << ")\n";
        return kExitAssumption;
    } catch (const arh::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}
