#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "arh/io.hpp"

using namespace arh;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() { return fs::current_path() / "cli_scratch"; }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = scratch_root() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out_file = dir / "stdout.txt";
    const fs::path err_file = dir / "stderr.txt";
    const std::string cmd = std::string(ARH1_CLI_PATH) + " " + args + " > " +
                            out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    CliResult r{-1, slurp(out_file), slurp(err_file)};
    if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    return r;
}

void write_config(const fs::path& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n", true);
}

} // namespace

TEST_CASE("simulate writes the sample and is reproducible") {
    const fs::path dir = fresh_dir("simulate");
    const fs::path cfg = dir / "config.json";
    write_config(cfg, {{"spec", {{"preset", "diagonal"}, {"m", 16}, {"seed", 42}}},
                       {"n", 100}});

    const fs::path out = dir / "run";
    CliResult r = run_cli("simulate --config " + cfg.string() + " --out " + out.string(), dir);
    CHECK(r.exit_code == 0);

    const Sample s = read_sample_csv(out / "sample.csv");
    CHECK(s.size() == 100);
    CHECK(s.grid()->size() == 16);
    CHECK(fs::exists(out / "provenance.json"));

    // Existing outputs are never clobbered without --force.
    r = run_cli("simulate --config " + cfg.string() + " --out " + out.string(), dir);
    CHECK(r.exit_code == 2);

    const std::string first = slurp(out / "sample.csv");
    r = run_cli("simulate --config " + cfg.string() + " --out " + out.string() + " --force",
                dir);
    CHECK(r.exit_code == 0);
    CHECK(slurp(out / "sample.csv") == first);
}

TEST_CASE("simulate rejects n = 1 with a domain error") {
    const fs::path dir = fresh_dir("simulate_n1");
    const fs::path cfg = dir / "config.json";
    write_config(cfg, {{"spec", {{"preset", "diagonal"}, {"m", 16}}}, {"n", 1}});
    const CliResult r =
        run_cli("simulate --config " + cfg.string() + " --out " + (dir / "run").string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("n >= 2") != std::string::npos);
}

TEST_CASE("malformed config reports the offending line") {
    const fs::path dir = fresh_dir("badjson");
    const fs::path cfg = dir / "config.json";
    write_text_file(cfg, "{\n  \"spec\": oops\n}\n", true);
    const CliResult r =
        run_cli("simulate --config " + cfg.string() + " --out " + (dir / "run").string(), dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find(":2:") != std::string::npos);
}

TEST_CASE("estimate on a diagonal sample selects k_n = 3 at n = 2000") {
    const fs::path dir = fresh_dir("estimate");
    const fs::path sim_cfg = dir / "sim.json";
    write_config(sim_cfg, {{"spec", {{"preset", "diagonal"}, {"m", 64}, {"seed", 1}}},
                           {"n", 2000}});
    const fs::path sim_out = dir / "sim";
    CHECK(run_cli("simulate --config " + sim_cfg.string() + " --out " + sim_out.string(),
                  dir).exit_code == 0);

    const fs::path est_cfg = dir / "est.json";
    write_config(est_cfg, {{"sample_csv", (sim_out / "sample.csv").string()}});
    const fs::path est_out = dir / "est";
    const CliResult r =
        run_cli("estimate --config " + est_cfg.string() + " --out " + est_out.string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("k_n = 3") != std::string::npos);
    CHECK(r.out.find("trace_norm") != std::string::npos);

    const nlohmann::json est = load_json_file(est_out / "estimate.json");
    CHECK(est.at("k_n").get<std::size_t>() == 3);
    CHECK(est.at("coefficients").size() == 3);

    // Serialization fidelity: the reloaded kernel equals the in-process one.
    const Sample s = read_sample_csv(sim_out / "sample.csv");
    const RhoEstimate direct = estimate_rho(s, EstimatorConfig{});
    const RhoEstimate reloaded = read_estimate(est_out / "estimate.json");
    CHECK(hs_norm(reloaded.op - direct.op) <= 1e-15);
}

TEST_CASE("estimate exits 3 on a sample with no usable eigenvalue") {
    const fs::path dir = fresh_dir("estimate_zero");
    const GridPtr grid = Grid::uniform(8);
    const Sample zeros(grid, Eigen::MatrixXd::Zero(10, 8));
    write_sample_csv(dir / "zeros.csv", zeros, true);

    const fs::path cfg = dir / "est.json";
    write_config(cfg, {{"sample_csv", (dir / "zeros.csv").string()}});
    const CliResult r =
        run_cli("estimate --config " + cfg.string() + " --out " + (dir / "out").string(), dir);
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("eigenvalue index") != std::string::npos);
}

TEST_CASE("predict pipeline with and without the oracle") {
    const fs::path dir = fresh_dir("predict");

    const fs::path sim_cfg = dir / "sim.json";
    write_config(sim_cfg, {{"spec", {{"preset", "diagonal"}, {"m", 32}, {"seed", 5}}},
                           {"n", 400}});
    CHECK(run_cli("simulate --config " + sim_cfg.string() + " --out " +
                  (dir / "sim").string(), dir).exit_code == 0);

    const fs::path est_cfg = dir / "est.json";
    write_config(est_cfg, {{"sample_csv", (dir / "sim" / "sample.csv").string()}});
    CHECK(run_cli("estimate --config " + est_cfg.string() + " --out " +
                  (dir / "est").string(), dir).exit_code == 0);

    // Ground-truth kernel for the oracle comparison.
    const Arh1Spec spec = diagonal_preset(32, 5);
    write_operator_csv(dir / "rho_true.csv", spec.rho, true);

    const fs::path pred_cfg = dir / "pred.json";
    write_config(pred_cfg, {{"estimate_json", (dir / "est" / "estimate.json").string()},
                            {"last_csv", (dir / "sim" / "sample.csv").string()},
                            {"rho_true_csv", (dir / "rho_true.csv").string()}});
    const CliResult r = run_cli(
        "predict --config " + pred_cfg.string() + " --out " + (dir / "pred").string(), dir);
    CHECK(r.exit_code == 0);
    CHECK(fs::exists(dir / "pred" / "prediction.csv"));
    const nlohmann::json err = load_json_file(dir / "pred" / "prediction.json");
    CHECK(err.at("error_h").get<double>() >= 0.0);

    // A zero last observation predicts zero.
    write_function_csv(dir / "zero.csv", GridFunction::zero(Grid::uniform(32)), true);
    const fs::path zero_cfg = dir / "pred_zero.json";
    write_config(zero_cfg, {{"estimate_json", (dir / "est" / "estimate.json").string()},
                            {"last_csv", (dir / "zero.csv").string()}});
    CHECK(run_cli("predict --config " + zero_cfg.string() + " --out " +
                  (dir / "pred_zero").string(), dir).exit_code == 0);
    const GridFunction zhat = read_last_function_csv(dir / "pred_zero" / "prediction.csv");
    CHECK(zhat.values().cwiseAbs().maxCoeff() == 0.0);
    CHECK(!fs::exists(dir / "pred_zero" / "prediction.json"));

    // Grid size mismatch is a domain error.
    write_function_csv(dir / "short.csv", GridFunction::zero(Grid::uniform(16)), true);
    const fs::path bad_cfg = dir / "pred_bad.json";
    write_config(bad_cfg, {{"estimate_json", (dir / "est" / "estimate.json").string()},
                           {"last_csv", (dir / "short.csv").string()}});
    CHECK(run_cli("predict --config " + bad_cfg.string() + " --out " +
                  (dir / "pred_bad").string(), dir).exit_code == 2);
}

TEST_CASE("study smoke run: shape, exit code, byte-identical rerun") {
    const fs::path dir = fresh_dir("study");
    const fs::path cfg = dir / "study.json";
    write_config(cfg,
                 {{"spec",
                   {{"preset", "nondiagonal"},
                    {"m", 16},
                    {"innovation", {{"mode", "truncated_gaussian"}, {"bound", 4.0}}}}},
                  {"sample_sizes", {50, 100}},
                  {"replicates", 2},
                  {"master_seed", 9}});

    const fs::path out = dir / "run";
    const CliResult r =
        run_cli("study --config " + cfg.string() + " --out " + out.string(), dir);
    CHECK(r.exit_code == 0);

    const std::string report = slurp(out / "report.csv");
    std::size_t lines = 0;
    for (char c : report) lines += c == '\n';
    CHECK(lines == 5); // header + 2 tiers x 2 replicates

    const nlohmann::json summary = load_json_file(out / "summary.json");
    CHECK(summary.at("failure_count").get<std::size_t>() == 0);
    CHECK(summary.at("hard_checks").at("determinism").get<bool>());

    const CliResult rerun = run_cli(
        "study --config " + cfg.string() + " --out " + out.string() + " --force --jobs 3",
        dir);
    CHECK(rerun.exit_code == 0);
    CHECK(slurp(out / "report.csv") == report);
}
