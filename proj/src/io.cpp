#include "arh/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace arh {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_of_byte(const std::string& text, std::size_t byte) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') ++line;
    }
    return line;
}

std::vector<double> split_doubles(const std::string& line, const fs::path& path,
                                  std::size_t lineno) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t comma = line.find(',', pos);
        const std::string tok =
            line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": cannot parse '" + tok + "' as a number");
        }
        out.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
    const std::string text = read_file(path);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        if (nl > pos) lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

GridPtr grid_from_header(const std::vector<double>& header, const fs::path& path) {
    if (header.size() < 2) {
        throw ConfigError(path.string() + ":1: header must be m,<points...>");
    }
    const auto m = static_cast<std::size_t>(header[0]);
    if (m == 0 || header.size() != m + 1) {
        throw ConfigError(path.string() + ":1: header names " + std::to_string(m) +
                          " points but carries " + std::to_string(header.size() - 1));
    }
    Eigen::VectorXd pts(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) pts[static_cast<Eigen::Index>(i)] = header[i + 1];
    Eigen::VectorXd wts = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m),
                                                    1.0 / static_cast<double>(m));
    return std::make_shared<const Grid>(std::move(pts), std::move(wts));
}

std::string grid_header(const Grid& grid) {
    std::string line = std::to_string(grid.size());
    for (Eigen::Index i = 0; i < grid.points().size(); ++i) {
        line += ',';
        line += fmt_sci(grid.points()[i]);
    }
    return line;
}

std::string row_csv(const Eigen::VectorXd& v) {
    std::string line;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i > 0) line += ',';
        line += fmt_sci(v[i]);
    }
    return line;
}

const json& require_field(const json& j, const std::string& key,
                          const std::string& context) {
    if (!j.contains(key)) {
        throw ConfigError("missing field '" + key + "' in " + context);
    }
    return j.at(key);
}

fs::path resolve(const std::string& p, const fs::path& base_dir) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

} // namespace

std::string fmt_sci(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", v);
    return buf;
}

json load_json_file(const fs::path& path) {
    const std::string text = read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ":" + std::to_string(line_of_byte(text, e.byte)) +
                          ": " + e.what());
    }
}

std::uint64_t fnv1a_file(const fs::path& path) {
    const std::string text = read_file(path);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

void ensure_writable(const fs::path& path, bool force) {
    if (fs::exists(path) && !force) {
        throw ConfigError("refusing to overwrite existing '" + path.string() +
                          "' without --force");
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text_file(const fs::path& path, const std::string& content, bool force) {
    ensure_writable(path, force);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
}

void write_sample_csv(const fs::path& path, const Sample& sample, bool force) {
    std::string text = grid_header(*sample.grid());
    text += '\n';
    for (std::size_t i = 0; i < sample.size(); ++i) {
        text += row_csv(sample.observations().row(static_cast<Eigen::Index>(i)).transpose());
        text += '\n';
    }
    write_text_file(path, text, force);
}

Sample read_sample_csv(const fs::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 3) {
        throw ConfigError(path.string() + ": expected a header plus at least two rows");
    }
    const GridPtr grid = grid_from_header(split_doubles(lines[0], path, 1), path);
    const auto m = static_cast<Eigen::Index>(grid->size());
    Eigen::MatrixXd obs(static_cast<Eigen::Index>(lines.size() - 1), m);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const std::vector<double> vals = split_doubles(lines[r], path, r + 1);
        if (static_cast<Eigen::Index>(vals.size()) != m) {
            throw ConfigError(path.string() + ":" + std::to_string(r + 1) + ": expected " +
                              std::to_string(m) + " values, got " +
                              std::to_string(vals.size()));
        }
        for (Eigen::Index c = 0; c < m; ++c) obs(static_cast<Eigen::Index>(r - 1), c) = vals[static_cast<std::size_t>(c)];
    }
    return Sample(grid, std::move(obs));
}

GridFunction read_last_function_csv(const fs::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.size() < 2) {
        throw ConfigError(path.string() + ": expected a header plus at least one row");
    }
    const GridPtr grid = grid_from_header(split_doubles(lines[0], path, 1), path);
    const std::vector<double> vals =
        split_doubles(lines.back(), path, lines.size());
    if (vals.size() != grid->size()) {
        throw ConfigError(path.string() + ": last row length does not match the header grid");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = vals[i];
    return GridFunction(grid, std::move(v));
}

void write_function_csv(const fs::path& path, const GridFunction& f, bool force) {
    std::string text = grid_header(*f.grid());
    text += '\n';
    text += row_csv(f.values());
    text += '\n';
    write_text_file(path, text, force);
}

void write_operator_csv(const fs::path& path, const LinOperator& op, bool force) {
    std::string text = std::to_string(op.size());
    text += '\n';
    for (Eigen::Index i = 0; i < op.kernel().rows(); ++i) {
        text += row_csv(op.kernel().row(i).transpose());
        text += '\n';
    }
    write_text_file(path, text, force);
}

LinOperator read_operator_csv(const fs::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw ConfigError(path.string() + ": empty operator file");
    const auto m = static_cast<std::size_t>(std::strtoul(lines[0].c_str(), nullptr, 10));
    if (m == 0 || lines.size() != m + 1) {
        throw ConfigError(path.string() + ": expected " + std::to_string(m) +
                          " kernel rows after the header");
    }
    return read_operator_csv(path, Grid::uniform(m));
}

LinOperator read_operator_csv(const fs::path& path, const GridPtr& grid) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) throw ConfigError(path.string() + ": empty operator file");
    const auto m = static_cast<std::size_t>(std::strtoul(lines[0].c_str(), nullptr, 10));
    if (m != grid->size()) {
        throw ConfigError(path.string() + ": operator size " + std::to_string(m) +
                          " does not match grid size " + std::to_string(grid->size()));
    }
    if (lines.size() != m + 1) {
        throw ConfigError(path.string() + ": expected " + std::to_string(m) +
                          " kernel rows after the header");
    }
    Eigen::MatrixXd k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < m; ++r) {
        const std::vector<double> vals = split_doubles(lines[r + 1], path, r + 2);
        if (vals.size() != m) {
            throw ConfigError(path.string() + ":" + std::to_string(r + 2) +
                              ": expected " + std::to_string(m) + " entries");
        }
        for (std::size_t c = 0; c < m; ++c) {
            k(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = vals[c];
        }
    }
    return LinOperator(grid, std::move(k));
}

void write_estimate(const fs::path& json_path, const fs::path& kernel_path,
                    const RhoEstimate& estimate, bool force) {
    write_operator_csv(kernel_path, estimate.op, force);
    json j;
    j["k_n"] = estimate.k_n;
    j["coefficients"] = std::vector<double>(
        estimate.coefficients.data(),
        estimate.coefficients.data() + estimate.coefficients.size());
    j["eigen_floor"] = estimate.eigen_floor_abs;
    j["kernel_csv"] = kernel_path.filename().string();
    write_text_file(json_path, j.dump(2) + "\n", force);
}

RhoEstimate read_estimate(const fs::path& json_path) {
    const json j = load_json_file(json_path);
    const auto k_n = require_field(j, "k_n", json_path.string()).get<std::size_t>();
    const auto coeffs =
        require_field(j, "coefficients", json_path.string()).get<std::vector<double>>();
    Eigen::VectorXd coefficients(static_cast<Eigen::Index>(coeffs.size()));
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        coefficients[static_cast<Eigen::Index>(i)] = coeffs[i];
    }
    const double floor = require_field(j, "eigen_floor", json_path.string()).get<double>();
    const fs::path kernel =
        resolve(require_field(j, "kernel_csv", json_path.string()).get<std::string>(),
                json_path.parent_path());
    return RhoEstimate{k_n, std::move(coefficients), {}, read_operator_csv(kernel), floor};
}

void write_study_csv(const fs::path& path, const StudyReport& report, bool force) {
    std::string text =
        "n,replicate,seed,failed,k_n,lambda_kn,scale,"
        "err_cov_hs,err_cross_hs,err_eig_sup,err_evec_sup,err_diag_sup,"
        "err_rho_tr,err_rho_hs,err_rho_op,err_pred,"
        "scaled_err_cov_hs,scaled_err_cross_hs,scaled_err_eig_sup,"
        "scaled_err_evec_sup,scaled_err_diag_sup,scaled_err_rho_tr,"
        "scaled_err_rho_hs,scaled_err_rho_op,scaled_err_pred,"
        "x_last_norm,innovation_norm,remark_lhs,remark_rhs,err_rho_tr_maxmin\n";
    for (const StudyRow& r : report.rows) {
        text += std::to_string(r.n);
        text += ',' + std::to_string(r.replicate);
        text += ',' + std::to_string(r.seed);
        text += ',' + std::to_string(r.failed ? 1 : 0);
        text += ',' + std::to_string(r.k_n);
        for (double v : {r.lambda_kn, r.scale, r.err_cov_hs, r.err_cross_hs,
                         r.err_eig_sup, r.err_evec_sup, r.err_diag_sup, r.err_rho_tr,
                         r.err_rho_hs, r.err_rho_op, r.err_pred, r.scaled_err_cov_hs,
                         r.scaled_err_cross_hs, r.scaled_err_eig_sup,
                         r.scaled_err_evec_sup, r.scaled_err_diag_sup,
                         r.scaled_err_rho_tr, r.scaled_err_rho_hs, r.scaled_err_rho_op,
                         r.scaled_err_pred, r.x_last_norm, r.innovation_norm,
                         r.remark_lhs, r.remark_rhs, r.err_rho_tr_maxmin}) {
            text += ',';
            text += fmt_sci(v);
        }
        text += '\n';
    }
    write_text_file(path, text, force);
}

json study_summary(const StudyReport& report, const GroundTruth& truth) {
    json j;
    j["sample_sizes"] = report.sample_sizes;
    j["replicates"] = report.replicates;
    j["master_seed"] = report.master_seed;
    j["beta"] = report.beta;
    j["regime"] = report.regime;
    j["failure_count"] = report.failure_count;
    j["failure_fraction"] =
        static_cast<double>(report.failure_count) /
        static_cast<double>(report.rows.empty() ? 1 : report.rows.size());
    j["hard_checks"] = {{"norm_ordering", report.norm_ordering_ok},
                        {"eig_le_cov", report.eig_le_cov_ok},
                        {"determinism", report.determinism_ok}};

    json metrics = json::object();
    auto add_metric = [&](const std::string& name) {
        json entry;
        try {
            entry["medians"] = tier_medians(report, name);
        } catch (const InsufficientDataError&) {
            entry["medians"] = nullptr;
        }
        try {
            entry["trend"] = trend_statistic(report, name);
        } catch (const InsufficientDataError&) {
            entry["trend"] = nullptr;
        }
        metrics[name] = entry;
    };
    for (const std::string& name : metric_names()) {
        add_metric(name);
        add_metric("scaled_" + name);
    }
    j["metrics"] = metrics;

    add_metric("err_rho_tr_maxmin");
    try {
        j["k_n_medians"] = tier_medians(report, "k_n");
    } catch (const InsufficientDataError&) {
        j["k_n_medians"] = nullptr;
    }

    try {
        json probe = json::array();
        for (const LambdaProbeRow& p : lambda_condition_probe(report, truth)) {
            probe.push_back({{"n", p.n},
                             {"k_n", p.k_n},
                             {"lambda_kn", p.lambda_kn},
                             {"denom", p.denom},
                             {"ratio", p.ratio}});
        }
        j["lambda_probe"] = probe;
    } catch (const Error& e) {
        j["lambda_probe"] = {{"error", e.what()}};
    }

    json remark;
    std::size_t skipped = 0;
    remark["rhs"] = remark_rhs_value(truth, &skipped);
    remark["rhs_skipped_terms"] = skipped;
    try {
        remark["gap_medians"] = tier_medians(report, "remark_gap");
        const double trend = trend_statistic(report, "remark_gap");
        remark["gap_trend"] = trend;
        remark["gap_trend_nonpositive"] = trend <= 0.0;
    } catch (const InsufficientDataError&) {
        remark["gap_medians"] = nullptr;
        remark["gap_trend"] = nullptr;
    }
    j["remark"] = remark;
    return j;
}

Arh1Spec spec_from_json(const json& j, const fs::path& base_dir) {
    const std::string context = "spec";
    InnovationMode mode = InnovationMode::gaussian;
    double bound = 4.0;
    if (j.contains("innovation")) {
        const json& inn = j.at("innovation");
        const std::string mode_name =
            require_field(inn, "mode", "spec.innovation").get<std::string>();
        if (mode_name == "gaussian") {
            mode = InnovationMode::gaussian;
        } else if (mode_name == "truncated_gaussian") {
            mode = InnovationMode::truncated_gaussian;
        } else {
            throw ConfigError("spec.innovation.mode must be gaussian or truncated_gaussian");
        }
        if (inn.contains("bound")) bound = inn.at("bound").get<double>();
    }
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});

    if (j.contains("preset")) {
        const auto m = j.value("m", std::size_t{64});
        const std::string name = j.at("preset").get<std::string>();
        if (name == "diagonal") {
            return diagonal_preset(m, seed, mode, bound, j.value("c_rho", 0.8),
                                   j.value("c_sigma", 1.0));
        }
        if (name == "nondiagonal") {
            return nondiagonal_preset(m, seed, mode, bound, j.value("angle", 0.05),
                                      j.value("target_norm", 0.8),
                                      j.value("c_sigma", 1.0));
        }
        throw ConfigError("spec.preset must be diagonal or nondiagonal");
    }
    if (j.contains("rho_csv")) {
        LinOperator rho =
            read_operator_csv(resolve(j.at("rho_csv").get<std::string>(), base_dir));
        LinOperator cov = read_operator_csv(
            resolve(require_field(j, "innovation_cov_csv", context).get<std::string>(),
                    base_dir),
            rho.grid());
        Arh1Spec spec{std::move(rho), std::move(cov), mode, bound, seed};
        return spec;
    }
    throw ConfigError("spec must name a preset or explicit kernel CSV paths");
}

EstimatorConfig estimator_from_json(const json& j) {
    EstimatorConfig cfg;
    cfg.beta = j.value("beta", cfg.beta);
    cfg.c_trunc = j.value("c_trunc", cfg.c_trunc);
    cfg.eigen_floor = j.value("eigen_floor", cfg.eigen_floor);
    if (j.contains("k_override") && !j.at("k_override").is_null()) {
        cfg.k_override = j.at("k_override").get<std::size_t>();
    }
    if (j.contains("gamma") && !j.at("gamma").is_null()) {
        cfg.gamma = j.at("gamma").get<double>();
    }
    cfg.validate();
    return cfg;
}

StudyConfig study_config_from_json(const json& j, const fs::path& base_dir) {
    StudyConfig cfg{spec_from_json(require_field(j, "spec", "study config"), base_dir),
                    {},
                    1,
                    {},
                    0,
                    {},
                    std::nullopt,
                    0.05,
                    1};
    cfg.sample_sizes =
        require_field(j, "sample_sizes", "study config").get<std::vector<std::size_t>>();
    cfg.replicates = require_field(j, "replicates", "study config").get<std::size_t>();
    if (j.contains("estimator")) cfg.est = estimator_from_json(j.at("estimator"));
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("metrics")) {
        cfg.metrics = j.at("metrics").get<std::vector<std::string>>();
    }
    if (j.contains("burn_in") && !j.at("burn_in").is_null()) {
        cfg.burn_in = j.at("burn_in").get<std::size_t>();
    }
    cfg.failure_budget = j.value("failure_budget", 0.05);
    cfg.validate();
    return cfg;
}

json provenance_json(const std::string& command, const fs::path& config_path,
                     std::uint64_t seed) {
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file(config_path)));
    json j;
    j["tool"] = "arh1";
    j["version"] = "0.1.0";
    j["command"] = command;
    j["config"] = config_path.filename().string();
    j["config_fnv1a"] = hash;
    j["seed"] = seed;
    return j;
}

} // namespace arh
