#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "arh/study.hpp"

namespace arh {

/// Scientific notation with 17 significant digits; round-trips doubles
/// exactly and is locale independent.
std::string fmt_sci(double v);

/// Parses a JSON file; parse failures surface as ConfigError with the
/// file name and line number.
nlohmann::json load_json_file(const std::filesystem::path& path);

/// FNV-1a of the file bytes, for provenance records.
std::uint64_t fnv1a_file(const std::filesystem::path& path);

/// Throws ConfigError when the target exists and force is unset; creates
/// parent directories otherwise.
void ensure_writable(const std::filesystem::path& path, bool force);

void write_text_file(const std::filesystem::path& path, const std::string& content,
                     bool force);

// --- functional data ---------------------------------------------------
// Sample and function files share one layout: a header "m,p_0,...,p_{m-1}"
// naming the grid, then one row of m values per observation.

void write_sample_csv(const std::filesystem::path& path, const Sample& sample,
                      bool force);
Sample read_sample_csv(const std::filesystem::path& path);

/// Reads the trailing row of a sample/function CSV as a single function.
GridFunction read_last_function_csv(const std::filesystem::path& path);

void write_function_csv(const std::filesystem::path& path, const GridFunction& f,
                        bool force);

// --- operators ----------------------------------------------------------
// First line m, then an m x m kernel, full precision.

void write_operator_csv(const std::filesystem::path& path, const LinOperator& op,
                        bool force);
LinOperator read_operator_csv(const std::filesystem::path& path);
LinOperator read_operator_csv(const std::filesystem::path& path, const GridPtr& grid);

// --- estimates ----------------------------------------------------------

void write_estimate(const std::filesystem::path& json_path,
                    const std::filesystem::path& kernel_path,
                    const RhoEstimate& estimate, bool force);

/// Reload of a persisted estimate; eigenvectors are not persisted, so the
/// result supports operator-route prediction only.
RhoEstimate read_estimate(const std::filesystem::path& json_path);

// --- study reports -------------------------------------------------------

/// Column order is fixed and documented in the README; reruns with the same
/// config are byte-identical.
void write_study_csv(const std::filesystem::path& path, const StudyReport& report,
                     bool force);

/// Per-tier medians, trend statistics, hard-check flags, the inverse-gap
/// probe, and the remainder-bound trend.
nlohmann::json study_summary(const StudyReport& report, const GroundTruth& truth);

// --- configuration -------------------------------------------------------

/// Model from JSON: either {"preset": "diagonal"|"nondiagonal", "m", ...} or
/// explicit {"rho_csv", "innovation_cov_csv"} kernels on the uniform grid.
/// Relative paths resolve against base_dir.
Arh1Spec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

EstimatorConfig estimator_from_json(const nlohmann::json& j);

StudyConfig study_config_from_json(const nlohmann::json& j,
                                   const std::filesystem::path& base_dir);

nlohmann::json provenance_json(const std::string& command,
                               const std::filesystem::path& config_path,
                               std::uint64_t seed);

} // namespace arh
