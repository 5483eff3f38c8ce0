/**
 * @file config.hpp
 * @brief Strict JSON run configuration for the quantfolio command line.
 *
 * Every object is checked against its allowed key set; unknown keys and
 * wrongly typed values raise Error(InvalidConfig). Models stay as raw JSON
 * until the asset universe is known, because caps and views refer to asset
 * names.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quantfolio/hierarchical.hpp"
#include "quantfolio/market_data.hpp"
#include "quantfolio/mean_risk.hpp"
#include "quantfolio/model_selection.hpp"

namespace quantfolio::cli {

using Json = nlohmann::json;

struct DataConfig {
    std::filesystem::path prices;
    std::optional<std::filesystem::path> factors;
    ReturnKind returns = ReturnKind::Simple;
    double test_fraction = 0.3;
    int periods_per_year = kDefaultPeriodsPerYear;
};

struct CvSettings {
    SplitPlan::Kind kind = SplitPlan::Kind::WalkForward;
    Eigen::Index train_size = 252;
    Eigen::Index test_size = 60;
    bool expanding = false;
    CpcvConfig cpcv;

    SplitPlan plan(Eigen::Index samples) const;
};

struct OutputSettings {
    bool charts = true;
    bool csv = true;
};

struct ReportInput {
    std::string name;
    std::filesystem::path series;
};

struct RunConfig {
    std::optional<DataConfig> data;
    std::optional<Json> model;
    std::vector<Json> benchmarks;
    std::optional<CvSettings> cv;
    OutputSettings outputs;
    std::uint64_t seed = 0;
    std::vector<ReportInput> report;
    int report_periods_per_year = kDefaultPeriodsPerYear;
};

/// Parses and structurally validates a config; relative paths resolve against the file's directory.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const Json& document, const std::filesystem::path& base_dir);

/// Checks a model description (recursively) without needing data.
void validate_model(const Json& model);

/// Display name of a model: its "name" key, or its kind.
std::string model_name(const Json& model);

/// Builds the allocator for a model over the given asset universe.
AllocatorPtr build_allocator(const Json& model, const std::vector<std::string>& assets);

/// The optimization problem of a mean_risk model (prior left empty).
ProblemSpec build_problem(const Json& model, const std::vector<std::string>& assets);
PriorSettings build_prior_settings(const Json& model, const std::vector<std::string>& assets);

}  // namespace quantfolio::cli
