#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
namespace qf = quantfolio;
using nlohmann::json;

namespace {

const fs::path kSource = QUANTFOLIO_SOURCE_DIR;
const fs::path kSamplePrices = kSource / "data" / "sample_prices.csv";

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() /
                ("quantfolio_cli_" + std::string(info->test_suite_name()) + "_" + info->name() + "_" +
                 std::to_string(++counter));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "quantfolio");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    RunResult r;
    r.code = qf::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

RunResult run_command(const std::string& command, const fs::path& config, const fs::path& out,
                      std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {command, "--config", config.string(), "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return invoke(args);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const TempDir& dir, const json& config, const std::string& name = "config.json") {
    const auto path = dir / name;
    write_text(path, config.dump(2));
    return path;
}

json capped_config() {
    return json{{"data", {{"prices", kSamplePrices.string()}, {"test_fraction", 0.3}}},
                {"model",
                 {{"kind", "mean_risk"},
                  {"name", "min_variance_capped"},
                  {"objective", "minimize_risk"},
                  {"risk_measure", "variance"},
                  {"l2_coef", 0.01},
                  {"constraints", {{"caps", {{"AAPL", 0.2}}}}}}},
                {"seed", 42}};
}

/// Synthetic price file with `rows` returns (rows + 1 prices).
fs::path write_synthetic_prices(const TempDir& dir, Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    const auto r = qf::testing::synthetic_returns(rows, cols, seed);
    std::ostringstream csv;
    csv << "date";
    for (const auto& a : r.assets) csv << ',' << a;
    csv << '\n';
    qf::Vector level = qf::Vector::Constant(cols, 100.0);
    qf::Date d{2010, 1, 4};
    auto emit = [&](const qf::Date& date) {
        csv << date.to_string();
        char buf[40];
        for (Eigen::Index j = 0; j < cols; ++j) {
            std::snprintf(buf, sizeof buf, ",%.10f", level[j]);
            csv << buf;
        }
        csv << '\n';
    };
    emit(d);
    for (Eigen::Index t = 0; t < rows; ++t) {
        level = level.cwiseProduct((r.values.row(t).transpose().array() + 1.0).matrix());
        d.day += 1;
        if (d.day > 28) {
            d.day = 1;
            if (++d.month > 12) {
                d.month = 1;
                ++d.year;
            }
        }
        emit(d);
    }
    const auto path = dir / "prices.csv";
    write_text(path, csv.str());
    return path;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

void expect_self_contained_svg(const std::string& svg) {
    boost::property_tree::ptree tree;
    std::istringstream in(svg);
    ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree)) << "SVG is not well-formed XML";
    EXPECT_EQ(tree.count("svg"), 1u);
    for (const char* forbidden : {"href", "url(", "<image", "<script", "@import", "<use"}) {
        EXPECT_EQ(svg.find(forbidden), std::string::npos) << forbidden;
    }
    // the namespace declaration is the only URI in the file
    std::size_t count = 0;
    for (auto pos = svg.find("http"); pos != std::string::npos; pos = svg.find("http", pos + 1)) ++count;
    EXPECT_EQ(count, 1u);
}

}  // namespace

TEST(CliOptimize, CappedMinimumVariance) {
    TempDir dir;
    const auto result = run_command("optimize", write_config(dir, capped_config()), dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    const auto weights = json::parse(read_text(dir / "out" / "weights.json"));
    EXPECT_LE(weights.at("AAPL").get<double>(), 0.2 + 1e-6);
    double total = 0.0;
    for (const auto& [asset, w] : weights.items()) {
        EXPECT_GE(w.get<double>(), -1e-9) << asset;
        total += w.get<double>();
    }
    EXPECT_NEAR(total, 1.0, 1e-8);
    const auto summary = json::parse(read_text(dir / "out" / "summary.json"));
    EXPECT_TRUE(summary.contains("train"));
    EXPECT_TRUE(summary.contains("test"));
    EXPECT_TRUE(fs::exists(dir / "out" / "series_train.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "series_test.csv"));
}

TEST(CliOptimize, BundledConfigRuns) {
    TempDir dir;
    const auto result = run_command("optimize", kSource / "configs" / "capped_min_variance.json", dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    EXPECT_LE(json::parse(read_text(dir / "out" / "weights.json")).at("AAPL").get<double>(), 0.2 + 1e-6);
}

TEST(CliOptimize, ViewPicksAreASynonymForWeights) {
    TempDir dir;
    auto config = json::parse(read_text(kSource / "configs" / "black_litterman.json"));
    config["data"]["prices"] = kSamplePrices.string();
    const auto with_weights = run_command("optimize", write_config(dir, config), dir / "a");
    ASSERT_EQ(with_weights.code, 0) << with_weights.err;
    for (auto& view : config["model"]["prior"]["views"]) {
        view["picks"] = view["weights"];
        view.erase("weights");
    }
    const auto with_picks = run_command("optimize", write_config(dir, config), dir / "b");
    ASSERT_EQ(with_picks.code, 0) << with_picks.err;
    EXPECT_EQ(read_text(dir / "a" / "weights.json"), read_text(dir / "b" / "weights.json"));

    config["model"]["prior"]["views"][0]["weights"] = config["model"]["prior"]["views"][0]["picks"];
    EXPECT_EQ(run_command("optimize", write_config(dir, config), dir / "c").code, 2);
}

TEST(CliOptimize, UnknownKeyIsConfigError) {
    TempDir dir;
    auto config = capped_config();
    config["model"]["risk_measur"] = "cvar";
    const auto result = run_command("optimize", write_config(dir, config), dir / "out");
    EXPECT_EQ(result.code, 2);
    EXPECT_NE(result.err.find("risk_measur"), std::string::npos) << result.err;
    EXPECT_FALSE(fs::exists(dir / "out"));

    auto top = capped_config();
    top["extra"] = true;
    EXPECT_EQ(run_command("optimize", write_config(dir, top), dir / "out").code, 2);
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliOptimize, InfeasibleMinReturnIsSolverError) {
    TempDir dir;
    auto config = capped_config();
    config["model"]["constraints"]["min_return"] = 0.5;
    const auto result = run_command("optimize", write_config(dir, config), dir / "out");
    EXPECT_EQ(result.code, 4);
    EXPECT_NE(result.err.find("min_return"), std::string::npos) << result.err;
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliOptimize, MissingDataFileIsDataError) {
    TempDir dir;
    auto config = capped_config();
    config["data"]["prices"] = (dir / "missing.csv").string();
    EXPECT_EQ(run_command("optimize", write_config(dir, config), dir / "out").code, 3);
}

TEST(CliOptimize, UsageErrors) {
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"optimize"}).code, 2);
    EXPECT_EQ(invoke({"rebalance", "--config", "x", "--out", "y"}).code, 2);
    TempDir dir;
    write_text(dir / "bad.json", "{ not json");
    EXPECT_EQ(run_command("optimize", dir / "bad.json", dir / "out").code, 2);
}

TEST(CliReport, RoundTripIsByteIdentical) {
    TempDir dir;
    ASSERT_EQ(run_command("optimize", write_config(dir, capped_config()), dir / "opt").code, 0);
    const json report = {{"report",
                          {{"inputs",
                            {{{"name", "train"}, {"series", (dir / "opt" / "series_train.csv").string()}},
                             {{"name", "test"}, {"series", (dir / "opt" / "series_test.csv").string()}}}}}}};
    const auto result = run_command("report", write_config(dir, report, "report.json"), dir / "rep");
    ASSERT_EQ(result.code, 0) << result.err;
    EXPECT_EQ(read_text(dir / "rep" / "summary.json"), read_text(dir / "opt" / "summary.json"));
}

TEST(CliReport, NanSeriesIsDataError) {
    TempDir dir;
    ASSERT_EQ(run_command("optimize", write_config(dir, capped_config()), dir / "opt").code, 0);
    auto lines = lines_of(read_text(dir / "opt" / "series_test.csv"));
    lines[3] = lines[3].substr(0, lines[3].find(',')) + ",nan";
    std::string tampered;
    for (const auto& l : lines) tampered += l + "\n";
    write_text(dir / "tampered.csv", tampered);
    const json report = {{"report", {{"inputs", {{{"name", "test"}, {"series", (dir / "tampered.csv").string()}}}}}}};
    const auto result = run_command("report", write_config(dir, report, "report.json"), dir / "rep");
    EXPECT_EQ(result.code, 3) << result.err;
    EXPECT_FALSE(fs::exists(dir / "rep"));
}

TEST(CliReport, EmptyInputListIsConfigError) {
    TempDir dir;
    const json report = {{"report", {{"inputs", json::array()}}}};
    EXPECT_EQ(run_command("report", write_config(dir, report), dir / "rep").code, 2);
    EXPECT_EQ(run_command("report", write_config(dir, json::object(), "empty.json"), dir / "rep").code, 2);
    EXPECT_FALSE(fs::exists(dir / "rep"));
}

TEST(CliFrontier, HundredPointsWithValidSvg) {
    TempDir dir;
    const auto result = run_command("frontier", kSource / "configs" / "frontier.json", dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    const auto rows = lines_of(read_text(dir / "out" / "frontier.csv"));
    ASSERT_GE(rows.size(), 2u);
    EXPECT_LE(rows.size() - 1, 100u);
    const auto header = split_csv(rows[0]);
    EXPECT_EQ(header[0], "target_return");
    const auto aapl = std::find(header.begin(), header.end(), "w_AAPL") - header.begin();
    ASSERT_LT(static_cast<std::size_t>(aapl), header.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LE(std::stod(split_csv(rows[i])[static_cast<std::size_t>(aapl)]), 0.2 + 1e-6);
    }
    expect_self_contained_svg(read_text(dir / "out" / "frontier.svg"));
}

TEST(CliFrontier, SizeOneIsMinimumRiskPortfolio) {
    TempDir dir;
    json frontier = {{"data", {{"prices", kSamplePrices.string()}, {"test_fraction", 0.3}}},
                     {"model", {{"kind", "mean_risk"}, {"frontier_size", 1}}}};
    ASSERT_EQ(run_command("frontier", write_config(dir, frontier), dir / "f").code, 0);
    json optimize = frontier;
    optimize["model"].erase("frontier_size");
    ASSERT_EQ(run_command("optimize", write_config(dir, optimize, "opt.json"), dir / "o").code, 0);
    const auto rows = lines_of(read_text(dir / "f" / "frontier.csv"));
    ASSERT_EQ(rows.size(), 2u);
    const auto header = split_csv(rows[0]);
    const auto values = split_csv(rows[1]);
    const auto weights = json::parse(read_text(dir / "o" / "weights.json"));
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i].rfind("w_", 0) != 0) continue;
        EXPECT_NEAR(std::stod(values[i]), weights.at(header[i].substr(2)).get<double>(), 1e-9) << header[i];
    }
}

TEST(CliFrontier, RejectsNonMeanRiskModel) {
    TempDir dir;
    json config = {{"data", {{"prices", kSamplePrices.string()}}}, {"model", {{"kind", "hrp"}}}};
    EXPECT_EQ(run_command("frontier", write_config(dir, config), dir / "f").code, 2);
}

TEST(CliBacktest, WalkForwardLength) {
    TempDir dir;
    const auto prices = write_synthetic_prices(dir, 372, 4, 5);
    json config = {{"data", {{"prices", prices.string()}}},
                   {"model", {{"kind", "equal_weighted"}}},
                   {"cv", {{"kind", "walk_forward"}, {"train_size", 252}, {"test_size", 60}}}};
    const auto result = run_command("backtest", write_config(dir, config), dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    const auto splits = json::parse(read_text(dir / "out" / "splits.json"));
    ASSERT_EQ(splits["plan"]["splits"].size(), 2u);
    ASSERT_EQ(splits["portfolios"].size(), 1u);
    Eigen::Index periods = 0;
    for (const auto& seg : splits["portfolios"][0]["segments"]) {
        periods += seg["end"].get<Eigen::Index>() - seg["begin"].get<Eigen::Index>();
    }
    EXPECT_EQ(periods, 120);
    EXPECT_EQ(lines_of(read_text(dir / "out" / "population.csv")).size(), 2u);
    expect_self_contained_svg(read_text(dir / "out" / "cumulative.svg"));
}

TEST(CliBacktest, StackingSmokeRun) {
    TempDir dir;
    const auto result = run_command("backtest", kSource / "configs" / "stacking_walk_forward.json", dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    const auto population = json::parse(read_text(dir / "out" / "population.json"));
    ASSERT_EQ(population.size(), 2u);
    EXPECT_EQ(population[0]["name"], "stacking");
    EXPECT_EQ(population[1]["name"], "benchmark");
    EXPECT_EQ(lines_of(read_text(dir / "out" / "population.csv")).size(), 3u);
}

TEST(CliBacktest, CpcvPathPortfolios) {
    TempDir dir;
    const auto result = run_command("backtest", kSource / "configs" / "cpcv_equal_weight.json", dir / "out");
    ASSERT_EQ(result.code, 0) << result.err;
    const auto population = json::parse(read_text(dir / "out" / "population.json"));
    std::size_t hrp_paths = 0;
    for (const auto& member : population) hrp_paths += member["name"].get<std::string>().rfind("hrp_path", 0) == 0;
    EXPECT_EQ(hrp_paths, 3u);
    EXPECT_EQ(population.size(), 6u);
}

TEST(CliBacktest, OtherBundledConfigsRun) {
    for (const char* name : {"nco_factor.json", "black_litterman.json"}) {
        TempDir dir;
        const auto config = json::parse(read_text(kSource / "configs" / name));
        const std::string command = config.contains("cv") ? "backtest" : "optimize";
        const auto result = run_command(command, kSource / "configs" / name, dir / "out");
        EXPECT_EQ(result.code, 0) << name << ": " << result.err;
    }
}

TEST(CliBacktest, DuplicateModelNames) {
    TempDir dir;
    json config = {{"data", {{"prices", kSamplePrices.string()}}},
                   {"model", {{"kind", "equal_weighted"}}},
                   {"benchmarks", {{{"kind", "equal_weighted"}}}},
                   {"cv", {{"kind", "walk_forward"}}}};
    EXPECT_EQ(run_command("backtest", write_config(dir, config), dir / "out").code, 2);
}

TEST(CliBacktest, DeterministicAcrossThreads) {
    TempDir dir;
    const auto config = kSource / "configs" / "cpcv_equal_weight.json";
    ASSERT_EQ(run_command("backtest", config, dir / "a", {"--threads", "1"}).code, 0);
    ASSERT_EQ(run_command("backtest", config, dir / "b", {"--threads", "3"}).code, 0);
    for (const char* file : {"population.json", "population.csv", "splits.json", "cumulative.svg"}) {
        EXPECT_EQ(read_text(dir / "a" / file), read_text(dir / "b" / file)) << file;
    }
}
