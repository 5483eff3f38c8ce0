#include "commands.hpp"

#include <cstdlib>
#include <exception>
#include <set>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "output.hpp"
#include "quantfolio/parallel.hpp"
#include "quantfolio/portfolio.hpp"

namespace quantfolio::cli {

namespace {

struct Dataset {
    ReturnsMatrix returns;
    std::optional<ReturnsMatrix> factors;
};

Dataset load_dataset(const RunConfig& config) {
    if (!config.data) throw Error(ErrorCode::InvalidConfig, "config: missing 'data'");
    const DataConfig& d = *config.data;
    PriceFrame prices = load_prices_file(d.prices.string());
    Dataset out;
    if (d.factors) {
        auto [assets, factors] = align(prices, load_prices_file(d.factors->string()));
        out.returns = prices_to_returns(assets, d.returns);
        out.factors = prices_to_returns(factors, d.returns);
    } else {
        out.returns = prices_to_returns(prices, d.returns);
    }
    return out;
}

const Json& require_model(const RunConfig& config) {
    if (!config.model) throw Error(ErrorCode::InvalidConfig, "config: missing 'model'");
    return *config.model;
}

FitContext make_context(const RunConfig& config, const Options& options, const ReturnsMatrix* factors) {
    FitContext ctx;
    ctx.threads = clamp_threads(options.threads);
    ctx.seed = options.seed.value_or(config.seed);
    ctx.factors = factors;
    return ctx;
}

void log_warnings(std::ostream& log, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) log << "warning: " << w << '\n';
}

std::string summary_body(const Summary& s) {
    std::string text = summary_json(s);
    text.pop_back();  // trailing newline
    return text;
}

std::string named_summaries(const std::vector<std::pair<std::string, Summary>>& items) {
    std::string out = "{";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += ",";
        out += json_string(items[i].first) + ":" + summary_body(items[i].second);
    }
    return out + "}\n";
}

struct TrainTest {
    ReturnsMatrix train;
    ReturnsMatrix test;
    std::optional<ReturnsMatrix> factors_train;
    std::optional<ReturnsMatrix> factors_test;
};

TrainTest split_dataset(const Dataset& data, double test_fraction) {
    TrainTest out;
    std::tie(out.train, out.test) = time_split(data.returns, test_fraction);
    if (data.factors) {
        auto [ft, fs] = time_split(*data.factors, test_fraction);
        out.factors_train = std::move(ft);
        out.factors_test = std::move(fs);
    }
    return out;
}

std::vector<double> cumulative(const Vector& returns) {
    std::vector<double> out{0.0};
    double wealth = 1.0;
    for (Eigen::Index t = 0; t < returns.size(); ++t) {
        wealth *= 1.0 + returns[t];
        out.push_back(wealth - 1.0);
    }
    return out;
}

}  // namespace

Outputs cmd_optimize(const RunConfig& config, const Options& options, std::ostream& log) {
    const Json& model = require_model(config);
    const Dataset data = load_dataset(config);
    const TrainTest split = split_dataset(data, config.data->test_fraction);
    const auto ctx = make_context(config, options, split.factors_train ? &*split.factors_train : nullptr);

    const Weights w = build_allocator(model, data.returns.assets)->fit(split.train, ctx);
    log_warnings(log, w.warnings);

    Portfolio train = predict(w, split.train, "train");
    Portfolio test = predict(w, split.test, "test");
    train.periods_per_year = test.periods_per_year = config.data->periods_per_year;

    Outputs out;
    out.emplace_back("weights.json", weights_json(w.assets, w.values) + "\n");
    out.emplace_back("summary.json", named_summaries({{"train", summary(train)}, {"test", summary(test)}}));
    out.emplace_back("series_train.csv", series_csv(train.returns));
    out.emplace_back("series_test.csv", series_csv(test.returns));
    return out;
}

Outputs cmd_frontier(const RunConfig& config, const Options& options, std::ostream& log) {
    const Json& model = require_model(config);
    if (model.value("kind", "") != "mean_risk") {
        throw Error(ErrorCode::InvalidConfig, "frontier needs a mean_risk model");
    }
    const Dataset data = load_dataset(config);
    const TrainTest split = split_dataset(data, config.data->test_fraction);
    const auto ctx = make_context(config, options, split.factors_train ? &*split.factors_train : nullptr);
    const auto& assets = data.returns.assets;

    ProblemSpec spec = build_problem(model, assets);
    spec.prior = estimate_prior(split.train, build_prior_settings(model, assets), ctx);
    const int size = spec.frontier_size.value_or(100);
    const Frontier frontier = efficient_frontier(spec, size, ctx.threads);
    log_warnings(log, frontier.warnings);
    if (frontier.points.empty()) throw Error(ErrorCode::InfeasibleProblem, "every frontier point is infeasible");

    std::vector<Weights> points;
    for (const auto& p : frontier.points) points.push_back(Weights{assets, p.weights, {}});
    const auto rows = frontier_report(points, spec.risk_measure, split.train, split.test);

    std::string csv = "target_return,realized_return_train,risk_train,realized_return_test,risk_test";
    for (const auto& a : assets) csv += ",w_" + a;
    csv += "\n";
    Chart chart{"Efficient frontier: train vs test", spec.risk_measure.name(), "mean return per period", true, {}};
    chart.series = {{"train", {}, {}}, {"test", {}, {}}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv += format_number(frontier.points[i].target_return) + "," + format_number(r.train_return) + "," +
               format_number(r.train_risk) + "," + format_number(r.test_return) + "," + format_number(r.test_risk);
        for (Eigen::Index j = 0; j < frontier.points[i].weights.size(); ++j) {
            csv += "," + format_number(frontier.points[i].weights[j]);
        }
        csv += "\n";
        chart.series[0].x.push_back(r.train_risk);
        chart.series[0].y.push_back(r.train_return);
        chart.series[1].x.push_back(r.test_risk);
        chart.series[1].y.push_back(r.test_return);
    }

    Outputs out;
    out.emplace_back("frontier.csv", csv);
    if (config.outputs.charts) out.emplace_back("frontier.svg", render_svg(chart));
    return out;
}

Outputs cmd_backtest(const RunConfig& config, const Options& options, std::ostream& log) {
    const Json& model = require_model(config);
    if (!config.cv) throw Error(ErrorCode::InvalidConfig, "config: backtest needs a 'cv' section");
    std::vector<const Json*> models{&model};
    for (const auto& b : config.benchmarks) models.push_back(&b);
    std::set<std::string> names;
    for (const Json* m : models) {
        if (!names.insert(model_name(*m)).second) {
            throw Error(ErrorCode::InvalidConfig, "duplicate model name '" + model_name(*m) + "'");
        }
    }

    const Dataset data = load_dataset(config);
    const SplitPlan plan = config.cv->plan(data.returns.rows());
    log_warnings(log, plan.warnings);
    if (plan.empty()) throw Error(ErrorCode::EmptyCv, "the cv configuration yields no splits");
    const auto ctx = make_context(config, options, data.factors ? &*data.factors : nullptr);

    Population population;
    std::string audit = "{\"plan\":" + plan_json(plan) + ",\"portfolios\":[";
    Chart chart{"Out-of-sample cumulative return", "period", "cumulative return", false, {}};
    bool first = true;
    for (const Json* m : models) {
        const auto allocator = build_allocator(*m, data.returns.assets);
        for (auto& p : cross_val_predict(*allocator, data.returns, plan, ctx, model_name(*m))) {
            p.periods_per_year = config.data->periods_per_year;
            audit += std::string(first ? "" : ",") + "{\"name\":" + json_string(p.name) + ",\"segments\":[";
            first = false;
            for (std::size_t s = 0; s < p.segments.size(); ++s) {
                const auto& seg = p.segments[s];
                audit += std::string(s ? "," : "") + "{\"begin\":" + std::to_string(seg.begin) +
                         ",\"end\":" + std::to_string(seg.end) + ",\"first\":" + json_string(seg.first.to_string()) +
                         ",\"last\":" + json_string(seg.last.to_string()) +
                         ",\"weights\":" + weights_json(p.assets, seg.weights) + "}";
            }
            audit += "]}";
            ChartSeries series{p.name, {}, cumulative(p.returns.values)};
            for (std::size_t t = 0; t < series.y.size(); ++t) series.x.push_back(static_cast<double>(t));
            chart.series.push_back(std::move(series));
            population.members.push_back(p.as_portfolio());
        }
    }
    audit += "]}\n";

    const SummaryTable table = population_summary(population);
    Outputs out;
    out.emplace_back("population.json", population_json(table));
    if (config.outputs.csv) out.emplace_back("population.csv", population_csv(table));
    out.emplace_back("splits.json", audit);
    if (config.outputs.charts) out.emplace_back("cumulative.svg", render_svg(chart));
    return out;
}

Outputs cmd_report(const RunConfig& config, const Options&, std::ostream&) {
    if (config.report.empty()) throw Error(ErrorCode::InvalidConfig, "report: no input series listed");
    std::vector<std::pair<std::string, Summary>> items;
    for (const auto& input : config.report) {
        items.emplace_back(input.name, summary(read_series_csv(input.series), config.report_periods_per_year));
    }
    return {{"summary.json", named_summaries(items)}};
}

int exit_code(const Error& error) {
    switch (category(error.code())) {
        case ErrorCategory::Config: return kExitConfig;
        case ErrorCategory::Data: return kExitData;
        case ErrorCategory::Solver: return kExitSolver;
    }
    return kExitUnexpected;
}

namespace {

int resolve_threads(const std::optional<int>& flag) {
    if (flag) {
        if (*flag < 1) throw Error(ErrorCode::InvalidConfig, "--threads must be at least 1");
        return *flag;
    }
    if (const char* env = std::getenv("QUANTFOLIO_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 1024) {
            throw Error(ErrorCode::InvalidConfig, "QUANTFOLIO_THREADS must be a positive integer");
        }
        return static_cast<int>(v);
    }
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Portfolio construction and backtesting from CSV price histories", "quantfolio"};
    app.require_subcommand(1);

    std::string command;
    Options options;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    for (const char* name : {"optimize", "frontier", "backtest", "report"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", options.config, "run configuration (JSON)")->required();
        sub->add_option("--out", options.out, "output directory")->required();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--threads", threads, "worker threads (default: $QUANTFOLIO_THREADS or 1)");
        sub->callback([&command, name] { command = name; });
    }
    app.get_subcommand("optimize")->description("fit one model and write weights and train/test summaries");
    app.get_subcommand("frontier")->description("trace the efficient frontier on train data and evaluate it on test data");
    app.get_subcommand("backtest")->description("cross-validated out-of-sample backtest of a model and its benchmarks");
    app.get_subcommand("report")->description("recompute summaries from stored return series");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitConfig;
    }

    try {
        options.threads = resolve_threads(threads);
        options.seed = seed;
        const RunConfig config = load_config(options.config);
        Outputs files;
        if (command == "optimize") files = cmd_optimize(config, options, err);
        if (command == "frontier") files = cmd_frontier(config, options, err);
        if (command == "backtest") files = cmd_backtest(config, options, err);
        if (command == "report") files = cmd_report(config, options, err);

        std::error_code ec;
        std::filesystem::create_directories(options.out, ec);
        if (ec) throw Error(ErrorCode::InvalidConfig, "cannot create output directory " + options.out.string());
        for (const auto& [name, content] : files) {
            write_file(options.out / name, content);
            out << (options.out / name).string() << '\n';
        }
        return kExitOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUnexpected;
    }
}

}  // namespace quantfolio::cli
