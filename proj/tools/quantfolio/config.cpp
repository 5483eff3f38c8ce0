#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <string_view>
#include <tuple>

#include "quantfolio/error.hpp"

namespace quantfolio::cli {

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::InvalidConfig, where + ": " + what);
}

void check_object(const Json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) fail(where, "expected an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(where, "unknown key '" + key + "'");
    }
}

const Json* find(const Json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

/// A view's asset loadings; `picks` is accepted as a synonym for `weights`.
const Json* view_weights(const Json& view) {
    const Json* w = find(view, "weights");
    return w ? w : find(view, "picks");
}

double number(const Json& obj, const char* key, const std::string& where, double fallback) {
    const Json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number()) fail(where, std::string("'") + key + "' must be a number");
    return v->get<double>();
}

std::optional<double> optional_number(const Json& obj, const char* key, const std::string& where) {
    if (!find(obj, key)) return std::nullopt;
    return number(obj, key, where, 0.0);
}

long long integer(const Json& obj, const char* key, const std::string& where, long long fallback) {
    const Json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
    return v->get<long long>();
}

bool boolean(const Json& obj, const char* key, const std::string& where, bool fallback) {
    const Json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(where, std::string("'") + key + "' must be true or false");
    return v->get<bool>();
}

std::string text(const Json& obj, const char* key, const std::string& where, const std::string& fallback) {
    const Json* v = find(obj, key);
    if (!v) return fallback;
    if (!v->is_string()) fail(where, std::string("'") + key + "' must be a string");
    return v->get<std::string>();
}

const Json& required(const Json& obj, const char* key, const std::string& where) {
    const Json* v = find(obj, key);
    if (!v) fail(where, std::string("missing '") + key + "'");
    return *v;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

Eigen::Index asset_index(const std::vector<std::string>& assets, const std::string& name, const std::string& where) {
    const auto it = std::find(assets.begin(), assets.end(), name);
    if (it == assets.end()) fail(where, "unknown asset '" + name + "'");
    return it - assets.begin();
}

/// Map of asset name -> number, expanded over the universe.
Vector asset_vector(const Json& map, const std::vector<std::string>& assets, double fallback, const std::string& where) {
    if (!map.is_object()) fail(where, "expected an object of asset -> number");
    if (assets.empty()) fail(where, "asset-specific values are not available in this context");
    Vector out = Vector::Constant(static_cast<Eigen::Index>(assets.size()), fallback);
    for (const auto& [name, value] : map.items()) {
        if (!value.is_number()) fail(where, "value for '" + name + "' must be a number");
        out[asset_index(assets, name, where)] = value.get<double>();
    }
    return out;
}

RiskMeasure measure_of(const Json& obj, const char* key, const std::string& where, const std::string& fallback) {
    const double beta = number(obj, "beta", where, kDefaultBeta);
    try {
        return RiskMeasure::parse(text(obj, key, where, fallback), beta);
    } catch (const Error& e) {
        fail(where, e.detail());
    }
}

const std::vector<std::string_view>& model_kinds() {
    static const std::vector<std::string_view> kinds{"mean_risk", "hrp", "nco", "stacking", "equal_weighted",
                                                     "inverse_volatility"};
    return kinds;
}

void validate_prior(const Json& prior, const std::string& where) {
    check_object(prior, where, {"kind", "mean", "covariance", "halflife", "gerber_c", "denoise", "rmt_passes",
                                "ridge_alpha", "views", "tau"});
    const auto kind = text(prior, "kind", where, "empirical");
    if (kind != "empirical" && kind != "factor_model" && kind != "black_litterman") {
        fail(where, "unknown prior kind '" + kind + "'");
    }
    const auto mean = text(prior, "mean", where, "sample");
    if (mean != "sample" && mean != "exponentially_weighted" && mean != "bayes_stein") {
        fail(where, "unknown mean estimator '" + mean + "'");
    }
    const auto cov = text(prior, "covariance", where, "sample");
    if (cov != "sample" && cov != "exponentially_weighted" && cov != "ledoit_wolf" && cov != "gerber") {
        fail(where, "unknown covariance estimator '" + cov + "'");
    }
    if (number(prior, "halflife", where, 60.0) <= 0.0) fail(where, "halflife must be positive");
    number(prior, "gerber_c", where, 0.5);
    boolean(prior, "denoise", where, false);
    if (integer(prior, "rmt_passes", where, 2) < 1) fail(where, "rmt_passes must be at least 1");
    if (number(prior, "ridge_alpha", where, 0.0) < 0.0) fail(where, "ridge_alpha must be non-negative");
    if (number(prior, "tau", where, 0.05) <= 0.0) fail(where, "tau must be positive");
    if (const Json* views = find(prior, "views")) {
        if (kind != "black_litterman") fail(where, "views are only used by the black_litterman prior");
        if (!views->is_array() || views->empty()) fail(where, "views must be a non-empty array");
        for (const auto& v : *views) {
            check_object(v, where + ".views[]", {"weights", "picks", "value", "variance"});
            const Json* w = view_weights(v);
            if (find(v, "weights") && find(v, "picks")) fail(where + ".views[]", "use either 'weights' or 'picks', not both");
            if (!w || !w->is_object()) fail(where + ".views[]", "missing 'weights' object");
            required(v, "value", where + ".views[]");
            number(v, "value", where + ".views[]", 0.0);
            if (auto var = optional_number(v, "variance", where + ".views[]"); var && *var <= 0.0) {
                fail(where + ".views[]", "view variance must be positive");
            }
        }
    } else if (kind == "black_litterman") {
        fail(where, "the black_litterman prior needs views");
    }
}

void validate_constraints(const Json& c, const std::string& where) {
    check_object(c, where, {"budget", "lower", "upper", "caps", "linear", "min_return", "risk_caps"});
    number(c, "budget", where, 1.0);
    for (const char* key : {"lower", "upper"}) {
        if (const Json* v = find(c, key); v && !v->is_number() && !v->is_object()) {
            fail(where, std::string("'") + key + "' must be a number or an object of asset -> number");
        }
    }
    if (const Json* caps = find(c, "caps"); caps && !caps->is_object()) fail(where, "'caps' must be an object");
    if (const Json* rows = find(c, "linear")) {
        if (!rows->is_array()) fail(where, "'linear' must be an array");
        for (const auto& row : *rows) {
            check_object(row, where + ".linear[]", {"name", "coefficients", "lower"});
            text(row, "name", where + ".linear[]", "");
            if (!find(row, "coefficients") || !row["coefficients"].is_object()) {
                fail(where + ".linear[]", "missing 'coefficients' object");
            }
            number(row, "lower", where + ".linear[]", 0.0);
        }
    }
    optional_number(c, "min_return", where);
    if (const Json* caps = find(c, "risk_caps")) {
        if (!caps->is_array()) fail(where, "'risk_caps' must be an array");
        for (const auto& cap : *caps) {
            check_object(cap, where + ".risk_caps[]", {"measure", "beta", "bound"});
            measure_of(cap, "measure", where + ".risk_caps[]", "");
            required(cap, "bound", where + ".risk_caps[]");
            number(cap, "bound", where + ".risk_caps[]", 0.0);
        }
    }
}

void validate_stacking_cv(const Json& cv, const std::string& where) {
    check_object(cv, where, {"kind", "folds", "purge", "embargo", "train_size", "test_size"});
    const auto kind = text(cv, "kind", where, "kfold");
    if (kind != "kfold" && kind != "walk_forward") fail(where, "unknown cv kind '" + kind + "'");
    if (integer(cv, "folds", where, 5) < 2) fail(where, "folds must be at least 2");
    if (integer(cv, "purge", where, kDefaultPurge) < 0) fail(where, "purge must be non-negative");
    if (number(cv, "embargo", where, kDefaultEmbargo) < 0.0) fail(where, "embargo must be non-negative");
    if (integer(cv, "train_size", where, 252) < 1 || integer(cv, "test_size", where, 60) < 1) {
        fail(where, "train_size and test_size must be positive");
    }
}

bool uses_black_litterman(const Json& model) {
    if (const Json* p = find(model, "prior"); p && text(*p, "kind", "prior", "empirical") == "black_litterman") return true;
    for (const char* key : {"inner", "outer", "final_estimator"}) {
        if (const Json* m = find(model, key); m && uses_black_litterman(*m)) return true;
    }
    if (const Json* list = find(model, "estimators")) {
        for (const auto& m : *list) {
            if (uses_black_litterman(m)) return true;
        }
    }
    return false;
}

void validate_model_at(const Json& model, const std::string& where) {
    if (!model.is_object()) fail(where, "expected an object");
    const auto kind = text(model, "kind", where, "");
    const auto& kinds = model_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
        fail(where, kind.empty() ? "missing model 'kind'" : "unknown model kind '" + kind + "'");
    }
    text(model, "name", where, "");
    if (kind == "mean_risk") {
        check_object(model, where, {"kind", "name", "objective", "risk_measure", "beta", "risk_aversion", "l1_coef",
                                    "l2_coef", "prior", "constraints", "solver", "frontier_size"});
        parse_objective(text(model, "objective", where, "minimize_risk"));
        measure_of(model, "risk_measure", where, "variance");
        if (number(model, "risk_aversion", where, 1.0) < 0.0) fail(where, "risk_aversion must be non-negative");
        if (number(model, "l1_coef", where, 0.0) < 0.0) fail(where, "l1_coef must be non-negative");
        if (number(model, "l2_coef", where, 0.0) < 0.0) fail(where, "l2_coef must be non-negative");
        if (integer(model, "frontier_size", where, 100) < 1) fail(where, "frontier_size must be at least 1");
        if (const Json* p = find(model, "prior")) validate_prior(*p, where + ".prior");
        if (const Json* c = find(model, "constraints")) validate_constraints(*c, where + ".constraints");
        if (const Json* s = find(model, "solver")) {
            check_object(*s, where + ".solver", {"max_iterations", "eps_abs", "eps_rel"});
            if (integer(*s, "max_iterations", where + ".solver", 1) < 1) fail(where + ".solver", "max_iterations must be positive");
            if (number(*s, "eps_abs", where + ".solver", 1.0) <= 0.0 || number(*s, "eps_rel", where + ".solver", 1.0) <= 0.0) {
                fail(where + ".solver", "tolerances must be positive");
            }
        }
    } else if (kind == "hrp") {
        check_object(model, where, {"kind", "name", "risk_measure", "beta", "linkage", "prior"});
        measure_of(model, "risk_measure", where, "variance");
        parse_linkage(text(model, "linkage", where, "single"));
        if (const Json* p = find(model, "prior")) validate_prior(*p, where + ".prior");
    } else if (kind == "nco") {
        check_object(model, where, {"kind", "name", "inner", "outer", "clusters", "linkage"});
        validate_model_at(required(model, "inner", where), where + ".inner");
        validate_model_at(required(model, "outer", where), where + ".outer");
        if (uses_black_litterman(model)) fail(where, "black_litterman priors are not available inside nco");
        if (integer(model, "clusters", where, 1) < 1) fail(where, "clusters must be at least 1");
        parse_linkage(text(model, "linkage", where, "single"));
    } else if (kind == "stacking") {
        check_object(model, where, {"kind", "name", "estimators", "final_estimator", "cv"});
        const Json& list = required(model, "estimators", where);
        if (!list.is_array() || list.empty()) fail(where, "'estimators' must be a non-empty array");
        for (std::size_t i = 0; i < list.size(); ++i) validate_model_at(list[i], where + ".estimators[" + std::to_string(i) + "]");
        const Json& final_model = required(model, "final_estimator", where);
        validate_model_at(final_model, where + ".final_estimator");
        if (uses_black_litterman(final_model)) fail(where, "black_litterman priors are not available in the final estimator");
        if (const Json* cv = find(model, "cv")) validate_stacking_cv(*cv, where + ".cv");
    } else if (kind == "equal_weighted") {
        check_object(model, where, {"kind", "name"});
    } else {
        check_object(model, where, {"kind", "name", "prior"});
        if (const Json* p = find(model, "prior")) validate_prior(*p, where + ".prior");
    }
}

CvSettings parse_cv(const Json& cv, const std::string& where) {
    check_object(cv, where, {"kind", "train_size", "test_size", "expanding", "folds", "test_folds", "purge", "embargo"});
    CvSettings out;
    const auto kind = text(cv, "kind", where, "walk_forward");
    if (kind == "walk_forward") {
        out.kind = SplitPlan::Kind::WalkForward;
        out.train_size = integer(cv, "train_size", where, 252);
        out.test_size = integer(cv, "test_size", where, 60);
        out.expanding = boolean(cv, "expanding", where, false);
        if (out.train_size < 1 || out.test_size < 1) fail(where, "train_size and test_size must be positive");
        for (const char* key : {"folds", "test_folds", "purge", "embargo"}) {
            if (find(cv, key)) fail(where, std::string("'") + key + "' only applies to cpcv");
        }
    } else if (kind == "cpcv") {
        out.kind = SplitPlan::Kind::Cpcv;
        out.cpcv.folds = static_cast<int>(integer(cv, "folds", where, 10));
        out.cpcv.test_folds = static_cast<int>(integer(cv, "test_folds", where, 2));
        out.cpcv.purge = integer(cv, "purge", where, kDefaultPurge);
        out.cpcv.embargo = number(cv, "embargo", where, kDefaultEmbargo);
        out.cpcv.validate();
        for (const char* key : {"train_size", "test_size", "expanding"}) {
            if (find(cv, key)) fail(where, std::string("'") + key + "' only applies to walk_forward");
        }
    } else {
        fail(where, "unknown cv kind '" + kind + "'");
    }
    return out;
}

}  // namespace

SplitPlan CvSettings::plan(Eigen::Index samples) const {
    return kind == SplitPlan::Kind::WalkForward ? walk_forward(samples, train_size, test_size, expanding)
                                                : quantfolio::cpcv(samples, cpcv);
}

void validate_model(const Json& model) { validate_model_at(model, "model"); }

std::string model_name(const Json& model) {
    const auto name = text(model, "name", "model", "");
    return name.empty() ? text(model, "kind", "model", "model") : name;
}

RunConfig parse_config(const Json& doc, const std::filesystem::path& base) {
    check_object(doc, "config", {"$schema", "description", "data", "model", "benchmarks", "cv", "outputs", "seed", "report"});
    RunConfig cfg;
    text(doc, "description", "config", "");
    text(doc, "$schema", "config", "");

    if (const Json* data = find(doc, "data")) {
        check_object(*data, "data", {"prices", "factors", "returns", "test_fraction", "periods_per_year"});
        DataConfig d;
        d.prices = resolve(base, text(*data, "prices", "data", ""));
        if (text(*data, "prices", "data", "").empty()) fail("data", "missing 'prices'");
        if (find(*data, "factors")) d.factors = resolve(base, text(*data, "factors", "data", ""));
        const auto kind = text(*data, "returns", "data", "simple");
        if (kind != "simple" && kind != "log") fail("data", "'returns' must be \"simple\" or \"log\"");
        d.returns = kind == "log" ? ReturnKind::Log : ReturnKind::Simple;
        d.test_fraction = number(*data, "test_fraction", "data", 0.3);
        if (!(d.test_fraction > 0.0 && d.test_fraction < 1.0)) fail("data", "test_fraction must lie in (0, 1)");
        d.periods_per_year = static_cast<int>(integer(*data, "periods_per_year", "data", kDefaultPeriodsPerYear));
        if (d.periods_per_year < 1) fail("data", "periods_per_year must be positive");
        cfg.data = std::move(d);
    }
    if (const Json* model = find(doc, "model")) {
        validate_model_at(*model, "model");
        cfg.model = *model;
    }
    if (const Json* list = find(doc, "benchmarks")) {
        if (!list->is_array()) fail("benchmarks", "expected an array of models");
        for (std::size_t i = 0; i < list->size(); ++i) {
            validate_model_at((*list)[i], "benchmarks[" + std::to_string(i) + "]");
            cfg.benchmarks.push_back((*list)[i]);
        }
    }
    if (const Json* cv = find(doc, "cv")) cfg.cv = parse_cv(*cv, "cv");
    if (const Json* out = find(doc, "outputs")) {
        check_object(*out, "outputs", {"charts", "csv"});
        cfg.outputs.charts = boolean(*out, "charts", "outputs", true);
        cfg.outputs.csv = boolean(*out, "csv", "outputs", true);
    }
    const long long seed = integer(doc, "seed", "config", 0);
    if (seed < 0) fail("config", "seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(seed);
    if (const Json* report = find(doc, "report")) {
        check_object(*report, "report", {"inputs", "periods_per_year"});
        const Json& inputs = required(*report, "inputs", "report");
        if (!inputs.is_array()) fail("report", "'inputs' must be an array");
        for (const auto& in : inputs) {
            check_object(in, "report.inputs[]", {"name", "series"});
            const auto name = text(in, "name", "report.inputs[]", "");
            const auto series = text(in, "series", "report.inputs[]", "");
            if (name.empty() || series.empty()) fail("report.inputs[]", "'name' and 'series' are required");
            cfg.report.push_back({name, resolve(base, series)});
        }
        cfg.report_periods_per_year =
            static_cast<int>(integer(*report, "periods_per_year", "report", kDefaultPeriodsPerYear));
        if (cfg.report_periods_per_year < 1) fail("report", "periods_per_year must be positive");
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot open config file " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::InvalidConfig, "config is not valid JSON: " + std::string(e.what()));
    }
    return parse_config(doc, path.parent_path());
}

PriorSettings build_prior_settings(const Json& model, const std::vector<std::string>& assets) {
    PriorSettings out;
    const Json* prior = find(model, "prior");
    if (!prior) return out;
    const std::string where = "prior";
    const auto kind = text(*prior, "kind", where, "empirical");
    out.kind = kind == "factor_model"      ? PriorKind::FactorModel
               : kind == "black_litterman" ? PriorKind::BlackLitterman
                                           : PriorKind::Empirical;
    const auto mean = text(*prior, "mean", where, "sample");
    out.empirical.mean = mean == "bayes_stein"              ? MeanEstimator::BayesStein
                         : mean == "exponentially_weighted" ? MeanEstimator::ExponentiallyWeighted
                                                            : MeanEstimator::Sample;
    const auto cov = text(*prior, "covariance", where, "sample");
    out.empirical.covariance = cov == "ledoit_wolf"            ? CovarianceEstimator::LedoitWolf
                               : cov == "gerber"                 ? CovarianceEstimator::Gerber
                               : cov == "exponentially_weighted" ? CovarianceEstimator::ExponentiallyWeighted
                                                                 : CovarianceEstimator::Sample;
    out.empirical.halflife = number(*prior, "halflife", where, 60.0);
    out.empirical.gerber_c = number(*prior, "gerber_c", where, 0.5);
    out.empirical.denoise = boolean(*prior, "denoise", where, false);
    out.empirical.rmt_passes = static_cast<int>(integer(*prior, "rmt_passes", where, 2));
    out.ridge_alpha = number(*prior, "ridge_alpha", where, 0.0);
    if (const Json* views = find(*prior, "views")) {
        if (assets.empty()) fail(where, "views are not available in this context");
        ViewSet set;
        const auto k = static_cast<Eigen::Index>(views->size());
        const auto n = static_cast<Eigen::Index>(assets.size());
        set.picks = Matrix::Zero(k, n);
        set.values.resize(k);
        set.tau = number(*prior, "tau", where, 0.05);
        Vector omega(k);
        int with_variance = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
            const Json& v = (*views)[static_cast<std::size_t>(i)];
            set.picks.row(i) = asset_vector(*view_weights(v), assets, 0.0, where + ".views[]").transpose();
            set.values[i] = number(v, "value", where, 0.0);
            if (auto var = optional_number(v, "variance", where)) {
                omega[i] = *var;
                ++with_variance;
            }
        }
        if (with_variance != 0 && with_variance != k) fail(where, "either every view or no view sets 'variance'");
        if (with_variance == k) set.omega = omega;
        out.views = std::move(set);
    }
    return out;
}

ProblemSpec build_problem(const Json& model, const std::vector<std::string>& assets) {
    const std::string where = "model";
    ProblemSpec spec;
    spec.objective = parse_objective(text(model, "objective", where, "minimize_risk"));
    spec.risk_measure = measure_of(model, "risk_measure", where, "variance");
    spec.risk_aversion = number(model, "risk_aversion", where, 1.0);
    spec.l1_coef = number(model, "l1_coef", where, 0.0);
    spec.l2_coef = number(model, "l2_coef", where, 0.0);
    spec.frontier_size = static_cast<int>(integer(model, "frontier_size", where, 100));
    if (const Json* s = find(model, "solver")) {
        spec.solver.max_iterations = static_cast<int>(integer(*s, "max_iterations", where, spec.solver.max_iterations));
        spec.solver.eps_abs = number(*s, "eps_abs", where, spec.solver.eps_abs);
        spec.solver.eps_rel = number(*s, "eps_rel", where, spec.solver.eps_rel);
    }
    const Json* c = find(model, "constraints");
    if (!c) return spec;
    const std::string cw = "constraints";
    auto& k = spec.constraints;
    k.budget = number(*c, "budget", cw, 1.0);
    for (const auto& [key, fallback, target, scalar] :
         {std::tuple{"lower", 0.0, &k.lower, &k.default_lower}, std::tuple{"upper", 1.0, &k.upper, &k.default_upper}}) {
        const Json* v = find(*c, key);
        if (!v) continue;
        if (v->is_number()) {
            *scalar = v->get<double>();
        } else {
            *target = asset_vector(*v, assets, fallback, cw + "." + key);
        }
    }
    if (const Json* caps = find(*c, "caps")) {
        for (const auto& [name, value] : caps->items()) {
            if (!value.is_number()) fail(cw + ".caps", "value for '" + name + "' must be a number");
            if (assets.empty()) fail(cw + ".caps", "asset caps are not available in this context");
            asset_index(assets, name, cw + ".caps");
            k.asset_caps.push_back({name, value.get<double>()});
        }
    }
    if (const Json* rows = find(*c, "linear")) {
        for (const auto& row : *rows) {
            LinearConstraint lc;
            lc.name = text(row, "name", cw, "row" + std::to_string(k.linear.size()));
            lc.coefficients = asset_vector(row["coefficients"], assets, 0.0, cw + ".linear[]");
            lc.lower = number(row, "lower", cw, 0.0);
            k.linear.push_back(std::move(lc));
        }
    }
    k.min_return = optional_number(*c, "min_return", cw);
    if (const Json* caps = find(*c, "risk_caps")) {
        for (const auto& cap : *caps) {
            k.risk_caps.push_back({measure_of(cap, "measure", cw + ".risk_caps[]", ""), number(cap, "bound", cw, 0.0)});
        }
    }
    return spec;
}

AllocatorPtr build_allocator(const Json& model, const std::vector<std::string>& assets) {
    const auto kind = text(model, "kind", "model", "");
    const auto name = model_name(model);
    if (kind == "mean_risk") {
        return std::make_shared<MeanRiskAllocator>(build_problem(model, assets), build_prior_settings(model, assets), name);
    }
    if (kind == "hrp") {
        return std::make_shared<HrpAllocator>(measure_of(model, "risk_measure", "model", "variance"),
                                              parse_linkage(text(model, "linkage", "model", "single")),
                                              build_prior_settings(model, assets));
    }
    if (kind == "nco") {
        // clusters see asset subsets, so asset-specific settings are unavailable inside
        std::optional<int> clusters;
        if (find(model, "clusters")) clusters = static_cast<int>(integer(model, "clusters", "model", 1));
        return std::make_shared<NcoAllocator>(build_allocator(model["inner"], {}), build_allocator(model["outer"], {}),
                                              clusters, parse_linkage(text(model, "linkage", "model", "single")));
    }
    if (kind == "stacking") {
        std::vector<AllocatorPtr> bases;
        std::vector<std::string> base_names;
        for (const auto& m : model["estimators"]) {
            bases.push_back(build_allocator(m, assets));
            std::string label = bases.back()->name();
            if (std::find(base_names.begin(), base_names.end(), label) != base_names.end()) {
                label += "_" + std::to_string(base_names.size());
            }
            base_names.push_back(std::move(label));
        }
        StackingCv cv;
        if (const Json* c = find(model, "cv")) {
            cv.kind = text(*c, "kind", "cv", "kfold") == "walk_forward" ? StackingCv::Kind::WalkForward
                                                                         : StackingCv::Kind::KFold;
            cv.folds = static_cast<int>(integer(*c, "folds", "cv", cv.folds));
            cv.purge = integer(*c, "purge", "cv", cv.purge);
            cv.embargo = number(*c, "embargo", "cv", cv.embargo);
            cv.train_size = integer(*c, "train_size", "cv", cv.train_size);
            cv.test_size = integer(*c, "test_size", "cv", cv.test_size);
        }
        return std::make_shared<StackingAllocator>(std::move(bases), build_allocator(model["final_estimator"], base_names),
                                                   cv);
    }
    if (kind == "equal_weighted") return std::make_shared<EqualWeightedAllocator>();
    if (kind == "inverse_volatility") {
        return std::make_shared<InverseVolatilityAllocator>(build_prior_settings(model, assets));
    }
    fail("model", "unknown model kind '" + kind + "'");
}

}  // namespace quantfolio::cli
