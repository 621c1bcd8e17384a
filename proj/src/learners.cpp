#include "stackgen/learners.hpp"

#include "stackgen/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace stackgen {

namespace {

struct MethodName {
    Method method;
    const char* name;
};

constexpr MethodName kMethods[] = {
    {Method::ols, "ols"},         {Method::logit, "logit"},         {Method::lassocv, "lassocv"},
    {Method::ridgecv, "ridgecv"}, {Method::elasticcv, "elasticcv"}, {Method::lassoic, "lassoic"},
    {Method::rf, "rf"},           {Method::gradboost, "gradboost"}, {Method::linsvm, "linsvm"},
    {Method::svm, "svm"},         {Method::nnet, "nnet"},
};

bool is_enet(Method m) { return m == Method::lassocv || m == Method::ridgecv || m == Method::elasticcv; }

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
    fail(ErrorCode::invalid_argument, "option " + key + "(" + value + "): expected " + what);
}

bool is_none(const std::string& v) { return v == "None" || v == "none"; }

double as_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* first = v.data();
    const char* last = v.data() + v.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last || !std::isfinite(out)) bad_value(key, v, "a number");
    return out;
}

long as_int(const std::string& key, const std::string& v) {
    const double d = as_real(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e15) bad_value(key, v, "an integer");
    return static_cast<long>(d);
}

bool as_bool(const std::string& key, const std::string& v) {
    const std::string l = lower(v);
    if (l == "true" || l == "1") return true;
    if (l == "false" || l == "0") return false;
    bad_value(key, v, "True or False");
}

std::vector<double> as_reals(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::istringstream in(v);
    std::string tok;
    while (in >> tok) out.push_back(as_real(key, tok));
    if (out.empty()) bad_value(key, v, "a list of numbers");
    return out;
}

// Typed view over the effective options.
struct Config {
    explicit Config(const LearnerSpec& spec, int bfolds) : spec_(spec), options_(effective_options(spec, bfolds)) {}

    const std::string& raw(const std::string& key) const {
        for (const auto& [k, v] : options_)
            if (k == key) return v;
        fail(ErrorCode::internal, "option '" + key + "' has no default");
    }
    double real(const std::string& key) const { return as_real(key, raw(key)); }
    long integer(const std::string& key) const { return as_int(key, raw(key)); }
    bool flag(const std::string& key) const { return as_bool(key, raw(key)); }
    long int_or(const std::string& key, long none_value) const {
        return is_none(raw(key)) ? none_value : integer(key);
    }

    const LearnerSpec& spec_;
    OptionMap options_;
};

// "None" -> all, "sqrt" / "log2", integer literal -> count, literal with a
// decimal point -> fraction of p.
int resolve_max_features(const std::string& v, std::size_t p) {
    const double dp = static_cast<double>(p);
    if (is_none(v)) return static_cast<int>(p);
    if (v == "sqrt") return std::max(1, static_cast<int>(std::floor(std::sqrt(dp))));
    if (v == "log2") return std::max(1, static_cast<int>(std::floor(std::log2(dp))));
    const double d = as_real("max_features", v);
    if (v.find_first_of(".eE") != std::string::npos) {
        if (!(d > 0.0 && d <= 1.0)) bad_value("max_features", v, "a fraction in (0, 1]");
        return std::max(1, static_cast<int>(d * dp));
    }
    const long c = as_int("max_features", v);
    if (c < 1 || static_cast<std::size_t>(c) > p) bad_value("max_features", v, "a count between 1 and the number of columns");
    return static_cast<int>(c);
}

std::size_t resolve_max_samples(const std::string& v, std::size_t n) {
    if (is_none(v)) return n;
    const double d = as_real("max_samples", v);
    if (!(d > 0.0)) bad_value("max_samples", v, "a positive fraction or count");
    if (d <= 1.0) return std::max<std::size_t>(1, static_cast<std::size_t>(d * static_cast<double>(n)));
    const long c = as_int("max_samples", v);
    if (static_cast<std::size_t>(c) > n) bad_value("max_samples", v, "at most the number of rows");
    return static_cast<std::size_t>(c);
}

TreeParams tree_params(const Config& c, long default_depth) {
    TreeParams t;
    t.max_depth = static_cast<int>(c.int_or("max_depth", default_depth));
    t.min_samples_split = static_cast<int>(c.integer("min_samples_split"));
    t.min_samples_leaf = static_cast<int>(c.integer("min_samples_leaf"));
    if (t.max_depth == 0 || t.max_depth < -1) fail(ErrorCode::invalid_argument, "max_depth must be positive or None");
    if (t.min_samples_split < 2) fail(ErrorCode::invalid_argument, "min_samples_split must be at least 2");
    if (t.min_samples_leaf < 1) fail(ErrorCode::invalid_argument, "min_samples_leaf must be at least 1");
    return t;
}

EnetSettings enet_settings(const Config& c) {
    EnetSettings s;
    s.l1_ratio = c.real("l1_ratio");
    s.fit_intercept = c.flag("fit_intercept");
    s.max_iter = static_cast<int>(c.integer("max_iter"));
    s.tol = c.real("tol");
    if (!(s.l1_ratio >= 0.0 && s.l1_ratio <= 1.0)) fail(ErrorCode::invalid_argument, "l1_ratio must lie in [0, 1]");
    if (s.max_iter < 1) fail(ErrorCode::invalid_argument, "max_iter must be at least 1");
    if (!(s.tol > 0.0)) fail(ErrorCode::invalid_argument, "tol must be positive");
    return s;
}

SvmOptions svm_options(const Config& c, Method m, Task task) {
    SvmOptions o;
    o.C = c.real("C");
    o.tol = c.real("tol");
    o.max_iter = c.integer("max_iter");
    if (task == Task::regress) {
        o.loss = SvmLoss::epsilon_insensitive;
        o.epsilon = c.real("epsilon");
    } else if (m == Method::linsvm) {
        const std::string& loss = c.raw("loss");
        if (loss == "hinge") o.loss = SvmLoss::hinge;
        else if (loss == "squared_hinge") o.loss = SvmLoss::squared_hinge;
        else bad_value("loss", loss, "hinge or squared_hinge");
    }
    if (!(o.C > 0.0)) fail(ErrorCode::invalid_argument, "C must be positive");
    if (!(o.epsilon >= 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be non-negative");
    if (!(o.tol > 0.0)) fail(ErrorCode::invalid_argument, "tol must be positive");
    return o;
}

MlpOptions mlp_options(const Config& c) {
    MlpOptions o;
    o.hidden_layer_sizes.clear();
    for (double h : as_reals("hidden_layer_sizes", c.raw("hidden_layer_sizes"))) {
        if (h != std::floor(h) || h < 1) bad_value("hidden_layer_sizes", c.raw("hidden_layer_sizes"), "positive integers");
        o.hidden_layer_sizes.push_back(static_cast<int>(h));
    }
    o.activation = parse_activation(c.raw("activation"));
    o.alpha = c.real("alpha");
    o.batch_size = c.raw("batch_size") == "auto" ? 0 : static_cast<int>(c.integer("batch_size"));
    o.learning_rate_init = c.real("learning_rate_init");
    o.max_iter = static_cast<int>(c.integer("max_iter"));
    o.tol = c.real("tol");
    o.early_stopping = c.flag("early_stopping");
    o.validation_fraction = c.real("validation_fraction");
    o.n_iter_no_change = static_cast<int>(c.integer("n_iter_no_change"));
    o.beta_1 = c.real("beta_1");
    o.beta_2 = c.real("beta_2");
    o.epsilon = c.real("epsilon");
    if (o.batch_size < 0) fail(ErrorCode::invalid_argument, "batch_size must be positive");
    if (!(o.beta_1 >= 0.0 && o.beta_1 < 1.0 && o.beta_2 >= 0.0 && o.beta_2 < 1.0))
        fail(ErrorCode::invalid_argument, "beta_1 and beta_2 must lie in [0, 1)");
    return o;
}

void require(bool ok, const std::string& message) {
    if (!ok) fail(ErrorCode::invalid_argument, message);
}

// Parses every option once so that bad values surface when the learner is
// declared rather than inside a fold.
void check_values(const LearnerSpec& spec) {
    const Config c(spec, 5);
    switch (spec.method) {
        case Method::ols: c.flag("fit_intercept"); break;
        case Method::logit: {
            const std::string& pen = c.raw("penalty");
            if (pen != "l2" && !is_none(pen)) bad_value("penalty", pen, "l2 or None");
            c.real("C");
            c.flag("fit_intercept");
            c.integer("max_iter");
            c.real("tol");
            break;
        }
        case Method::lassocv:
        case Method::ridgecv:
        case Method::elasticcv:
            enet_settings(c);
            if (!is_none(c.raw("alphas"))) as_reals("alphas", c.raw("alphas"));
            require(c.real("eps") > 0.0, "eps must be positive");
            require(c.integer("n_alphas") >= 1, "n_alphas must be at least 1");
            require(c.integer("cv") >= 2, "cv must be at least 2");
            break;
        case Method::lassoic: {
            const std::string& crit = c.raw("criterion");
            if (crit != "aic" && crit != "bic") bad_value("criterion", crit, "aic or bic");
            require(c.real("eps") > 0.0, "eps must be positive");
            require(c.integer("n_alphas") >= 1, "n_alphas must be at least 1");
            c.flag("fit_intercept");
            c.integer("max_iter");
            c.real("tol");
            break;
        }
        case Method::rf:
            tree_params(c, -1);
            require(c.integer("n_estimators") >= 1, "n_estimators must be at least 1");
            c.flag("bootstrap");
            resolve_max_features(c.raw("max_features"), 1000000);
            if (!is_none(c.raw("max_samples"))) as_real("max_samples", c.raw("max_samples"));
            break;
        case Method::gradboost: {
            tree_params(c, 3);
            require(c.real("learning_rate") >= 0.0, "learning_rate must be non-negative");
            require(c.integer("n_estimators") >= 0, "n_estimators must be non-negative");
            const double sub = c.real("subsample");
            require(sub > 0.0 && sub <= 1.0, "subsample must lie in (0, 1]");
            resolve_max_features(c.raw("max_features"), 1000000);
            break;
        }
        case Method::linsvm:
        case Method::svm: svm_options(c, spec.method, spec.task); break;
        case Method::nnet: {
            const MlpOptions o = mlp_options(c);
            require(o.alpha >= 0.0, "alpha must be non-negative");
            require(o.learning_rate_init > 0.0, "learning_rate_init must be positive");
            require(o.max_iter >= 1, "max_iter must be at least 1");
            require(o.validation_fraction > 0.0 && o.validation_fraction < 1.0,
                    "validation_fraction must lie in (0, 1)");
            break;
        }
    }
}

Matrix select_columns(const Matrix& X, const std::vector<std::size_t>& columns) {
    if (columns.empty()) return X;
    Matrix out(X.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] >= static_cast<std::size_t>(X.cols())) fail(ErrorCode::invalid_argument, "predictor column out of range");
        out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(columns[j]));
    }
    return out;
}

}  // namespace

std::string to_string(Method m) {
    for (const auto& e : kMethods)
        if (e.method == m) return e.name;
    return "?";
}

Method parse_method(const std::string& text) {
    const std::string t = lower(trim(text));
    for (const auto& e : kMethods)
        if (t == e.name) return e.method;
    fail(ErrorCode::invalid_argument, "unknown method '" + text + "'");
}

bool supports(Method m, Task task) {
    switch (m) {
        case Method::ols:
        case Method::lassoic: return task == Task::regress;
        case Method::logit:
        case Method::linsvm: return task == Task::classify;
        default: return true;
    }
}

std::vector<std::pair<Method, Task>> learner_table() {
    std::vector<std::pair<Method, Task>> out;
    for (const auto& e : kMethods)
        for (Task t : {Task::regress, Task::classify})
            if (supports(e.method, t)) out.emplace_back(e.method, t);
    return out;
}

OptionMap parse_options(const std::string& text) {
    OptionMap out;
    std::size_t i = 0;
    const auto skip_ws = [&] {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    skip_ws();
    while (i < text.size()) {
        const std::size_t start = i;
        while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
        if (i == start || i >= text.size() || text[i] != '(')
            fail(ErrorCode::parse, "malformed option string near '" + text.substr(start) + "': expected key(value)");
        const std::string key = text.substr(start, i - start);
        const std::size_t close = text.find(')', i + 1);
        const std::size_t nested = text.find('(', i + 1);
        if (close == std::string::npos || (nested != std::string::npos && nested < close))
            fail(ErrorCode::parse, "malformed option string: unbalanced parentheses after '" + key + "'");
        std::string value = trim(text.substr(i + 1, close - i - 1));
        if (value.empty()) fail(ErrorCode::parse, "malformed option string: empty value for '" + key + "'");
        for (const auto& [k, v] : out)
            if (k == key) fail(ErrorCode::parse, "option '" + key + "' given twice");
        out.emplace_back(key, std::move(value));
        i = close + 1;
        if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
            fail(ErrorCode::parse, "malformed option string: expected whitespace after '" + key + "(...)'");
        skip_ws();
    }
    return out;
}

std::string format_options(const OptionMap& options) {
    std::string out;
    for (const auto& [k, v] : options) {
        if (!out.empty()) out += ' ';
        out += k + "(" + v + ")";
    }
    return out;
}

OptionMap default_options(Method m, Task task) {
    if (!supports(m, task))
        fail(ErrorCode::invalid_argument,
             "method " + to_string(m) + " does not support type " + to_string(task));
    switch (m) {
        case Method::ols: return {{"fit_intercept", "True"}};
        case Method::logit:
            return {{"penalty", "l2"}, {"C", "1"}, {"fit_intercept", "True"}, {"max_iter", "100"}, {"tol", "0.0001"}};
        case Method::lassocv:
        case Method::ridgecv:
        case Method::elasticcv: {
            const char* ratio = m == Method::lassocv ? "1" : m == Method::ridgecv ? "0" : "0.5";
            return {{"alphas", "None"},        {"l1_ratio", ratio},  {"eps", "0.001"},   {"n_alphas", "100"},
                    {"fit_intercept", "True"}, {"max_iter", "1000"}, {"tol", "0.0001"}, {"cv", "5"}};
        }
        case Method::lassoic:
            return {{"criterion", "aic"},      {"eps", "0.001"},     {"n_alphas", "100"},
                    {"fit_intercept", "True"}, {"max_iter", "1000"}, {"tol", "0.0001"}};
        case Method::rf:
            return {{"n_estimators", "100"},
                    {"max_depth", "None"},
                    {"min_samples_split", "2"},
                    {"min_samples_leaf", "1"},
                    {"max_features", task == Task::classify ? "sqrt" : "None"},
                    {"bootstrap", "True"},
                    {"max_samples", "None"}};
        case Method::gradboost:
            return {{"learning_rate", "0.1"},   {"n_estimators", "100"}, {"subsample", "1"},
                    {"min_samples_split", "2"}, {"min_samples_leaf", "1"}, {"max_depth", "3"},
                    {"max_features", "None"}};
        case Method::svm:
            if (task == Task::regress) return {{"C", "1"}, {"epsilon", "0.1"}, {"tol", "0.001"}, {"max_iter", "-1"}};
            return {{"C", "1"}, {"tol", "0.001"}, {"max_iter", "-1"}};
        case Method::linsvm:
            return {{"C", "1"}, {"loss", "squared_hinge"}, {"tol", "0.0001"}, {"max_iter", "-1"}};
        case Method::nnet:
            return {{"hidden_layer_sizes", "100"},
                    {"activation", "relu"},
                    {"alpha", "0.0001"},
                    {"batch_size", "auto"},
                    {"learning_rate_init", "0.001"},
                    {"max_iter", "200"},
                    {"tol", "0.0001"},
                    {"early_stopping", "False"},
                    {"validation_fraction", "0.1"},
                    {"n_iter_no_change", "10"},
                    {"beta_1", "0.9"},
                    {"beta_2", "0.999"},
                    {"epsilon", "1e-08"}};
    }
    return {};
}

LearnerSpec make_learner(Method m, Task task, const std::string& options, const std::string& pipeline,
                         const std::vector<std::string>& xvars) {
    LearnerSpec spec;
    spec.method = m;
    spec.task = task;
    const OptionMap defaults = default_options(m, task);
    spec.options = parse_options(options);
    for (const auto& [k, v] : spec.options) {
        const bool known = std::any_of(defaults.begin(), defaults.end(), [&](const auto& d) { return d.first == k; });
        if (!known) fail(ErrorCode::invalid_argument, "unknown option '" + k + "' for method " + to_string(m));
    }
    spec.pipeline = parse_pipeline(pipeline);
    spec.xvars = xvars;
    check_values(spec);
    return spec;
}

OptionMap effective_options(const LearnerSpec& spec, int bfolds) {
    OptionMap out = default_options(spec.method, spec.task);
    for (auto& [k, v] : out) {
        if (k == "cv") v = std::to_string(bfolds);
        for (const auto& [uk, uv] : spec.options)
            if (uk == k) v = uv;
    }
    return out;
}

PipelineSpec effective_pipeline(const LearnerSpec& spec) {
    PipelineSpec out = spec.pipeline;
    const bool regularised = is_enet(spec.method) || spec.method == Method::lassoic;
    if (regularised && !out.contains(StepKind::stdscaler) && !out.contains(StepKind::nostdscaler))
        out.steps.push_back({StepKind::stdscaler});
    return out;
}

std::vector<std::size_t> resolve_columns(const LearnerSpec& spec, const std::vector<std::string>& colnames) {
    std::vector<std::size_t> out;
    if (spec.xvars.empty()) {
        for (std::size_t j = 0; j < colnames.size(); ++j) out.push_back(j);
        return out;
    }
    for (const auto& name : spec.xvars) {
        const auto it = std::find(colnames.begin(), colnames.end(), name);
        if (it == colnames.end()) fail(ErrorCode::data, "xvars: missing column '" + name + "'");
        out.push_back(static_cast<std::size_t>(it - colnames.begin()));
    }
    return out;
}

Vector FittedLearner::predict(const Matrix& X) const {
    const Matrix Xs = pipeline.transform(select_columns(X, columns));
    return std::visit([&](const auto& m) -> Vector { return m.predict(Xs); }, model);
}

FittedLearner fit_learner(const LearnerSpec& spec, const Matrix& X, const Vector& y,
                          const std::vector<std::size_t>& columns, std::uint64_t seed, int bfolds) {
    if (!supports(spec.method, spec.task))
        fail(ErrorCode::invalid_argument,
             "method " + to_string(spec.method) + " does not support type " + to_string(spec.task));
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "predictor and outcome row counts differ");
    validate_labels(y, spec.task);

    FittedLearner fit;
    fit.spec = spec;
    fit.columns = columns;
    if (fit.columns.empty())
        for (Eigen::Index j = 0; j < X.cols(); ++j) fit.columns.push_back(static_cast<std::size_t>(j));
    auto [pipe, Xt] = fit_transform(effective_pipeline(spec), select_columns(X, fit.columns));
    fit.pipeline = std::move(pipe);
    if (has_nan(Xt)) fail(ErrorCode::data, "missing values in predictors; add an imputer pipeline");

    const Config c(spec, bfolds);
    const Task task = spec.task;
    const auto n = static_cast<std::size_t>(Xt.rows());
    const auto p = static_cast<std::size_t>(Xt.cols());
    switch (spec.method) {
        case Method::ols: fit.model = fit_ols(Xt, y, c.flag("fit_intercept")); break;
        case Method::logit: {
            LogitOptions o;
            o.C = is_none(c.raw("penalty")) ? 0.0 : c.real("C");
            o.fit_intercept = c.flag("fit_intercept");
            o.max_iter = static_cast<int>(c.integer("max_iter"));
            o.tol = c.real("tol");
            fit.model = fit_logit(Xt, y, o);
            break;
        }
        case Method::lassocv:
        case Method::ridgecv:
        case Method::elasticcv: {
            EnetCvOptions o;
            o.settings = enet_settings(c);
            o.eps = c.real("eps");
            o.n_alphas = static_cast<int>(c.integer("n_alphas"));
            if (!is_none(c.raw("alphas"))) o.alphas = as_reals("alphas", c.raw("alphas"));
            o.folds = static_cast<int>(c.integer("cv"));
            EnetCvResult r = fit_elastic_net_cv(Xt, y, task, o, seed);
            fit.model = std::move(r.model);
            fit.lambda = r.lambda;
            break;
        }
        case Method::lassoic: {
            EnetSettings s;
            s.fit_intercept = c.flag("fit_intercept");
            s.max_iter = static_cast<int>(c.integer("max_iter"));
            s.tol = c.real("tol");
            const InfoCriterion ic = c.raw("criterion") == "bic" ? InfoCriterion::bic : InfoCriterion::aic;
            LassoIcResult r = fit_lasso_ic(Xt, y, ic, c.real("eps"), static_cast<int>(c.integer("n_alphas")), s);
            fit.model = std::move(r.model);
            fit.lambda = r.lambda;
            break;
        }
        case Method::rf: {
            ForestParams fp;
            fp.n_estimators = static_cast<int>(c.integer("n_estimators"));
            fp.tree = tree_params(c, -1);
            fp.tree.max_features = resolve_max_features(c.raw("max_features"), p);
            fp.bootstrap = c.flag("bootstrap");
            fp.max_samples = fp.bootstrap ? resolve_max_samples(c.raw("max_samples"), n) : 0;
            fit.model = fit_random_forest(Xt, y, fp, seed);
            break;
        }
        case Method::gradboost: {
            BoostParams bp;
            bp.learning_rate = c.real("learning_rate");
            bp.n_estimators = static_cast<int>(c.integer("n_estimators"));
            bp.subsample = c.real("subsample");
            bp.tree = tree_params(c, 3);
            bp.tree.max_features = resolve_max_features(c.raw("max_features"), p);
            fit.model = fit_gradient_boost(Xt, y, task, bp, seed);
            break;
        }
        case Method::linsvm:
        case Method::svm: fit.model = fit_linear_svm(Xt, y, task, svm_options(c, spec.method, task)); break;
        case Method::nnet: fit.model = fit_mlp(Xt, y, task, mlp_options(c), seed); break;
    }
    return fit;
}

}  // namespace stackgen
