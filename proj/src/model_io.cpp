#include "stackgen/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace stackgen {

namespace {

using json = nlohmann::ordered_json;

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64(const unsigned char* data, std::size_t size) {
    std::string out;
    out.reserve((size + 2) / 3 * 4);
    for (std::size_t i = 0; i < size; i += 3) {
        const unsigned v = static_cast<unsigned>(data[i]) << 16 | (i + 1 < size ? static_cast<unsigned>(data[i + 1]) << 8 : 0u) |
                           (i + 2 < size ? static_cast<unsigned>(data[i + 2]) : 0u);
        out += kB64[(v >> 18) & 63];
        out += kB64[(v >> 12) & 63];
        out += i + 1 < size ? kB64[(v >> 6) & 63] : '=';
        out += i + 2 < size ? kB64[v & 63] : '=';
    }
    return out;
}

[[noreturn]] void corrupt(const std::string& why) { fail(ErrorCode::model_format, "corrupt model file: " + why); }

std::vector<unsigned char> unbase64(const std::string& text) {
    if (text.size() % 4 != 0) corrupt("bad base64 length");
    auto value = [](char c) -> int {
        if (const char* p = std::strchr(kB64, c); p && c != '\0') return static_cast<int>(p - kB64);
        return -1;
    };
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int v[4];
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = text[i + static_cast<std::size_t>(k)];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                v[k] = 0;
                ++pad;
            } else {
                v[k] = value(c);
                if (v[k] < 0 || pad > 0) corrupt("bad base64 character");
            }
        }
        const unsigned w = static_cast<unsigned>(v[0] << 18 | v[1] << 12 | v[2] << 6 | v[3]);
        out.push_back(static_cast<unsigned char>(w >> 16));
        if (pad < 2) out.push_back(static_cast<unsigned char>(w >> 8));
        if (pad < 1) out.push_back(static_cast<unsigned char>(w));
    }
    return out;
}

template <class T>
std::string pack(const T* values, std::size_t count) {
    static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");
    return base64(reinterpret_cast<const unsigned char*>(values), count * sizeof(T));
}

template <class T>
std::vector<T> unpack(const json& j) {
    const auto bytes = unbase64(j.get<std::string>());
    if (bytes.size() % sizeof(T) != 0) corrupt("packed array has a partial element");
    std::vector<T> out(bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
    return out;
}

std::string hexf(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

double unhexf(const json& j) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) corrupt("bad real '" + s + "'");
    return v;
}

json vec(const Vector& v) { return pack(v.data(), static_cast<std::size_t>(v.size())); }

Vector unvec(const json& j) {
    const auto d = unpack<double>(j);
    return Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
}

json mat(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", pack(m.data(), static_cast<std::size_t>(m.size()))}};
}

Matrix unmat(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto d = unpack<double>(j.at("data"));
    if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != d.size()) corrupt("matrix size mismatch");
    return Eigen::Map<const Matrix>(d.data(), rows, cols);
}

json reals(const std::vector<double>& v) { return pack(v.data(), v.size()); }

// Children are allocated in pairs, so only the left index is stored.
json tree_json(const Tree& t) {
    std::vector<std::int32_t> feature, left;
    std::vector<double> x;
    for (const auto& nd : t.nodes) {
        if (nd.feature >= 0 && nd.right != nd.left + 1) fail(ErrorCode::internal, "tree children are not adjacent");
        feature.push_back(nd.feature);
        left.push_back(nd.left);
        x.push_back(nd.feature >= 0 ? nd.threshold : nd.value);
    }
    return json{{"feature", pack(feature.data(), feature.size())},
                {"left", pack(left.data(), left.size())},
                {"x", pack(x.data(), x.size())}};
}

Tree tree_from(const json& j) {
    const auto feature = unpack<std::int32_t>(j.at("feature"));
    const auto left = unpack<std::int32_t>(j.at("left"));
    const auto x = unpack<double>(j.at("x"));
    if (feature.size() != left.size() || feature.size() != x.size() || feature.empty()) corrupt("tree arrays differ in length");
    Tree t;
    t.nodes.resize(feature.size());
    const auto n = static_cast<std::int32_t>(feature.size());
    for (std::size_t i = 0; i < feature.size(); ++i) {
        auto& nd = t.nodes[i];
        nd.feature = feature[i];
        if (nd.feature >= 0) {
            if (left[i] <= static_cast<std::int32_t>(i) || left[i] + 1 >= n) corrupt("tree child index out of range");
            nd.left = left[i];
            nd.right = left[i] + 1;
            nd.threshold = x[i];
        } else {
            nd.value = x[i];
        }
    }
    return t;
}

json trees_json(const std::vector<Tree>& trees) {
    json a = json::array();
    for (const auto& t : trees) a.push_back(tree_json(t));
    return a;
}

std::vector<Tree> trees_from(const json& j) {
    std::vector<Tree> out;
    for (const auto& t : j) out.push_back(tree_from(t));
    return out;
}

json model_json(const LearnerModel& model) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return {{"type", "linear"}, {"coef", vec(m.coef)}, {"intercept", hexf(m.intercept)}, {"logistic", m.logistic}};
            } else if constexpr (std::is_same_v<T, RandomForest>) {
                return {{"type", "forest"}, {"trees", trees_json(m.trees)}};
            } else if constexpr (std::is_same_v<T, GradientBoost>) {
                return {{"type", "boost"},
                        {"task", to_string(m.task)},
                        {"init", hexf(m.init)},
                        {"learning_rate", hexf(m.learning_rate)},
                        {"trees", trees_json(m.trees)}};
            } else if constexpr (std::is_same_v<T, LinearSvm>) {
                return {{"type", "svm"},         {"coef", vec(m.coef)},          {"intercept", hexf(m.intercept)},
                        {"classify", m.classify}, {"platt_a", hexf(m.platt_a)}, {"platt_b", hexf(m.platt_b)}};
            } else {
                json w = json::array(), b = json::array();
                for (const auto& W : m.weights) w.push_back(mat(W));
                for (const auto& v : m.biases) b.push_back(vec(v));
                return {{"type", "mlp"},   {"task", to_string(m.task)}, {"activation", to_string(m.activation)},
                        {"weights", w},    {"biases", b},               {"n_iter", m.n_iter}};
            }
        },
        model);
}

LearnerModel model_from(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "linear") {
        LinearModel m;
        m.coef = unvec(j.at("coef"));
        m.intercept = unhexf(j.at("intercept"));
        m.logistic = j.at("logistic").get<bool>();
        return m;
    }
    if (type == "forest") {
        RandomForest m;
        m.trees = trees_from(j.at("trees"));
        if (m.trees.empty()) corrupt("forest without trees");
        return m;
    }
    if (type == "boost") {
        GradientBoost m;
        m.task = parse_task(j.at("task").get<std::string>());
        m.init = unhexf(j.at("init"));
        m.learning_rate = unhexf(j.at("learning_rate"));
        m.trees = trees_from(j.at("trees"));
        return m;
    }
    if (type == "svm") {
        LinearSvm m;
        m.coef = unvec(j.at("coef"));
        m.intercept = unhexf(j.at("intercept"));
        m.classify = j.at("classify").get<bool>();
        m.platt_a = unhexf(j.at("platt_a"));
        m.platt_b = unhexf(j.at("platt_b"));
        return m;
    }
    if (type == "mlp") {
        Mlp m;
        m.task = parse_task(j.at("task").get<std::string>());
        m.activation = parse_activation(j.at("activation").get<std::string>());
        for (const auto& w : j.at("weights")) m.weights.push_back(unmat(w));
        for (const auto& b : j.at("biases")) m.biases.push_back(unvec(b));
        m.n_iter = j.at("n_iter").get<int>();
        if (m.weights.empty() || m.weights.size() != m.biases.size()) corrupt("inconsistent network layers");
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            if (m.weights[l].cols() != m.biases[l].size()) corrupt("inconsistent network layers");
            if (l > 0 && m.weights[l].rows() != m.weights[l - 1].cols()) corrupt("inconsistent network layers");
        }
        return m;
    }
    corrupt("unknown learner model type '" + type + "'");
}

StepKind step_kind(const std::string& name) {
    const PipelineSpec s = parse_pipeline(name);
    if (s.steps.size() != 1) corrupt("bad pipeline step '" + name + "'");
    return s.steps.front().kind;
}

json pipeline_json(const FittedPipeline& p) {
    json steps = json::array();
    for (const auto& s : p.steps()) {
        json levels = json::array();
        for (const auto& l : s.levels) levels.push_back(reals(l));
        steps.push_back({{"kind", step_name({s.kind, s.k})},
                         {"p_in", s.p_in},
                         {"p_out", s.p_out},
                         {"center", vec(s.center)},
                         {"scale", vec(s.scale)},
                         {"levels", levels},
                         {"reference", mat(s.reference)},
                         {"k", s.k}});
    }
    return {{"p_in", p.p_in()}, {"p_out", p.p_out()}, {"steps", steps}};
}

FittedPipeline pipeline_from(const json& j) {
    std::vector<FittedStep> steps;
    for (const auto& s : j.at("steps")) {
        FittedStep f;
        f.kind = step_kind(s.at("kind").get<std::string>());
        f.p_in = s.at("p_in").get<std::size_t>();
        f.p_out = s.at("p_out").get<std::size_t>();
        f.center = unvec(s.at("center"));
        f.scale = unvec(s.at("scale"));
        for (const auto& l : s.at("levels")) f.levels.push_back(unpack<double>(l));
        f.reference = unmat(s.at("reference"));
        f.k = s.at("k").get<int>();
        steps.push_back(std::move(f));
    }
    return FittedPipeline(std::move(steps), j.at("p_in").get<std::size_t>(), j.at("p_out").get<std::size_t>());
}

json learner_spec_json(const LearnerSpec& s) {
    json opts = json::array();
    for (const auto& [k, v] : s.options) opts.push_back({k, v});
    return {{"method", to_string(s.method)},
            {"task", to_string(s.task)},
            {"options", opts},
            {"pipeline", to_string(s.pipeline)},
            {"xvars", s.xvars}};
}

LearnerSpec learner_spec_from(const json& j) {
    LearnerSpec s;
    s.method = parse_method(j.at("method").get<std::string>());
    s.task = parse_task(j.at("task").get<std::string>());
    for (const auto& kv : j.at("options")) s.options.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    s.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
    s.xvars = j.at("xvars").get<std::vector<std::string>>();
    return s;
}

json spec_json(const StackSpec& s) {
    json learners = json::array();
    for (const auto& l : s.learners) learners.push_back(learner_spec_json(l));
    return {{"learners", learners},
            {"task", to_string(s.task)},
            {"finalest", to_string(s.finalest)},
            {"folds", s.folds},
            {"fold_values", reals(s.fold_values)},
            {"bfolds", s.bfolds},
            {"seed", s.seed},
            {"voting", s.voting},
            {"voteweights", reals(s.voteweights)}};
}

StackSpec spec_from(const json& j) {
    StackSpec s;
    for (const auto& l : j.at("learners")) s.learners.push_back(learner_spec_from(l));
    s.task = parse_task(j.at("task").get<std::string>());
    s.finalest = parse_final_estimator(j.at("finalest").get<std::string>());
    s.folds = j.at("folds").get<int>();
    s.fold_values = unpack<double>(j.at("fold_values"));
    s.bfolds = j.at("bfolds").get<int>();
    s.seed = j.at("seed").get<std::int64_t>();
    s.voting = j.at("voting").get<bool>();
    s.voteweights = unpack<double>(j.at("voteweights"));
    return s;
}

void check_consistency(const StackModel& m) {
    const auto n = static_cast<Eigen::Index>(m.folds.n());
    const auto J = static_cast<Eigen::Index>(m.learners.size());
    if (J < 1 || static_cast<std::size_t>(J) != m.spec.learners.size()) corrupt("learner count mismatch");
    if (m.Z.rows() != n || m.Z.cols() != J || m.y.size() != n) corrupt("cross-fitted matrix shape mismatch");
    if (m.final_fit.weights.size() != J) corrupt("weight vector length mismatch");
    if (m.train_rows.size() != static_cast<std::size_t>(n)) corrupt("training row list length mismatch");
    for (int f : m.folds.fold)
        if (f < 1 || f > m.folds.K) corrupt("fold id out of range");
    for (const auto& l : m.learners) {
        if (l.pipeline.p_in() != l.columns.size()) corrupt("pipeline width mismatch");
        for (std::size_t c : l.columns)
            if (c >= m.colnames.size()) corrupt("learner column out of range");
    }
}

}  // namespace

std::string serialize_model(const StackModel& m) {
    json learners = json::array();
    for (const auto& l : m.learners)
        learners.push_back({{"spec", learner_spec_json(l.spec)},
                            {"columns", l.columns},
                            {"lambda", hexf(l.lambda)},
                            {"pipeline", pipeline_json(l.pipeline)},
                            {"model", model_json(l.model)}});
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.source_hash));
    const json doc = {
        {"format", kModelVersion},
        {"spec", spec_json(m.spec)},
        {"outcome", m.outcome},
        {"colnames", m.colnames},
        {"master_seed", m.master_seed},
        {"folds", {{"K", m.folds.K}, {"fold", m.folds.fold}}},
        {"Z", mat(m.Z)},
        {"y", vec(m.y)},
        {"final",
         {{"estimator", to_string(m.final_fit.estimator)},
          {"weights", vec(m.final_fit.weights)},
          {"intercept", hexf(m.final_fit.intercept)},
          {"logistic", m.final_fit.logistic},
          {"lambda", hexf(m.final_fit.lambda)},
          {"objective", hexf(m.final_fit.objective)}}},
        {"learners", learners},
        {"train_rows", m.train_rows},
        {"source_rows", m.source_rows},
        {"source_hash", hash},
    };
    return doc.dump(1) + "\n";
}

StackModel deserialize_model(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception&) {
        corrupt("not valid JSON (truncated or damaged)");
    }
    if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string()) corrupt("missing format tag");
    const std::string version = doc["format"].get<std::string>();
    if (version != kModelVersion)
        fail(ErrorCode::version, "unsupported model format version '" + version + "' (expected " + kModelVersion + ")");
    StackModel m;
    try {
        m.spec = spec_from(doc.at("spec"));
        m.outcome = doc.at("outcome").get<std::string>();
        m.colnames = doc.at("colnames").get<std::vector<std::string>>();
        m.master_seed = doc.at("master_seed").get<std::uint64_t>();
        m.folds.K = doc.at("folds").at("K").get<int>();
        m.folds.fold = doc.at("folds").at("fold").get<std::vector<int>>();
        m.Z = unmat(doc.at("Z"));
        m.y = unvec(doc.at("y"));
        const json& f = doc.at("final");
        m.final_fit.estimator = parse_final_estimator(f.at("estimator").get<std::string>());
        m.final_fit.weights = unvec(f.at("weights"));
        m.final_fit.intercept = unhexf(f.at("intercept"));
        m.final_fit.logistic = f.at("logistic").get<bool>();
        m.final_fit.lambda = unhexf(f.at("lambda"));
        m.final_fit.objective = unhexf(f.at("objective"));
        for (const auto& l : doc.at("learners")) {
            FittedLearner fl;
            fl.spec = learner_spec_from(l.at("spec"));
            fl.columns = l.at("columns").get<std::vector<std::size_t>>();
            fl.lambda = unhexf(l.at("lambda"));
            fl.pipeline = pipeline_from(l.at("pipeline"));
            fl.model = model_from(l.at("model"));
            m.learners.push_back(std::move(fl));
        }
        m.train_rows = doc.at("train_rows").get<std::vector<std::size_t>>();
        m.source_rows = doc.at("source_rows").get<std::size_t>();
        m.source_hash = std::stoull(doc.at("source_hash").get<std::string>(), nullptr, 16);
    } catch (const json::exception& e) {
        corrupt(e.what());
    } catch (const std::logic_error& e) {
        corrupt(e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::model_format) throw;
        corrupt(e.what());
    }
    check_consistency(m);
    return m;
}

void save_model(const StackModel& model, const std::string& path) {
    const std::string text = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write model file '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) fail(ErrorCode::io, "error while writing model file '" + path + "'");
}

StackModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

}  // namespace stackgen
