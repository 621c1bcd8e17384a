#include "stackgen/stackgen.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <unordered_set>

#include "stackgen/data.hpp"
#include "stackgen/model_io.hpp"
#include "stackgen/report.hpp"
#include "stackgen/rng.hpp"
#include "stackgen/stacking.hpp"

using namespace stackgen;

struct sg_frame {
    Frame frame;
};

struct sg_spec {
    StackSpec spec;
    std::string foldvar;
};

struct sg_model {
    StackModel model;
};

namespace {

thread_local std::string last_error;

sg_status to_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return SG_ERR_INVALID_ARGUMENT;
        case ErrorCode::io: return SG_ERR_IO;
        case ErrorCode::parse: return SG_ERR_PARSE;
        case ErrorCode::data: return SG_ERR_DATA;
        case ErrorCode::numeric: return SG_ERR_NUMERIC;
        case ErrorCode::model_format: return SG_ERR_MODEL_FORMAT;
        case ErrorCode::version: return SG_ERR_VERSION;
        case ErrorCode::internal: return SG_ERR_INTERNAL;
    }
    return SG_ERR_INTERNAL;
}

template <class F>
sg_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return SG_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return SG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return SG_ERR_INTERNAL;
    }
}

void need(const void* p, const char* what) {
    if (p == nullptr) fail(ErrorCode::invalid_argument, std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::vector<std::string> words(const char* text) {
    std::vector<std::string> out;
    if (text == nullptr) return out;
    std::istringstream in(text);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) fail(ErrorCode::parse, key + ": expected an integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) fail(ErrorCode::parse, key + ": expected a number, got '" + value + "'");
    return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "True") return true;
    if (value == "0" || value == "false" || value == "False") return false;
    fail(ErrorCode::parse, key + ": expected 0 or 1, got '" + value + "'");
}

void check_source(const StackModel& m, const Frame& f) {
    if (f.rows() != m.source_rows || f.content_hash != m.source_hash)
        fail(ErrorCode::data, "data have changed since estimation; the estimation data file is required");
}

std::vector<std::size_t> all_rows(std::size_t n) {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
}

EvalInput eval_input(const StackModel& m, const Frame& f, const char* holdout) {
    check_source(m, f);
    EvalInput in;
    in.X_train = frame_matrix(f, m.colnames, m.train_rows);
    if (holdout == nullptr) return in;
    const std::unordered_set<std::size_t> train(m.train_rows.begin(), m.train_rows.end());
    std::vector<std::size_t> rows;
    if (*holdout == '\0') {
        for (std::size_t i = 0; i < f.rows(); ++i)
            if (!train.count(i)) rows.push_back(i);
        if (rows.empty()) fail(ErrorCode::data, "no holdout observations: the estimation used the whole sample");
    } else {
        const auto& mark = f.column(holdout);
        for (std::size_t i = 0; i < f.rows(); ++i)
            if (!std::isnan(mark[i]) && mark[i] != 0.0) rows.push_back(i);
        if (rows.empty()) fail(ErrorCode::data, std::string("holdout column '") + holdout + "' marks no rows");
        for (std::size_t r : rows)
            if (train.count(r))
                fail(ErrorCode::data, "holdout row " + std::to_string(r + 1) + " belongs to the estimation sample");
    }
    in.X_holdout = frame_matrix(f, m.colnames, rows);
    const auto& ycol = f.column(m.outcome);
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = ycol[rows[i]];
    if (y.hasNaN()) fail(ErrorCode::data, "outcome is missing in the holdout sample");
    validate_labels(y, m.task());
    in.y_holdout = std::move(y);
    return in;
}

std::string wrap_options(const OptionMap& options, std::size_t width) {
    std::string out, line;
    for (const auto& [k, v] : options) {
        const std::string item = k + "(" + v + ")";
        if (!line.empty() && line.size() + 1 + item.size() > width) {
            out += line + "\n";
            line.clear();
        }
        line += line.empty() ? item : " " + item;
    }
    if (!line.empty()) out += line + "\n";
    return out;
}

}  // namespace

extern "C" {

const char* sg_version(void) { return "1.0.0"; }

const char* sg_model_format_version(void) { return kModelVersion; }

const char* sg_last_error(void) { return last_error.c_str(); }

void sg_string_free(char* text) { std::free(text); }

void sg_doubles_free(double* values) { std::free(values); }

void sg_set_global_seed(uint64_t seed) { global_rng::set_seed(seed); }

uint64_t sg_global_draw_count(void) { return global_rng::draw_count(); }

void sg_set_warning_callback(sg_warning_fn fn, void* user) {
    if (fn == nullptr) {
        set_warning_handler({});
        return;
    }
    set_warning_handler([fn, user](const std::string& msg) { fn(msg.c_str(), user); });
}

sg_status sg_frame_read_csv(const char* path, sg_frame** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sg_frame{read_csv(path)};
    });
}

sg_status sg_frame_parse_csv(const char* text, sg_frame** out) {
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = new sg_frame{parse_csv(text)};
    });
}

void sg_frame_free(sg_frame* frame) { delete frame; }

size_t sg_frame_rows(const sg_frame* frame) { return frame ? frame->frame.rows() : 0; }

size_t sg_frame_cols(const sg_frame* frame) { return frame ? frame->frame.cols() : 0; }

const char* sg_frame_column_name(const sg_frame* frame, size_t index) {
    if (frame == nullptr || index >= frame->frame.cols()) return nullptr;
    return frame->frame.names[index].c_str();
}

sg_status sg_frame_column(const sg_frame* frame, const char* name, double* out) {
    return guarded([&] {
        need(frame, "frame");
        need(name, "name");
        need(out, "out");
        const auto& col = frame->frame.column(name);
        std::copy(col.begin(), col.end(), out);
    });
}

sg_status sg_spec_new(const char* task, sg_spec** out) {
    return guarded([&] {
        need(task, "task");
        need(out, "out");
        auto* s = new sg_spec;
        s->spec.task = parse_task(task);
        *out = s;
    });
}

void sg_spec_free(sg_spec* spec) { delete spec; }

sg_status sg_spec_add_learner(sg_spec* spec, const char* method, const char* options, const char* pipeline,
                              const char* xvars) {
    return guarded([&] {
        need(spec, "spec");
        need(method, "method");
        spec->spec.learners.push_back(make_learner(parse_method(method), spec->spec.task, options ? options : "",
                                                   pipeline ? pipeline : "", words(xvars)));
    });
}

sg_status sg_spec_set(sg_spec* spec, const char* key, const char* value) {
    return guarded([&] {
        need(spec, "spec");
        need(key, "key");
        need(value, "value");
        const std::string k = key, v = value;
        StackSpec& s = spec->spec;
        if (k == "finalest") {
            s.finalest = parse_final_estimator(v);
        } else if (k == "folds") {
            s.folds = static_cast<int>(parse_integer(k, v));
        } else if (k == "bfolds") {
            s.bfolds = static_cast<int>(parse_integer(k, v));
        } else if (k == "seed") {
            s.seed = parse_integer(k, v);
            if (s.seed < -1) fail(ErrorCode::invalid_argument, "seed must be -1, 0 or a positive integer");
        } else if (k == "njobs") {
            s.njobs = static_cast<int>(parse_integer(k, v));
        } else if (k == "voting") {
            s.voting = parse_flag(k, v);
        } else if (k == "voteweights") {
            s.voteweights.clear();
            for (const auto& w : words(value)) s.voteweights.push_back(parse_real(k, w));
        } else if (k == "foldvar") {
            spec->foldvar = v;
        } else {
            fail(ErrorCode::invalid_argument, "unknown setting '" + k + "'");
        }
    });
}

size_t sg_spec_num_learners(const sg_spec* spec) { return spec ? spec->spec.learners.size() : 0; }

sg_status sg_spec_learner_options(const sg_spec* spec, size_t index, char** out) {
    return guarded([&] {
        need(spec, "spec");
        need(out, "out");
        if (index >= spec->spec.learners.size()) fail(ErrorCode::invalid_argument, "option index out of range");
        *out = dup_string(format_options(effective_options(spec->spec.learners[index], spec->spec.bfolds)));
    });
}

sg_status sg_printopt(const char* method, const char* task, char** out) {
    return guarded([&] {
        need(method, "method");
        need(task, "task");
        need(out, "out");
        *out = dup_string("Default options: \n" + wrap_options(default_options(parse_method(method), parse_task(task)), 78));
    });
}

sg_status sg_fit(const sg_spec* spec, const sg_frame* frame, const char* outcome, const char* predictors,
                 const unsigned char* train_mask, sg_model** out) {
    return guarded([&] {
        need(spec, "spec");
        need(frame, "frame");
        need(outcome, "outcome");
        need(out, "out");
        const Frame& f = frame->frame;
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < f.rows(); ++i)
            if (train_mask == nullptr || train_mask[i] != 0) rows.push_back(i);
        if (rows.empty()) fail(ErrorCode::data, "the estimation sample is empty");
        std::vector<std::string> names = words(predictors);
        if (names.empty())
            for (const auto& nm : f.names)
                if (nm != outcome && nm != spec->foldvar) names.push_back(nm);
        StackSpec s = spec->spec;
        if (!spec->foldvar.empty()) {
            const auto& col = f.column(spec->foldvar);
            s.fold_values.clear();
            for (std::size_t r : rows) s.fold_values.push_back(col[r]);
        }
        const Dataset data = make_dataset(f, outcome, names, s.task, rows);
        auto* m = new sg_model;
        try {
            m->model = fit_stack(s, data);
        } catch (...) {
            delete m;
            throw;
        }
        m->model.outcome = outcome;
        m->model.train_rows = rows;
        m->model.source_rows = f.rows();
        m->model.source_hash = f.content_hash;
        *out = m;
    });
}

void sg_model_free(sg_model* model) { delete model; }

sg_status sg_model_save(const sg_model* model, const char* path) {
    return guarded([&] {
        need(model, "model");
        need(path, "path");
        save_model(model->model, path);
    });
}

sg_status sg_model_load(const char* path, sg_model** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = new sg_model{load_model(path)};
    });
}

sg_status sg_model_serialize(const sg_model* model, char** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = dup_string(serialize_model(model->model));
    });
}

sg_status sg_model_deserialize(const char* text, sg_model** out) {
    return guarded([&] {
        need(text, "text");
        need(out, "out");
        *out = new sg_model{deserialize_model(text)};
    });
}

size_t sg_model_num_learners(const sg_model* model) { return model ? model->model.J() : 0; }

size_t sg_model_train_rows(const sg_model* model) { return model ? model->model.train_rows.size() : 0; }

sg_status sg_model_weights(const sg_model* model, double* out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const Vector w = model->model.weights();
        std::copy(w.data(), w.data() + w.size(), out);
    });
}

double sg_model_intercept(const sg_model* model) { return model ? model->model.final_fit.intercept : 0.0; }

sg_status sg_model_weights_text(const sg_model* model, char** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = dup_string(format_weights(model->model));
    });
}

sg_status sg_model_options_text(const sg_model* model, char** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        const StackModel& m = model->model;
        std::string text;
        for (std::size_t j = 0; j < m.J(); ++j) {
            const LearnerSpec& l = m.spec.learners[j];
            const std::string pipe = to_string(effective_pipeline(l));
            text += "Learner " + std::to_string(j + 1) + ": " + to_string(l.method) + "\n";
            text += "  options:  " + format_options(effective_options(l, m.spec.bfolds)) + "\n";
            text += "  pipeline: " + (pipe.empty() ? std::string("(none)") : pipe) + "\n";
        }
        *out = dup_string(text);
    });
}

const char* sg_model_outcome(const sg_model* model) { return model ? model->model.outcome.c_str() : nullptr; }

sg_status sg_predict(const sg_model* model, const sg_frame* frame, const char* kind, double** out, size_t* rows,
                     size_t* cols) {
    return guarded([&] {
        need(model, "model");
        need(frame, "frame");
        need(kind, "kind");
        need(out, "out");
        need(rows, "rows");
        need(cols, "cols");
        const StackModel& m = model->model;
        const Frame& f = frame->frame;
        const std::string k = kind;
        Matrix result;
        if (k == "cvalid") {
            check_source(m, f);
            result = Matrix::Constant(static_cast<Eigen::Index>(f.rows()), m.Z.cols(), std::nan(""));
            for (std::size_t i = 0; i < m.train_rows.size(); ++i)
                result.row(static_cast<Eigen::Index>(m.train_rows[i])) = m.Z.row(static_cast<Eigen::Index>(i));
        } else {
            const Matrix X = frame_matrix(f, m.colnames, all_rows(f.rows()));
            if (k == "xb") result = predict_stack(m, X, PredictKind::xb);
            else if (k == "pr") result = predict_stack(m, X, PredictKind::pr);
            else if (k == "basexb") result = predict_base(m, X);
            else fail(ErrorCode::invalid_argument, "unknown prediction kind '" + k + "'");
        }
        const std::size_t count = static_cast<std::size_t>(result.size());
        auto* buf = static_cast<double*>(std::malloc(std::max<std::size_t>(count, 1) * sizeof(double)));
        if (buf == nullptr) throw std::bad_alloc();
        for (Eigen::Index i = 0; i < result.rows(); ++i)
            for (Eigen::Index j = 0; j < result.cols(); ++j)
                buf[static_cast<std::size_t>(i * result.cols() + j)] = result(i, j);
        *out = buf;
        *rows = static_cast<size_t>(result.rows());
        *cols = static_cast<size_t>(result.cols());
    });
}

sg_status sg_table(const sg_model* model, const sg_frame* frame, const char* holdout, double threshold, char** out) {
    return guarded([&] {
        need(model, "model");
        need(frame, "frame");
        need(out, "out");
        if (!(threshold >= 0.0 && threshold <= 1.0)) fail(ErrorCode::invalid_argument, "threshold must lie in [0, 1]");
        const EvalInput in = eval_input(model->model, frame->frame, holdout);
        const EvalReport rep = model->model.task() == Task::regress ? rmspe_table(model->model, in)
                                                                    : confusion_table(model->model, in, threshold);
        *out = dup_string(format_report(rep));
    });
}

sg_status sg_graph(const sg_model* model, const sg_frame* frame, const char* holdout, const char* out_dir,
                   const sg_plot_options* options, char** out) {
    return guarded([&] {
        need(model, "model");
        need(frame, "frame");
        need(out_dir, "out_dir");
        need(out, "out");
        PlotOptions opt;
        if (options != nullptr) {
            if (options->title) opt.title = options->title;
            if (options->subtitle) opt.subtitle = options->subtitle;
            if (options->xlabel) opt.xlabel = options->xlabel;
            if (options->ylabel) opt.ylabel = options->ylabel;
            opt.histogram = options->histogram != 0;
        }
        const EvalInput in = eval_input(model->model, frame->frame, holdout);
        std::string list;
        for (const auto& p : emit_plots(model->model, in, out_dir, opt)) list += p + "\n";
        *out = dup_string(list);
    });
}

}  // extern "C"
