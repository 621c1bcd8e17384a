#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "stackgen/stackgen.h"

namespace stackgen::cli {

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(sg_status status) {
    if (status != SG_OK) throw Failure(sg_last_error());
}

using FramePtr = std::unique_ptr<sg_frame, decltype(&sg_frame_free)>;
using SpecPtr = std::unique_ptr<sg_spec, decltype(&sg_spec_free)>;
using ModelPtr = std::unique_ptr<sg_model, decltype(&sg_model_free)>;

std::string take(char* text) {
    std::string s = text ? text : "";
    sg_string_free(text);
    return s;
}

FramePtr read_frame(const std::string& path) {
    if (path.empty()) throw Failure("--data is required");
    sg_frame* f = nullptr;
    check(sg_frame_read_csv(path.c_str(), &f));
    return FramePtr(f, sg_frame_free);
}

ModelPtr read_model(const std::string& path) {
    if (path.empty()) throw Failure("--model is required");
    sg_model* m = nullptr;
    check(sg_model_load(path.c_str(), &m));
    return ModelPtr(m, sg_model_free);
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) out += (out.empty() ? "" : " ") + s;
    return out;
}

std::vector<double> column(const sg_frame* f, const std::string& name) {
    std::vector<double> v(sg_frame_rows(f));
    check(sg_frame_column(f, name.c_str(), v.data()));
    return v;
}

const char* holdout_arg(const RunConfig& c) { return c.holdout ? c.holdout->c_str() : nullptr; }

void add_learner_options(CLI::App* app, RunConfig& c) {
    app->add_option("--type", c.type, "regress or classify")->capture_default_str();
    app->add_option("--methods", c.methods, "Space separated base learners");
    for (int n = 1; n <= kMaxIndexed; ++n) {
        const std::string idx = std::to_string(n);
        app->add_option_function<std::string>("--cmdopt" + idx, [&c, n](const std::string& v) { c.cmdopt[n] = v; })
            ->group("");
        app->add_option_function<std::string>("--pipe" + idx, [&c, n](const std::string& v) { c.pipe[n] = v; })
            ->group("");
        app->add_option_function<std::string>("--xvars" + idx, [&c, n](const std::string& v) { c.xvars[n] = v; })
            ->group("");
    }
    app->add_option("--learner", c.learner_tokens,
                    "Learner block: m=METHOD [opt=\"key(value) ...\"] [pipe=\"...\"] [xvars=\"...\"]")
        ->expected(1, 4)
        ->allow_extra_args(false);
}

void add_holdout(CLI::App* app, RunConfig& c) {
    app->add_option_function<std::vector<std::string>>(
           "--holdout",
           [&c](const std::vector<std::string>& v) { c.holdout = v.empty() ? std::string() : v.front(); },
           "Report on the holdout sample (rows outside the estimation sample, or COLUMN != 0)")
        ->expected(0, 1)
        ->type_name("[COLUMN]");
}

void add_plot_options(CLI::App* app, RunConfig& c) {
    app->add_flag("--histogram", c.histogram, "Histograms of predicted probabilities");
    app->add_option("--out-dir", c.out_dir, "Directory for plot files")->capture_default_str();
    app->add_option("--title", c.title, "Plot title");
    app->add_option("--subtitle", c.subtitle, "Plot subtitle");
    app->add_option("--xtitle", c.xtitle, "Horizontal axis label");
    app->add_option("--ytitle", c.ytitle, "Vertical axis label");
}

LearnerBlock block_from_tokens(const std::vector<std::string>& tokens) {
    LearnerBlock b;
    bool have_method = false;
    for (const auto& t : tokens) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw Failure("learner block token '" + t + "' is not key=value");
        const std::string key = t.substr(0, eq), value = t.substr(eq + 1);
        if (key == "m" || key == "method") {
            b.method = value;
            have_method = true;
        } else if (key == "opt") {
            b.options = value;
        } else if (key == "pipe") {
            b.pipeline = value;
        } else if (key == "xvars") {
            b.xvars = value;
        } else {
            throw Failure("unknown learner block key '" + key + "'");
        }
    }
    if (!have_method) throw Failure("learner block without m=METHOD");
    return b;
}

SpecPtr build_spec(const RunConfig& c) {
    sg_spec* raw = nullptr;
    check(sg_spec_new(c.type.c_str(), &raw));
    SpecPtr spec(raw, sg_spec_free);
    for (const auto& b : learner_blocks(c))
        check(sg_spec_add_learner(spec.get(), b.method.c_str(), b.options.c_str(), b.pipeline.c_str(), b.xvars.c_str()));
    const auto set = [&](const char* key, const std::string& value) { check(sg_spec_set(spec.get(), key, value.c_str())); };
    set("finalest", c.finalest);
    set("folds", std::to_string(c.folds));
    set("bfolds", std::to_string(c.bfolds));
    set("njobs", std::to_string(c.njobs));
    set("voting", c.voting ? "1" : "0");
    if (!c.voteweights.empty()) set("voteweights", c.voteweights);
    if (c.seed) set("seed", std::to_string(*c.seed));
    if (!c.foldvar.empty()) set("foldvar", c.foldvar);
    return spec;
}

void print_report(const RunConfig& c, const sg_model* m, const sg_frame* f, std::ostream& out) {
    if (c.table) {
        char* text = nullptr;
        check(sg_table(m, f, holdout_arg(c), c.threshold, &text));
        out << "\n" << take(text);
    }
    if (c.graph) {
        sg_plot_options opt{c.title.c_str(), c.subtitle.c_str(), c.xtitle.c_str(), c.ytitle.c_str(), c.histogram ? 1 : 0};
        char* text = nullptr;
        check(sg_graph(m, f, holdout_arg(c), c.out_dir.c_str(), &opt, &text));
        out << "\nWrote:\n" << take(text);
    }
}

int run_printopt(const RunConfig& c, std::ostream& out) {
    const auto blocks = learner_blocks(c);
    if (blocks.empty()) throw Failure("printopt needs --methods or --learner");
    for (const auto& b : blocks) {
        char* text = nullptr;
        check(sg_printopt(b.method.c_str(), c.type.c_str(), &text));
        if (blocks.size() > 1) out << b.method << ":\n";
        out << take(text);
    }
    return 0;
}

int run_fit(const RunConfig& c, std::ostream& out) {
    if (c.printopt) return run_printopt(c, out);
    if (c.outcome.empty()) throw Failure("--outcome is required");
    SpecPtr spec = build_spec(c);
    if (sg_spec_num_learners(spec.get()) == 0) throw Failure("no base learners given (--methods or --learner)");
    FramePtr frame = read_frame(c.data);
    const std::size_t n = sg_frame_rows(frame.get());

    std::vector<unsigned char> mask(n, 1);
    if (!c.sample.empty()) {
        const auto s = column(frame.get(), c.sample);
        for (std::size_t i = 0; i < n; ++i) mask[i] = !std::isnan(s[i]) && s[i] != 0.0;
    }
    if (c.holdout && !c.holdout->empty()) {
        const auto h = column(frame.get(), *c.holdout);
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isnan(h[i]) && h[i] != 0.0) mask[i] = 0;
    }
    std::vector<std::string> predictors = c.predictors;
    if (predictors.empty()) {
        for (std::size_t k = 0; k < sg_frame_cols(frame.get()); ++k) {
            const std::string name = sg_frame_column_name(frame.get(), k);
            if (name == c.outcome || name == c.foldvar || name == c.sample || (c.holdout && name == *c.holdout)) continue;
            predictors.push_back(name);
        }
    }
    if (c.global_seed) sg_set_global_seed(*c.global_seed);

    sg_model* raw = nullptr;
    check(sg_fit(spec.get(), frame.get(), c.outcome.c_str(), join(predictors).c_str(), mask.data(), &raw));
    ModelPtr model(raw, sg_model_free);

    char* text = nullptr;
    check(sg_model_weights_text(model.get(), &text));
    out << take(text);
    if (c.showopt) {
        check(sg_model_options_text(model.get(), &text));
        out << "\n" << take(text);
    }
    if (!c.out_model.empty()) check(sg_model_save(model.get(), c.out_model.c_str()));
    print_report(c, model.get(), frame.get(), out);
    return 0;
}

void write_number(std::ostream& os, double v) {
    if (std::isnan(v)) return;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

int run_predict(const RunConfig& c, std::ostream& out) {
    ModelPtr model = read_model(c.model);
    FramePtr frame = read_frame(c.data);
    std::vector<std::string> kinds;
    if (c.xb) kinds.push_back("xb");
    if (c.pr) kinds.push_back("pr");
    if (c.basexb) kinds.push_back("basexb");
    if (c.cvalid) kinds.push_back("cvalid");
    if (kinds.empty()) kinds.push_back("xb");

    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
    for (const auto& k : kinds) {
        double* values = nullptr;
        std::size_t rows = 0, width = 0;
        check(sg_predict(model.get(), frame.get(), k.c_str(), &values, &rows, &width));
        std::unique_ptr<double, decltype(&sg_doubles_free)> hold(values, sg_doubles_free);
        for (std::size_t j = 0; j < width; ++j) {
            header.push_back(width == 1 && (k == "xb" || k == "pr") ? k : k + "_" + std::to_string(j + 1));
            std::vector<double> col(rows);
            for (std::size_t i = 0; i < rows; ++i) col[i] = values[i * width + j];
            cols.push_back(std::move(col));
        }
    }

    std::ofstream file;
    if (!c.out.empty()) {
        file.open(c.out, std::ios::trunc);
        if (!file) throw Failure("cannot write '" + c.out + "'");
    }
    std::ostream& os = c.out.empty() ? out : file;
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    os << "\n";
    const std::size_t rows = cols.empty() ? 0 : cols.front().size();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            if (j) os << ",";
            write_number(os, cols[j][i]);
        }
        os << "\n";
    }
    if (!os) throw Failure("error while writing predictions");
    return 0;
}

int run_replay(const RunConfig& c, std::ostream& out) {
    ModelPtr model = read_model(c.model);
    FramePtr frame = read_frame(c.data);
    print_report(c, model.get(), frame.get(), out);
    return 0;
}

}  // namespace

std::vector<LearnerBlock> learner_blocks(const RunConfig& c) {
    const bool inline_syntax = !c.methods.empty() || !c.cmdopt.empty() || !c.pipe.empty() || !c.xvars.empty();
    if (inline_syntax && !c.learner_tokens.empty())
        throw Failure("use either --methods with --cmdoptN/--pipeN/--xvarsN or --learner blocks, not both");
    std::vector<LearnerBlock> out;
    if (!c.learner_tokens.empty()) {
        for (const auto& tokens : c.learner_tokens) out.push_back(block_from_tokens(tokens));
        return out;
    }
    for (const auto& m : split_words(c.methods)) out.push_back({m, "", "", ""});
    const auto bind = [&](const std::map<int, std::string>& items, std::string LearnerBlock::*field) {
        for (const auto& [n, v] : items) {
            if (n < 1 || static_cast<std::size_t>(n) > out.size()) throw Failure("option index out of range");
            out[static_cast<std::size_t>(n - 1)].*field = v;
        }
    };
    bind(c.cmdopt, &LearnerBlock::options);
    bind(c.pipe, &LearnerBlock::pipeline);
    bind(c.xvars, &LearnerBlock::xvars);
    return out;
}

RunConfig parse_args(int argc, const char* const* argv) {
    RunConfig c;
    CLI::App app{"stackgen: stacked generalization for regression and binary classification"};
    app.set_config("--config", "", "TOML configuration file (command-line flags take precedence)");
    app.require_subcommand(1, 1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    CLI::App* fit = app.add_subcommand("fit", "Fit a stacking model and print its weights");
    fit->add_option("--data", c.data, "CSV file with a header row")->required();
    fit->add_option("--outcome", c.outcome, "Outcome column");
    fit->add_option("--predictors", c.predictors, "Predictor columns (default: all other columns)");
    fit->add_option("--sample", c.sample, "0/1 column marking the estimation sample");
    add_learner_options(fit, c);
    fit->add_option("--finalest", c.finalest, "nnls1, nnls0, singlebest, ls1, ols or ridge")->capture_default_str();
    fit->add_option("--folds", c.folds, "Number of cross-fitting folds")->capture_default_str();
    fit->add_option("--foldvar", c.foldvar, "Column with user fold ids");
    fit->add_option("--bfolds", c.bfolds, "Folds for learners with internal cross-validation")->capture_default_str();
    fit->add_option_function<std::int64_t>("--seed", [&c](std::int64_t v) { c.seed = v; },
                                           "-1: draw from the session generator, 0: random, >0: fixed")
        ->envname("STACKGEN_SEED");
    fit->add_option_function<std::uint64_t>("--set-seed", [&c](std::uint64_t v) { c.global_seed = v; },
                                            "Seed of the session generator used by --seed -1");
    fit->add_option("--njobs", c.njobs, "Parallel tasks: 0 sequential, -1 all cores, -2 all but one")
        ->capture_default_str();
    fit->add_flag("--voting", c.voting, "Combine by voting instead of a fitted final learner");
    fit->add_option("--voteweights", c.voteweights, "J-1 voting weights");
    fit->add_flag("--table", c.table, "Print the evaluation table after fitting");
    fit->add_flag("--graph", c.graph, "Write evaluation plots after fitting");
    add_plot_options(fit, c);
    add_holdout(fit, c);
    fit->add_option("--threshold", c.threshold, "Classification threshold")->capture_default_str();
    fit->add_flag("--printopt", c.printopt, "Print default learner options and exit");
    fit->add_flag("--showopt", c.showopt, "Print the options each learner was run with");
    fit->add_option("--out-model", c.out_model, "Write the fitted model here");
    fit->get_option("--data")->required(false);

    CLI::App* predict = app.add_subcommand("predict", "Predictions from a saved model");
    predict->add_option("--model", c.model, "Model file")->required();
    predict->add_option("--data", c.data, "CSV file")->required();
    predict->add_option("--out", c.out, "Output CSV (default: standard output)");
    predict->add_flag("--xb", c.xb, "Stacked prediction (class at 0.5 for classification)");
    predict->add_flag("--pr", c.pr, "Stacked class-1 probability");
    predict->add_flag("--basexb", c.basexb, "Base learner predictions");
    predict->add_flag("--cvalid", c.cvalid, "Cross-fitted base learner predictions");

    CLI::App* table = app.add_subcommand("table", "RMSPE or confusion table for a saved model");
    table->add_option("--model", c.model, "Model file")->required();
    table->add_option("--data", c.data, "Estimation CSV file")->required();
    table->add_option("--threshold", c.threshold, "Classification threshold")->capture_default_str();
    add_holdout(table, c);

    CLI::App* graph = app.add_subcommand("graph", "Plots for a saved model");
    graph->add_option("--model", c.model, "Model file")->required();
    graph->add_option("--data", c.data, "Estimation CSV file")->required();
    add_plot_options(graph, c);
    add_holdout(graph, c);

    CLI::App* printopt = app.add_subcommand("printopt", "Print default learner options");
    add_learner_options(printopt, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream out, err;
        c.exit_code = app.exit(e, out, err);
        c.message = out.str() + err.str();
        return c;
    }
    c.subcommand = app.get_subcommands().front()->get_name();
    if (c.subcommand == "table") c.table = true;
    if (c.subcommand == "graph") c.graph = true;
    return c;
}

int run(const RunConfig& c, std::ostream& out, std::ostream& err) {
    if (c.exit_code) {
        (*c.exit_code == 0 ? out : err) << c.message;
        return *c.exit_code;
    }
    try {
        if (c.subcommand == "fit") return run_fit(c, out);
        if (c.subcommand == "predict") return run_predict(c, out);
        if (c.subcommand == "table" || c.subcommand == "graph") return run_replay(c, out);
        if (c.subcommand == "printopt") return run_printopt(c, out);
        throw Failure("unknown subcommand '" + c.subcommand + "'");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace stackgen::cli
