#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stackgen/common.hpp"
#include "stackgen/ensemble.hpp"
#include "stackgen/linear.hpp"
#include "stackgen/mlp.hpp"
#include "stackgen/pipeline.hpp"
#include "stackgen/svm.hpp"

namespace stackgen {

enum class Method { ols, logit, lassocv, ridgecv, elasticcv, lassoic, rf, gradboost, linsvm, svm, nnet };

std::string to_string(Method m);
Method parse_method(const std::string& text);
bool supports(Method m, Task task);
// All (method, task) pairs that may be combined, in registry order.
std::vector<std::pair<Method, Task>> learner_table();

// Ordered key -> value pairs, as written in an option string.
using OptionMap = std::vector<std::pair<std::string, std::string>>;

// Parses "key(value) key(value) ...". Values may contain spaces
// ("hidden_layer_sizes(5 5)") but not parentheses.
OptionMap parse_options(const std::string& text);
std::string format_options(const OptionMap& options);

// Defaults for a valid pair, in display order.
OptionMap default_options(Method m, Task task);

struct LearnerSpec {
    Method method = Method::ols;
    Task task = Task::regress;
    OptionMap options;  // user overrides only
    PipelineSpec pipeline;
    std::vector<std::string> xvars;  // empty: every predictor

    bool operator==(const LearnerSpec&) const = default;
};

// Validates the pair, the option keys and values, and the pipeline.
LearnerSpec make_learner(Method m, Task task, const std::string& options = "", const std::string& pipeline = "",
                         const std::vector<std::string>& xvars = {});

// Defaults overlaid with the user's options. A learner with inner
// cross-validation takes `cv` from `bfolds` unless set explicitly.
OptionMap effective_options(const LearnerSpec& spec, int bfolds = 5);

// Pipeline actually run before the learner: the user's steps followed by an
// implicit stdscaler for the regularised linear methods, unless the user
// listed stdscaler or nostdscaler.
PipelineSpec effective_pipeline(const LearnerSpec& spec);

using LearnerModel = std::variant<LinearModel, RandomForest, GradientBoost, LinearSvm, Mlp>;

struct FittedLearner {
    LearnerSpec spec;
    std::vector<std::size_t> columns;  // predictor columns consumed, in order
    FittedPipeline pipeline;
    LearnerModel model;
    double lambda = 0.0;  // selected penalty for the path-based methods

    // X holds every predictor of the dataset; returns values for regression
    // and class-1 probabilities for classification.
    Vector predict(const Matrix& X) const;
};

// Column indices named by spec.xvars (all columns when empty).
std::vector<std::size_t> resolve_columns(const LearnerSpec& spec, const std::vector<std::string>& colnames);

FittedLearner fit_learner(const LearnerSpec& spec, const Matrix& X, const Vector& y,
                          const std::vector<std::size_t>& columns, std::uint64_t seed, int bfolds = 5);

}  // namespace stackgen
