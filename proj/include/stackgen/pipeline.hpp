#pragma once

#include <string>
#include <vector>

#include "stackgen/common.hpp"

namespace stackgen {

enum class StepKind {
    stdscaler,
    nostdscaler,
    minmaxscaler,
    onehot,
    medianimputer,
    knnimputer,
    poly2,
    poly3,
    interact,
};

struct PipelineStep {
    StepKind kind;
    int k = 5;  // knnimputer neighbours

    bool operator==(const PipelineStep&) const = default;
};

struct PipelineSpec {
    std::vector<PipelineStep> steps;

    bool contains(StepKind kind) const;
    bool operator==(const PipelineSpec&) const = default;
};

// Parses a whitespace-separated list of step ids ("medianimputer poly2",
// "knnimputer(3)"). `sparse` and `stdscaler0` are rejected.
PipelineSpec parse_pipeline(const std::string& text);
std::string to_string(const PipelineSpec& spec);
std::string step_name(const PipelineStep& step);

// Fitted state for one step. Which members are populated depends on `kind`.
struct FittedStep {
    StepKind kind;
    std::size_t p_in = 0;
    std::size_t p_out = 0;
    Vector center;                              // stdscaler mean / minmax minimum / medians
    Vector scale;                               // stdscaler sd / minmax range
    std::vector<std::vector<double>> levels;    // onehot categories per column
    Matrix reference;                           // knnimputer donors
    int k = 5;
};

class FittedPipeline {
public:
    FittedPipeline() = default;
    FittedPipeline(std::vector<FittedStep> steps, std::size_t p_in, std::size_t p_out)
        : steps_(std::move(steps)), p_in_(p_in), p_out_(p_out) {}

    std::size_t p_in() const { return p_in_; }
    std::size_t p_out() const { return p_out_; }
    const std::vector<FittedStep>& steps() const { return steps_; }

    Matrix transform(const Matrix& X) const;

private:
    std::vector<FittedStep> steps_;
    std::size_t p_in_ = 0;
    std::size_t p_out_ = 0;
};

std::pair<FittedPipeline, Matrix> fit_transform(const PipelineSpec& spec, const Matrix& X_train);

// Fills the NaN entries of `x` from the k nearest rows of `reference`, using
// the NaN-aware Euclidean distance sqrt(p / p_shared * sum of squared
// differences over coordinates observed in both rows). Only rows observing
// the missing column act as donors; ties go to the lower row index.
Vector knn_impute(const Matrix& reference, const Vector& x, int k);

// Number of output columns of the polynomial steps, without a bias column.
std::size_t poly_output_columns(std::size_t p, int degree, bool interaction_only);

}  // namespace stackgen
