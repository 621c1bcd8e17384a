#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stackgen/data.hpp"
#include "stackgen/learners.hpp"
#include "stackgen/optim.hpp"

namespace stackgen {

inline constexpr const char* kModelVersion = "stackgen-model/1";

struct StackSpec {
    std::vector<LearnerSpec> learners;
    Task task = Task::regress;
    FinalEstimator finalest = FinalEstimator::nnls1;
    int folds = 5;
    std::vector<double> fold_values;  // user fold ids per training row; empty: random folds
    int bfolds = 5;
    // -1: one draw from the global generator; 0: nondeterministic; > 0: fixed.
    std::int64_t seed = -1;
    int njobs = 0;
    bool voting = false;
    std::vector<double> voteweights;  // J - 1 entries; empty means equal weights

    bool operator==(const StackSpec&) const = default;
};

void validate(const StackSpec& spec);

// Full weight vector for voting: the given J - 1 weights plus the remainder.
Vector voting_weights(const StackSpec& spec);

// Master seed from a seed policy (see StackSpec::seed).
std::uint64_t resolve_seed(std::int64_t policy);

// Task seed for learner j (0-based) on fold k (1..K), or k = 0 for the
// full-sample refit.
inline std::uint64_t task_seed(std::uint64_t master, std::size_t j, int k) {
    return derive_seed(master, static_cast<std::uint64_t>(j) + 1, static_cast<std::uint64_t>(k));
}

FoldAssignment make_folds(const StackSpec& spec, std::size_t n, std::uint64_t master);

struct StackModel {
    StackSpec spec;
    std::string outcome;
    std::vector<std::string> colnames;
    std::uint64_t master_seed = 0;
    FoldAssignment folds;
    Matrix Z;  // n x J cross-fitted predictions
    Vector y;
    FinalFit final_fit;
    std::vector<FittedLearner> learners;  // full-sample refits
    // Provenance of the training sample in the source file.
    std::vector<std::size_t> train_rows;
    std::size_t source_rows = 0;
    std::uint64_t source_hash = 0;

    std::size_t J() const { return learners.size(); }
    Task task() const { return spec.task; }
    // Weights shown in the weights table (voting weights when voting).
    Vector weights() const;
};

// Out-of-fold predictions of every learner. Learner j on fold k uses
// task_seed(master, j, k).
Matrix cross_fit(const StackSpec& spec, const Dataset& data, const FoldAssignment& folds, std::uint64_t master);

StackModel fit_stack(const StackSpec& spec, const Dataset& data);

enum class PredictKind { xb, pr };

// Refit predictions of every base learner, n x J in learner order.
Matrix predict_base(const StackModel& model, const Matrix& X);
// Combination of base predictions (stacking or voting rule).
Vector combine(const StackModel& model, const Matrix& base);
// xb: stacked value (regress) or predicted class at 0.5 (classify);
// pr: class-1 probability, classify only.
Vector predict_stack(const StackModel& model, const Matrix& X, PredictKind kind = PredictKind::xb);
// Cross-fitted predictions for rows of the source file (must be training rows).
Matrix cvalid_rows(const StackModel& model, const std::vector<std::size_t>& source_rows);

// Text of the weights table, including the single-learner note.
std::string format_weights(const StackModel& model);

}  // namespace stackgen
