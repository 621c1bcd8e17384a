#pragma once

#include <cstdint>
#include <vector>

#include "stackgen/common.hpp"
#include "stackgen/tree.hpp"

namespace stackgen {

struct ForestParams {
    int n_estimators = 100;
    TreeParams tree;
    bool bootstrap = true;
    // Rows drawn per tree; <= 0 means all rows.
    std::size_t max_samples = 0;
};

struct RandomForest {
    std::vector<Tree> trees;

    // Mean of per-tree predictions (leaf class-1 fractions when classifying).
    Vector predict(const Matrix& X) const;
};

RandomForest fit_random_forest(const Matrix& X, const Vector& y, const ForestParams& params,
                               std::uint64_t seed);

struct BoostParams {
    double learning_rate = 0.1;
    int n_estimators = 100;
    double subsample = 1.0;
    TreeParams tree{3, 2, 1, -1};
};

struct GradientBoost {
    Task task = Task::regress;
    double init = 0.0;  // mean(y) or base-rate log-odds
    double learning_rate = 0.1;
    std::vector<Tree> trees;

    // Raw additive score F_M(x).
    Vector decision(const Matrix& X, int n_trees = -1) const;
    // F_M for regression; logistic(F_M) for classification.
    Vector predict(const Matrix& X) const;
};

// Squared-error boosting (regress) or binomial-deviance boosting with
// per-leaf Newton steps (classify). subsample < 1 draws a fresh
// without-replacement row subset for every tree.
GradientBoost fit_gradient_boost(const Matrix& X, const Vector& y, Task task, const BoostParams& params,
                                 std::uint64_t seed);

double logistic(double z);

}  // namespace stackgen
