#pragma once

#include <cstdint>
#include <vector>

#include "stackgen/common.hpp"
#include "stackgen/rng.hpp"

namespace stackgen {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    int leaf_of(const Matrix& X, Eigen::Index row) const;
    double predict_row(const Matrix& X, Eigen::Index row) const { return nodes[static_cast<std::size_t>(leaf_of(X, row))].value; }
    Vector predict(const Matrix& X) const;
    int depth() const;
};

struct TreeParams {
    int max_depth = -1;  // -1: unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = -1;  // -1: all columns
};

// Row order of X by each column, computed once and reused across trees.
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;  // order[j] = rows sorted by X(:, j)
};

SortedColumns sort_columns(const Matrix& X);

struct TreeFit {
    Tree tree;
    std::vector<int> leaf;  // leaf node per row of X (-1 for rows with zero weight)
};

// Grows a least-squares regression tree on `target` using rows with
// positive `weight` (weights act as replication counts). Splits maximise the
// decrease in weighted sum of squares, which for 0/1 targets selects the
// same split as Gini impurity. Thresholds are midpoints between consecutive
// distinct values; ties prefer the lower column, then the lower threshold.
// Leaf values are weighted target means.
TreeFit build_tree(const Matrix& X, const SortedColumns& sorted, const Vector& target,
                   const std::vector<double>& weight, const TreeParams& params, Rng& rng);

}  // namespace stackgen
