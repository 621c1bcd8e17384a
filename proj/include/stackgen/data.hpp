#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/common.hpp"

namespace stackgen {

// Raw numeric CSV contents, column-major. Missing cells are NaN.
struct Frame {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::uint64_t content_hash = 0;  // FNV-1a over the file bytes
    // First unparsable cell per column (empty if none); raised only when the
    // column is requested through column().
    std::vector<std::string> bad_cells;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t cols() const { return names.size(); }
    std::optional<std::size_t> find(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
};

Frame read_csv(const std::string& path);
Frame parse_csv(const std::string& text);

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

struct Dataset {
    Matrix X;
    Vector y;
    std::vector<std::string> colnames;
    Task task = Task::regress;

    std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
    std::size_t column_index(const std::string& name) const;
};

// Builds a dataset from `rows` of the frame (all rows when empty). When
// `predictors` is empty every non-outcome column is used, in file order.
Dataset make_dataset(const Frame& frame, const std::string& outcome,
                     const std::vector<std::string>& predictors, Task task = Task::regress,
                     const IndexVector& rows = {});

Dataset load_csv(const std::string& path, const std::string& outcome,
                 const std::vector<std::string>& predictors = {}, Task task = Task::regress);

// Checks the label invariant of a classification dataset.
void validate_labels(const Vector& y, Task task);

// Feature matrix for the named columns of selected frame rows.
Matrix frame_matrix(const Frame& frame, const std::vector<std::string>& names,
                    const IndexVector& rows);

Dataset subset_rows(const Dataset& data, const IndexVector& rows);

struct FoldAssignment {
    std::vector<int> fold;  // values in 1..K
    int K = 0;

    std::size_t n() const { return fold.size(); }
    IndexVector members(int k) const;
    IndexVector complement(int k) const;
    std::vector<std::size_t> sizes() const;
};

FoldAssignment assign_folds(std::size_t n, int K, std::uint64_t seed);
FoldAssignment folds_from_column(const std::vector<double>& values);

struct HoldoutMask {
    std::vector<bool> in_train;

    std::size_t train_count() const;
    std::size_t holdout_count() const { return in_train.size() - train_count(); }
    IndexVector train_rows() const;
    IndexVector holdout_rows() const;
};

HoldoutMask split_holdout(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace stackgen
