#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stackgen/common.hpp"

namespace stackgen {

enum class FinalEstimator { nnls1, nnls0, singlebest, ls1, ols, ridge };

std::string to_string(FinalEstimator e);
FinalEstimator parse_final_estimator(const std::string& text);

struct FinalFit {
    FinalEstimator estimator = FinalEstimator::nnls1;
    Vector weights;
    double intercept = 0.0;
    bool logistic = false;  // classification ridge: logistic link on the combination
    double lambda = 0.0;    // ridge penalty chosen by cross-validation
    double objective = 0.0; // sum of squared residuals of the combination

    // Stacked values for base predictions P (rows x J).
    Vector combine(const Matrix& P) const;
};

// Minimum of ||y - Z w||^2 over the probability simplex, by a primal
// active-set method started from the best vertex.
FinalFit solve_nnls1(const Matrix& Z, const Vector& y);
// Lawson-Hanson non-negative least squares.
FinalFit solve_nnls0(const Matrix& Z, const Vector& y);
// Least squares with weights summing to one.
FinalFit solve_ls1(const Matrix& Z, const Vector& y);
// Weight one on the column with the smallest squared error (lowest index on ties).
FinalFit solve_singlebest(const Matrix& Z, const Vector& y);
FinalFit solve_ols_final(const Matrix& Z, const Vector& y);
// Ridge (linear, or logistic when task is classify) with intercept at a
// fixed penalty lambda on 0.5 * lambda * ||w||^2.
FinalFit solve_ridge_fixed(const Matrix& Z, const Vector& y, double lambda, Task task);
// Penalty picked from ridge_grid() by `folds`-fold cross-validation.
FinalFit solve_ridge_final(const Matrix& Z, const Vector& y, Task task, int folds, std::uint64_t seed);
std::vector<double> ridge_grid();

FinalFit solve_final(FinalEstimator e, const Matrix& Z, const Vector& y, Task task, int folds, std::uint64_t seed);

// Spreads the total weight of bitwise-identical columns evenly among them.
void share_duplicate_weights(const Matrix& Z, Vector& w);

double squared_error(const Matrix& Z, const Vector& y, const Vector& w, double intercept = 0.0);

}  // namespace stackgen
