#pragma once

#include "stackgen/common.hpp"

namespace stackgen {

enum class SvmLoss { hinge, squared_hinge, epsilon_insensitive };

struct SvmOptions {
    double C = 1.0;
    double epsilon = 0.1;  // tube half-width, regression only
    SvmLoss loss = SvmLoss::hinge;
    double tol = 1e-3;     // maximal KKT violation at termination
    long max_iter = -1;    // -1: max(1e7, 100 * number of dual variables)
};

struct LinearSvm {
    Vector coef;
    double intercept = 0.0;
    bool classify = false;
    // Platt calibration P(y=1|f) = 1 / (1 + exp(platt_a * f + platt_b)).
    double platt_a = 0.0;
    double platt_b = 0.0;

    Vector decision(const Matrix& X) const;
    // Regression values, or calibrated class-1 probabilities.
    Vector predict(const Matrix& X) const;
};

// Linear-kernel SVC (labels 0/1) or epsilon-SVR. Solves the dual with an
// unpenalised intercept by sequential minimal optimisation, which minimises
// 0.5*||w||^2 + C * sum(loss) in the primal.
LinearSvm fit_linear_svm(const Matrix& X, const Vector& y, Task task, const SvmOptions& opt);

// Primal objective 0.5*||w||^2 + C * sum(loss(y_i, w'x_i + b)).
double svm_primal_objective(const Matrix& X, const Vector& y, Task task, const SvmOptions& opt,
                            const Vector& w, double b);

struct PlattParams {
    double a = 0.0;
    double b = 0.0;
};

// Sigmoid fit of labels (0/1) on decision values with smoothed targets,
// Newton iterations with backtracking.
PlattParams fit_platt(const Vector& decision, const Vector& labels);

}  // namespace stackgen
