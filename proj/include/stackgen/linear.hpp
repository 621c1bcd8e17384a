#pragma once

#include <cstdint>
#include <vector>

#include "stackgen/common.hpp"

namespace stackgen {

struct LinearModel {
    Vector coef;
    double intercept = 0.0;
    bool logistic = false;  // apply the logistic link in predict()

    Vector decision(const Matrix& X) const;
    Vector predict(const Matrix& X) const;
};

// Least squares, minimum-norm solution when X is rank deficient.
LinearModel fit_ols(const Matrix& X, const Vector& y, bool fit_intercept = true);

struct LogitOptions {
    double C = 1.0;           // inverse L2 strength; <= 0 means unpenalised
    bool fit_intercept = true;
    int max_iter = 100;
    double tol = 1e-4;
};

// Minimises 0.5*||coef||^2 + C * sum(logloss) by damped Newton steps. The
// intercept is not penalised.
LinearModel fit_logit(const Matrix& X, const Vector& y, const LogitOptions& opt);

// ---- Elastic net ----------------------------------------------------------
//
// Gaussian objective (1/2n)||y - b0 - X beta||^2 + lambda * P(beta) and
// logistic objective (1/n) sum(logloss) + lambda * P(beta), with
// P(beta) = l1_ratio*||beta||_1 + (1 - l1_ratio)/2 * ||beta||_2^2.

struct EnetSettings {
    double l1_ratio = 1.0;
    bool fit_intercept = true;
    int max_iter = 1000;
    double tol = 1e-4;
};

// Smallest lambda with all slopes zero (for l1_ratio below 1e-3 the ratio is
// clamped to 1e-3 so the grid stays finite).
double enet_lambda_max(const Matrix& X, const Vector& y, Task task, double l1_ratio, bool fit_intercept);

// n_alphas log-spaced values from lambda_max down to eps*lambda_max inclusive.
std::vector<double> enet_grid(double lambda_max, double eps, int n_alphas);

LinearModel fit_elastic_net(const Matrix& X, const Vector& y, Task task, double lambda,
                            const EnetSettings& s);

// Coefficient path over a decreasing lambda grid, warm-started.
std::vector<LinearModel> enet_path(const Matrix& X, const Vector& y, Task task,
                                   const std::vector<double>& lambdas, const EnetSettings& s);

struct EnetCvOptions {
    EnetSettings settings;
    double eps = 1e-3;
    int n_alphas = 100;
    std::vector<double> alphas;  // explicit grid overrides eps/n_alphas
    int folds = 5;
};

struct EnetCvResult {
    LinearModel model;
    double lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> cv_error;  // mean MSE (regress) or mean deviance (classify)
};

EnetCvResult fit_elastic_net_cv(const Matrix& X, const Vector& y, Task task, const EnetCvOptions& opt,
                                std::uint64_t seed);

enum class InfoCriterion { aic, bic };

struct LassoIcResult {
    LinearModel model;
    double lambda = 0.0;
    std::vector<double> lambdas;
    std::vector<double> criterion;
    std::vector<int> df;
};

// n*ln(RSS/n) + penalty*df along the lasso path; penalty 2 (AIC) or ln(n).
LassoIcResult fit_lasso_ic(const Matrix& X, const Vector& y, InfoCriterion ic, double eps, int n_alphas,
                           const EnetSettings& s);

double soft_threshold(double z, double gamma);

}  // namespace stackgen
