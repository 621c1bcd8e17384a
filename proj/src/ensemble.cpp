#include "stackgen/ensemble.hpp"

#include <cmath>

namespace stackgen {

double logistic(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Vector RandomForest::predict(const Matrix& X) const {
    Vector sum = Vector::Zero(X.rows());
    for (const auto& t : trees) sum += t.predict(X);
    return sum / static_cast<double>(trees.size());
}

RandomForest fit_random_forest(const Matrix& X, const Vector& y, const ForestParams& params,
                               std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (params.n_estimators < 1) fail(ErrorCode::invalid_argument, "rf: n_estimators must be at least 1");
    if (static_cast<std::size_t>(params.tree.min_samples_leaf) >= n)
        fail(ErrorCode::invalid_argument, "rf: min_samples_leaf must be smaller than the number of rows");
    const std::size_t draws = params.max_samples == 0 ? n : params.max_samples;
    if (params.bootstrap && draws > n) fail(ErrorCode::invalid_argument, "rf: max_samples exceeds the number of rows");

    const SortedColumns sorted = sort_columns(X);
    RandomForest rf;
    rf.trees.reserve(static_cast<std::size_t>(params.n_estimators));
    std::vector<double> weight(n);
    for (int t = 0; t < params.n_estimators; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t) + 1, 0x7EEE));
        if (params.bootstrap) {
            std::fill(weight.begin(), weight.end(), 0.0);
            for (std::size_t d = 0; d < draws; ++d) weight[rng.below(n)] += 1.0;
        } else {
            std::fill(weight.begin(), weight.end(), 1.0);
        }
        rf.trees.push_back(build_tree(X, sorted, y, weight, params.tree, rng).tree);
    }
    return rf;
}

Vector GradientBoost::decision(const Matrix& X, int n_trees) const {
    const std::size_t m = n_trees < 0 ? trees.size() : std::min(trees.size(), static_cast<std::size_t>(n_trees));
    Vector f = Vector::Constant(X.rows(), init);
    for (std::size_t t = 0; t < m; ++t)
        for (Eigen::Index i = 0; i < X.rows(); ++i) f(i) += learning_rate * trees[t].predict_row(X, i);
    return f;
}

Vector GradientBoost::predict(const Matrix& X) const {
    Vector f = decision(X);
    if (task == Task::classify) f = f.unaryExpr([](double z) { return logistic(z); });
    return f;
}

GradientBoost fit_gradient_boost(const Matrix& X, const Vector& y, Task task, const BoostParams& params,
                                 std::uint64_t seed) {
    if (!(params.learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "gradboost: learning_rate must be positive");
    if (params.n_estimators < 0) fail(ErrorCode::invalid_argument, "gradboost: n_estimators must be non-negative");
    if (!(params.subsample > 0.0 && params.subsample <= 1.0))
        fail(ErrorCode::invalid_argument, "gradboost: subsample must lie in (0, 1]");
    const auto n = static_cast<std::size_t>(X.rows());

    GradientBoost gb;
    gb.task = task;
    gb.learning_rate = params.learning_rate;
    if (task == Task::regress) {
        gb.init = y.mean();
    } else {
        const double rate = y.mean();
        if (rate <= 0.0 || rate >= 1.0) fail(ErrorCode::data, "gradboost: outcome needs both classes");
        gb.init = std::log(rate / (1.0 - rate));
    }
    if (params.n_estimators == 0) return gb;

    const SortedColumns sorted = sort_columns(X);
    Vector F = Vector::Constant(X.rows(), gb.init);
    Vector resid(X.rows());
    Vector prob(X.rows());
    std::vector<double> weight(n, 1.0);
    const auto n_inbag = std::max<std::size_t>(1, static_cast<std::size_t>(params.subsample * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);

    gb.trees.reserve(static_cast<std::size_t>(params.n_estimators));
    for (int m = 0; m < params.n_estimators; ++m) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(m) + 1, 0xB005));
        if (task == Task::regress) {
            resid = y - F;
        } else {
            for (Eigen::Index i = 0; i < F.size(); ++i) prob(i) = logistic(F(i));
            resid = y - prob;
        }
        if (n_inbag < n) {
            for (std::size_t i = 0; i < n; ++i) perm[i] = i;
            std::fill(weight.begin(), weight.end(), 0.0);
            for (std::size_t q = 0; q < n_inbag; ++q) {
                std::swap(perm[q], perm[q + rng.below(n - q)]);
                weight[perm[q]] = 1.0;
            }
        }
        TreeFit fit = build_tree(X, sorted, resid, weight, params.tree, rng);
        if (task == Task::classify) {
            std::vector<double> num(fit.tree.nodes.size(), 0.0), den(fit.tree.nodes.size(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (fit.leaf[i] < 0) continue;
                const auto l = static_cast<std::size_t>(fit.leaf[i]);
                num[l] += resid(static_cast<Eigen::Index>(i));
                const double pi = prob(static_cast<Eigen::Index>(i));
                den[l] += pi * (1.0 - pi);
            }
            for (std::size_t l = 0; l < fit.tree.nodes.size(); ++l) {
                auto& nd = fit.tree.nodes[l];
                if (nd.feature >= 0) continue;
                nd.value = std::abs(den[l]) < 1e-150 ? 0.0 : num[l] / den[l];
            }
        }
        for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += gb.learning_rate * fit.tree.predict_row(X, i);
        gb.trees.push_back(std::move(fit.tree));
    }
    return gb;
}

}  // namespace stackgen
