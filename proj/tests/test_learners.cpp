#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "stackgen/learners.hpp"
#include "stackgen/tree.hpp"
#include "support.hpp"

using namespace stackgen;

namespace {

std::vector<std::size_t> all_columns(const Matrix& X) {
    std::vector<std::size_t> c(static_cast<std::size_t>(X.cols()));
    for (std::size_t j = 0; j < c.size(); ++j) c[j] = j;
    return c;
}

FittedLearner fit(Method m, Task task, const std::string& opts, const Matrix& X, const Vector& y,
                  const std::string& pipe = "", std::uint64_t seed = 1) {
    return fit_learner(make_learner(m, task, opts, pipe), X, y, all_columns(X), seed);
}

double mse(const Vector& a, const Vector& b) { return (a - b).squaredNorm() / static_cast<double>(a.size()); }

std::string lookup(const OptionMap& m, const std::string& key) {
    for (const auto& [k, v] : m)
        if (k == key) return v;
    return "<absent>";
}

struct QuietWarnings {
    QuietWarnings() { set_warning_handler([](const std::string&) {}); }
    ~QuietWarnings() { set_warning_handler({}); }
};

// Penalised logistic regression by plain Newton iterations on [b, w].
Vector newton_logit(const Matrix& X, const Vector& y, double C) {
    const Eigen::Index n = X.rows(), p = X.cols();
    Matrix A(n, p + 1);
    A.col(0).setOnes();
    A.rightCols(p) = X;
    Vector theta = Vector::Zero(p + 1);
    for (int it = 0; it < 100; ++it) {
        const Vector z = A * theta;
        Vector prob(n), wgt(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            prob(i) = 1.0 / (1.0 + std::exp(-z(i)));
            wgt(i) = prob(i) * (1.0 - prob(i));
        }
        Vector grad = C * A.transpose() * (prob - y);
        grad.tail(p) += theta.tail(p);
        Matrix H = C * A.transpose() * wgt.asDiagonal() * A;
        H.diagonal().tail(p).array() += 1.0;
        theta -= H.ldlt().solve(grad);
    }
    return theta;
}

}  // namespace

TEST_CASE("registry matches the method/type table") {
    const auto table = learner_table();
    CHECK(table.size() == 18);
    CHECK(supports(Method::ols, Task::regress));
    CHECK(!supports(Method::ols, Task::classify));
    CHECK(!supports(Method::logit, Task::regress));
    CHECK(!supports(Method::lassoic, Task::classify));
    CHECK(!supports(Method::linsvm, Task::regress));
    for (Method m : {Method::lassocv, Method::ridgecv, Method::elasticcv, Method::svm, Method::gradboost, Method::rf,
                     Method::nnet}) {
        CHECK(supports(m, Task::regress));
        CHECK(supports(m, Task::classify));
    }
    CHECK_THROWS_WITH_AS(parse_method("xgboost"), doctest::Contains("unknown method"), Error);
}

TEST_CASE("default options") {
    const auto gb = default_options(Method::gradboost, Task::regress);
    CHECK(lookup(gb, "learning_rate") == "0.1");
    CHECK(lookup(gb, "n_estimators") == "100");
    CHECK(lookup(gb, "max_depth") == "3");
    const auto lc = default_options(Method::lassocv, Task::regress);
    CHECK(lookup(lc, "l1_ratio") == "1");
    CHECK(lookup(lc, "eps") == "0.001");
    CHECK(lookup(lc, "n_alphas") == "100");
    CHECK(lookup(lc, "cv") == "5");
    CHECK(lookup(default_options(Method::ridgecv, Task::regress), "l1_ratio") == "0");
    CHECK(lookup(default_options(Method::elasticcv, Task::regress), "l1_ratio") == "0.5");
    CHECK(lookup(default_options(Method::rf, Task::classify), "max_features") == "sqrt");
    CHECK(lookup(default_options(Method::rf, Task::regress), "max_features") == "None");
    const auto nn = default_options(Method::nnet, Task::regress);
    CHECK(lookup(nn, "hidden_layer_sizes") == "100");
    CHECK(lookup(nn, "activation") == "relu");
    CHECK(lookup(nn, "max_iter") == "200");
    CHECK(lookup(nn, "validation_fraction") == "0.1");
    CHECK(lookup(default_options(Method::svm, Task::regress), "epsilon") == "0.1");
    CHECK(lookup(default_options(Method::svm, Task::regress), "C") == "1");
    CHECK_THROWS_WITH_AS(default_options(Method::lassoic, Task::classify), doctest::Contains("does not support"), Error);
}

TEST_CASE("option strings") {
    const auto o = parse_options("hidden_layer_sizes(5 5) alpha(0.01)");
    REQUIRE(o.size() == 2);
    CHECK(o[0].second == "5 5");
    CHECK(parse_options(format_options(o)) == o);
    CHECK_THROWS_WITH_AS(parse_options("alpha"), doctest::Contains("malformed"), Error);
    CHECK_THROWS_WITH_AS(parse_options("alpha(1"), doctest::Contains("malformed"), Error);
    CHECK_THROWS_WITH_AS(parse_options("alpha(1) alpha(2)"), doctest::Contains("given twice"), Error);
    CHECK_THROWS_WITH_AS(make_learner(Method::ols, Task::regress, "alpha(1)"), doctest::Contains("unknown option"), Error);
    CHECK_THROWS_AS(make_learner(Method::gradboost, Task::regress, "learning_rate(-0.1)"), Error);
    CHECK_THROWS_AS(make_learner(Method::svm, Task::regress, "C(0)"), Error);
    CHECK_THROWS_AS(make_learner(Method::svm, Task::regress, "epsilon(-1)"), Error);
    CHECK_THROWS_AS(make_learner(Method::nnet, Task::regress, "hidden_layer_sizes(0)"), Error);
    CHECK_THROWS_AS(make_learner(Method::logit, Task::regress), Error);
}

TEST_CASE("effective options and pipelines") {
    const auto l = make_learner(Method::lassocv, Task::regress);
    CHECK(lookup(effective_options(l, 7), "cv") == "7");
    CHECK(lookup(effective_options(make_learner(Method::lassocv, Task::regress, "cv(3)"), 7), "cv") == "3");
    CHECK(to_string(effective_pipeline(l)) == "stdscaler");
    CHECK(to_string(effective_pipeline(make_learner(Method::lassocv, Task::regress, "", "medianimputer"))) ==
          "medianimputer stdscaler");
    CHECK(!effective_pipeline(make_learner(Method::lassocv, Task::regress, "", "nostdscaler")).contains(StepKind::stdscaler));
    CHECK(effective_pipeline(make_learner(Method::rf, Task::regress)).steps.empty());
}

TEST_CASE("ols recovers an exact line") {
    Matrix X(5, 1);
    X << 0, 1, 2, 3, 4;
    const Vector y = (2.0 * X.col(0)).array() + 1.0;
    const auto f = fit(Method::ols, Task::regress, "", X, y);
    const auto& lm = std::get<LinearModel>(f.model);
    CHECK(std::abs(lm.coef(0) - 2.0) < 1e-10);
    CHECK(std::abs(lm.intercept - 1.0) < 1e-10);
}

TEST_CASE("ols residuals are orthogonal to the predictors") {
    Rng rng(5);
    const Matrix X = testing::normal_matrix(60, 4, rng);
    const Vector y = testing::normal_vector(60, rng) * 10.0;
    const auto lm = fit_ols(X, y);
    const Vector r = y - lm.predict(X);
    CHECK((X.transpose() * r).cwiseAbs().maxCoeff() < 1e-8 * y.norm());
    CHECK(std::abs(r.sum()) < 1e-8 * y.norm());
}

TEST_CASE("single unbootstrapped full tree memorises distinct rows") {
    Rng rng(17);
    const Matrix X = testing::normal_matrix(20, 3, rng);
    const Vector y = testing::normal_vector(20, rng);
    const auto f = fit(Method::rf, Task::regress, "n_estimators(1) bootstrap(False)", X, y);
    CHECK(mse(f.predict(X), y) == 0.0);
}

TEST_CASE("lassocv with one huge penalty is intercept only") {
    Rng rng(2);
    const Matrix X = testing::normal_matrix(40, 3, rng);
    const Vector y = X.col(0) + testing::normal_vector(40, rng);
    const auto f = fit(Method::lassocv, Task::regress, "alphas(1e6)", X, y);
    const auto& lm = std::get<LinearModel>(f.model);
    CHECK(lm.coef.isZero());
    CHECK(lm.intercept == doctest::Approx(y.mean()).epsilon(1e-12));
}

TEST_CASE("logit matches an independent Newton solver") {
    Matrix X(10, 2);
    X << -2, 1, -1.5, -1, -1, 0.5, -0.5, 2, 0, -0.3, 0.4, 1.2, 0.8, -1.1, 1.2, 0.2, 1.7, -0.6, 2.2, 0.9;
    Vector y(10);
    y << 0, 0, 0, 1, 0, 1, 0, 1, 1, 1;
    const Vector oracle = newton_logit(X, y, 1.0);
    const auto lm = fit_logit(X, y, {1.0, true, 100, 1e-12});
    CHECK(std::abs(lm.intercept - oracle(0)) < 1e-8);
    CHECK((lm.coef - oracle.tail(2)).cwiseAbs().maxCoeff() < 1e-8);
    const auto f = fit(Method::logit, Task::classify, "", X, y);
    CHECK(f.predict(X)(9) > 0.5);
}

TEST_CASE("soft thresholding on an orthonormal design") {
    Rng rng(8);
    const Eigen::Index n = 50, p = 4;
    const Matrix Q = Eigen::HouseholderQR<Matrix>(testing::normal_matrix(n, p, rng)).householderQ() * Matrix::Identity(n, p);
    const Matrix X = std::sqrt(static_cast<double>(n)) * Q;
    const Vector y = X * Vector::LinSpaced(p, -1.0, 1.5) + testing::normal_vector(n, rng);
    const Vector ols = X.transpose() * y / static_cast<double>(n);
    for (int t = 0; t < 20; ++t) {
        const double lambda = 1.6 * rng.uniform();
        const auto lm = fit_elastic_net(X, y, Task::regress, lambda, {1.0, false, 1000, 1e-14});
        for (Eigen::Index j = 0; j < p; ++j) CHECK(std::abs(lm.coef(j) - soft_threshold(ols(j), lambda)) < 1e-8);
    }
}

TEST_CASE("ridge path point matches the closed form") {
    Rng rng(4);
    const Eigen::Index n = 60, p = 4;
    const Matrix X = testing::normal_matrix(n, p, rng);
    const Vector y = X * Vector::LinSpaced(p, 1.0, -1.0) + testing::normal_vector(n, rng);
    const double lambda = 0.3;
    const Matrix Xc = X.rowwise() - X.colwise().mean();
    const Vector yc = y.array() - y.mean();
    const Vector beta = (Xc.transpose() * Xc + static_cast<double>(n) * lambda * Matrix::Identity(p, p)).ldlt().solve(
        Xc.transpose() * yc);
    const auto lm = fit_elastic_net(X, y, Task::regress, lambda, {0.0, true, 100000, 1e-15});
    CHECK((lm.coef - beta).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(lm.intercept - (y.mean() - X.colwise().mean().dot(beta))) < 1e-8);
}

TEST_CASE("lambda grid endpoints") {
    Rng rng(6);
    const Matrix X = testing::normal_matrix(30, 3, rng);
    const Vector y = testing::normal_vector(30, rng);
    const Matrix Xc = X.rowwise() - X.colwise().mean();
    const double oracle = (Xc.transpose() * (y.array() - y.mean()).matrix()).cwiseAbs().maxCoeff() / 30.0;
    const double lmax = enet_lambda_max(X, y, Task::regress, 1.0, true);
    CHECK(lmax == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(enet_lambda_max(X, y, Task::regress, 0.5, true) == doctest::Approx(2.0 * oracle).epsilon(1e-12));
    const auto g = enet_grid(lmax, 0.001, 100);
    CHECK(g.size() == 100);
    CHECK(g.front() == lmax);
    CHECK(g.back() == 0.001 * lmax);
    const auto fit_at_max = fit_elastic_net(X, y, Task::regress, lmax, {1.0, true, 1000, 1e-12});
    CHECK(fit_at_max.coef.isZero());
}

TEST_CASE("elastic net KKT conditions on correlated designs") {
    Rng rng(12);
    for (int t = 0; t < 10; ++t) {
        const Eigen::Index n = 80, p = 6;
        Matrix X = testing::normal_matrix(n, p, rng);
        for (Eigen::Index j = 1; j < p; ++j) X.col(j) = 0.7 * X.col(j - 1) + 0.3 * X.col(j);
        const Vector y = X.col(0) - 0.5 * X.col(3) + testing::normal_vector(n, rng);
        const double alpha = t % 2 ? 1.0 : 0.5;
        const double lambda = enet_lambda_max(X, y, Task::regress, alpha, true) * (0.05 + 0.5 * rng.uniform());
        const auto lm = fit_elastic_net(X, y, Task::regress, lambda, {alpha, true, 100000, 1e-12});
        const Vector r = y - lm.predict(X);
        const Matrix Xc = X.rowwise() - X.colwise().mean();
        const Vector g = Xc.transpose() * r / static_cast<double>(n);
        for (Eigen::Index j = 0; j < p; ++j) {
            if (lm.coef(j) == 0.0) {
                CHECK(std::abs(g(j)) <= lambda * alpha + 1e-6);
            } else {
                const double target = lambda * (alpha * (lm.coef(j) > 0 ? 1.0 : -1.0) + (1.0 - alpha) * lm.coef(j));
                CHECK(std::abs(g(j) - target) <= 1e-6);
            }
        }
    }
}

TEST_CASE("information criterion lasso") {
    Rng rng(21);
    const Eigen::Index n = 200;
    const Matrix X = testing::normal_matrix(n, 5, rng);
    const Vector noise = testing::normal_vector(n, rng);
    const EnetSettings s{1.0, true, 10000, 1e-10};

    const auto bic = fit_lasso_ic(X, noise, InfoCriterion::bic, 1e-3, 100, s);
    CHECK(bic.model.coef.isZero());
    // exhaustive re-evaluation of the criterion along the stored path
    const auto path = enet_path(X, noise, Task::regress, bic.lambdas, s);
    std::size_t best = 0;
    double best_value = INFINITY;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double rss = (noise - path[k].predict(X)).squaredNorm();
        int df = 0;
        for (Eigen::Index j = 0; j < 5; ++j) df += path[k].coef(j) != 0.0;
        const double value = static_cast<double>(n) * std::log(rss / static_cast<double>(n)) + std::log(static_cast<double>(n)) * df;
        CHECK(value == doctest::Approx(bic.criterion[k]).epsilon(1e-9));
        if (value < best_value) {
            best_value = value;
            best = k;
        }
    }
    CHECK(bic.lambda == bic.lambdas[best]);

    const double var = (noise.array() - noise.mean()).square().mean();
    CHECK(bic.df[0] == 0);
    CHECK(bic.criterion[0] == doctest::Approx(static_cast<double>(n) * std::log(var)).epsilon(1e-9));

    const Vector strong = 3.0 * X.col(2) + noise;
    for (auto ic : {InfoCriterion::aic, InfoCriterion::bic}) {
        const auto r = fit_lasso_ic(X, strong, ic, 1e-3, 100, s);
        CHECK(r.model.coef(2) != 0.0);
    }
}

TEST_CASE("random forest basics") {
    Rng rng(30);
    const Matrix X = testing::normal_matrix(50, 3, rng);
    const Vector c = Vector::Constant(50, 4.25);
    const auto flat = fit_random_forest(X, c, {}, 1);
    CHECK((flat.predict(X).array() == 4.25).all());

    const Vector y = testing::normal_vector(50, rng);
    const auto rf = fit_random_forest(X, y, {20, {}, true, 0}, 3);
    Vector mean = Vector::Zero(50);
    for (const auto& t : rf.trees) mean += t.predict(X);
    mean /= static_cast<double>(rf.trees.size());
    CHECK((rf.predict(X) - mean).cwiseAbs().maxCoeff() < 1e-12);

    RandomForest reversed = rf;
    std::reverse(reversed.trees.begin(), reversed.trees.end());
    CHECK((reversed.predict(X) - rf.predict(X)).cwiseAbs().maxCoeff() < 1e-12);

    const auto again = fit_random_forest(X, y, {20, {}, true, 0}, 3);
    CHECK(again.predict(X) == rf.predict(X));
}

TEST_CASE("depth one stump splits a binary predictor exactly") {
    Matrix X(20, 1);
    Vector y(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
        X(i, 0) = i % 2;
        y(i) = i % 2 ? 3.0 : -1.0;
    }
    ForestParams p;
    p.n_estimators = 10;
    p.tree.max_depth = 1;
    CHECK(mse(fit_random_forest(X, y, p, 9).predict(X), y) == 0.0);
}

TEST_CASE("gradient boosting identities") {
    Rng rng(40);
    const Matrix X = testing::normal_matrix(60, 3, rng);
    const Vector y = X.col(0).array().sin() + 0.1 * testing::normal_vector(60, rng).array();

    BoostParams none;
    none.n_estimators = 0;
    const auto g0 = fit_gradient_boost(X, y, Task::regress, none, 1);
    CHECK((g0.predict(X).array() == y.mean()).all());

    Vector labels(60);
    for (Eigen::Index i = 0; i < 60; ++i) labels(i) = i % 3 == 0 ? 1.0 : 0.0;
    const auto c0 = fit_gradient_boost(X, labels, Task::classify, none, 1);
    CHECK(c0.predict(X)(0) == doctest::Approx(labels.mean()).epsilon(1e-12));

    BoostParams one;
    one.learning_rate = 1.0;
    one.n_estimators = 1;
    one.tree.max_depth = 50;
    const auto g1 = fit_gradient_boost(X, y, Task::regress, one, 1);
    Rng tree_rng(1);
    const Vector resid = y.array() - y.mean();
    const auto tf = build_tree(X, sort_columns(X), resid, std::vector<double>(60, 1.0), one.tree, tree_rng);
    const Vector single = tf.tree.predict(X).array() + y.mean();
    CHECK((g1.predict(X) - single).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("boosting training loss is non-increasing") {
    const auto d = testing::friedman_like(100, 3);
    const auto gb = fit_gradient_boost(d.X, d.y, Task::regress, {}, 5);
    double prev = INFINITY;
    for (int m = 0; m <= 100; ++m) {
        const double loss = mse(gb.decision(d.X, m), d.y);
        CHECK(loss <= prev + 1e-12);
        prev = loss;
    }
    BoostParams slow;
    slow.learning_rate = 0.01;
    CHECK(mse(fit_gradient_boost(d.X, d.y, Task::regress, slow, 5).predict(d.X), d.y) > mse(gb.predict(d.X), d.y));
}

TEST_CASE("linear svm on separable points") {
    Matrix X(2, 1);
    X << -1, 1;
    Vector y(2);
    y << 0, 1;
    const auto s = fit_linear_svm(X, y, Task::classify, {});
    const Vector f = s.decision(X);
    CHECK(f(0) <= -1.0 + 1e-6);
    CHECK(f(1) >= 1.0 - 1e-6);

    Rng rng(50);
    Matrix Xs(20, 2);
    Vector ys(20);
    for (Eigen::Index i = 0; i < 20; ++i) {
        ys(i) = i % 2;
        Xs(i, 0) = (ys(i) ? 2.0 : -2.0) + 0.5 * rng.normal();
        Xs(i, 1) = rng.normal();
    }
    SvmOptions o;
    const Vector f1 = fit_linear_svm(Xs, ys, Task::classify, o).decision(Xs);
    o.C = 2.0;
    const Vector f2 = fit_linear_svm(Xs, ys, Task::classify, o).decision(Xs);
    for (Eigen::Index i = 0; i < 20; ++i) {
        CHECK((f1(i) > 0) == (ys(i) == 1.0));
        CHECK((f2(i) > 0) == (f1(i) > 0));
    }
}

TEST_CASE("svr with a wide tube is flat and beats a grid search") {
    Rng rng(51);
    Matrix X(15, 1);
    Vector y(15);
    for (Eigen::Index i = 0; i < 15; ++i) {
        X(i, 0) = rng.uniform();
        y(i) = 0.5 * rng.uniform();
    }
    SvmOptions o;
    o.epsilon = 2.0;
    const auto s = fit_linear_svm(X, y, Task::regress, o);
    CHECK(std::abs(s.coef(0)) < 1e-9);
    const double ours = svm_primal_objective(X, y, Task::regress, o, s.coef, s.intercept);
    double grid = INFINITY;
    for (int a = -100; a <= 100; ++a)
        for (int b = -100; b <= 100; ++b) {
            Vector w(1);
            w << a * 0.02;
            grid = std::min(grid, svm_primal_objective(X, y, Task::regress, o, w, b * 0.02));
        }
    CHECK(ours <= grid + 1e-9);
}

TEST_CASE("svr objective is no worse than a grid search") {
    Rng rng(52);
    Matrix X(25, 1);
    Vector y(25);
    for (Eigen::Index i = 0; i < 25; ++i) {
        X(i, 0) = rng.uniform(-1, 1);
        y(i) = 0.8 * X(i, 0) + 0.3 * rng.normal();
    }
    SvmOptions o;
    o.tol = 1e-8;
    const auto s = fit_linear_svm(X, y, Task::regress, o);
    const double ours = svm_primal_objective(X, y, Task::regress, o, s.coef, s.intercept);
    double grid = INFINITY;
    for (int a = -100; a <= 100; ++a)
        for (int b = -100; b <= 100; ++b) {
            Vector w(1);
            w << a * 0.02;
            grid = std::min(grid, svm_primal_objective(X, y, Task::regress, o, w, b * 0.01));
        }
    CHECK(ours <= grid + 1e-6);
}

TEST_CASE("mlp gradient matches central differences") {
    Rng rng(60);
    for (int cfg = 0; cfg < 12; ++cfg) {
        const auto act = static_cast<Activation>(cfg % 3);
        const Task task = cfg % 2 ? Task::classify : Task::regress;
        Mlp net = init_mlp(3, {2}, act, task, rng);
        const Matrix X = testing::normal_matrix(7, 3, rng);
        Vector y = testing::normal_vector(7, rng);
        if (task == Task::classify) y = y.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
        MlpGradient g;
        mlp_loss_gradient(net, X, y, 0.01, &g);
        const double h = 1e-6;
        double worst = 0.0;
        auto probe = [&](double& param, double analytic) {
            const double keep = param;
            param = keep + h;
            const double up = mlp_loss_gradient(net, X, y, 0.01, nullptr);
            param = keep - h;
            const double down = mlp_loss_gradient(net, X, y, 0.01, nullptr);
            param = keep;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
            worst = std::max(worst, std::abs(analytic - numeric) / scale);
        };
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) probe(net.weights[l].data()[i], g.weights[l].data()[i]);
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) probe(net.biases[l](i), g.biases[l](i));
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("mlp with zero output weights is constant") {
    Rng rng(61);
    for (Task task : {Task::regress, Task::classify}) {
        Mlp net = init_mlp(3, {4}, Activation::tanh, task, rng);
        net.weights.back().setZero();
        net.biases.back()(0) = 0.7;
        const Matrix X = testing::normal_matrix(5, 3, rng);
        const Vector out = net.predict(X);
        const double expected = task == Task::regress ? 0.7 : 1.0 / (1.0 + std::exp(-0.7));
        for (Eigen::Index i = 0; i < 5; ++i) CHECK(out(i) == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("mlp fitting is deterministic and validates layers") {
    QuietWarnings quiet;
    const auto d = testing::friedman_like(60, 2);
    MlpOptions o;
    o.hidden_layer_sizes = {5};
    o.max_iter = 20;
    const Mlp a = fit_mlp(d.X, d.y, Task::regress, o, 77);
    const Mlp b = fit_mlp(d.X, d.y, Task::regress, o, 77);
    CHECK(a.weights[0] == b.weights[0]);
    CHECK(a.predict(d.X) == b.predict(d.X));
    o.early_stopping = true;
    const Mlp c = fit_mlp(d.X, d.y, Task::regress, o, 77);
    CHECK(c.predict(d.X).allFinite());
    Rng rng(1);
    CHECK_THROWS_AS(init_mlp(3, {}, Activation::relu, Task::regress, rng), Error);
    CHECK_THROWS_AS(init_mlp(3, {0}, Activation::relu, Task::regress, rng), Error);
}

TEST_CASE("classification learners return probabilities") {
    QuietWarnings quiet;
    const auto d = testing::logistic_data(120, 70);
    Rng rng(71);
    const Matrix Xnew = 3.0 * testing::normal_matrix(40, 4, rng);
    for (const auto& [m, t] : learner_table()) {
        if (t != Task::classify) continue;
        const std::string opts = m == Method::nnet ? "hidden_layer_sizes(8) max_iter(30)" : "";
        const auto f = fit(m, Task::classify, opts, d.X, d.y);
        for (const Matrix* X : {&d.X, &Xnew}) {
            const Vector p = f.predict(*X);
            CHECK(p.minCoeff() >= 0.0);
            CHECK(p.maxCoeff() <= 1.0);
        }
        CHECK(f.predict(d.X) == f.predict(d.X));
    }
}

TEST_CASE("fit_learner guards") {
    const auto d = testing::friedman_like(30, 1);
    Matrix gaps = d.X;
    gaps(3, 1) = NAN;
    CHECK_THROWS_WITH_AS(fit(Method::ols, Task::regress, "", gaps, d.y), doctest::Contains("imputer"), Error);
    CHECK_NOTHROW(fit(Method::ols, Task::regress, "", gaps, d.y, "medianimputer"));
    const auto l = make_learner(Method::ols, Task::regress, "", "", {"x2", "nope"});
    CHECK_THROWS_WITH_AS(resolve_columns(l, d.colnames), doctest::Contains("missing column"), Error);
    const auto sub = make_learner(Method::ols, Task::regress, "", "", {"x3", "x1"});
    CHECK(resolve_columns(sub, d.colnames) == std::vector<std::size_t>{2, 0});
}

TEST_CASE("max_features and max_samples forms") {
    const auto d = testing::friedman_like(50, 9);
    for (const char* opts : {"max_features(sqrt)", "max_features(log2)", "max_features(2)", "max_features(0.5)",
                             "max_samples(0.5)", "max_samples(20)"}) {
        const auto f = fit(Method::rf, Task::regress, std::string("n_estimators(5) ") + opts, d.X, d.y);
        CHECK(f.predict(d.X).allFinite());
    }
}

TEST_CASE("numeric option ranges") {
    for (const char* bad : {"n_estimators(-1)", "subsample(0)", "subsample(1.5)"})
        CHECK_THROWS_AS(make_learner(Method::gradboost, Task::regress, bad), Error);
    CHECK_NOTHROW(make_learner(Method::gradboost, Task::regress, "learning_rate(0) n_estimators(0)"));
    CHECK_THROWS_AS(make_learner(Method::rf, Task::regress, "n_estimators(0)"), Error);
    CHECK_THROWS_AS(make_learner(Method::lassocv, Task::regress, "cv(1)"), Error);
    CHECK_THROWS_AS(make_learner(Method::lassocv, Task::regress, "eps(0)"), Error);
    CHECK_THROWS_AS(make_learner(Method::nnet, Task::regress, "alpha(-1)"), Error);
    CHECK_THROWS_AS(make_learner(Method::nnet, Task::regress, "validation_fraction(1)"), Error);
}
