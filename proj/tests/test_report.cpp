#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <regex>

#include "doctest.h"
#include "stackgen/report.hpp"
#include "support.hpp"

using namespace stackgen;

namespace {

struct Split {
    Dataset train;
    Matrix X_holdout;
    Vector y_holdout;
};

Split split(const Dataset& d, Eigen::Index n_train) {
    Split s;
    s.train = d;
    s.train.X = d.X.topRows(n_train);
    s.train.y = d.y.head(n_train);
    s.X_holdout = d.X.bottomRows(d.X.rows() - n_train);
    s.y_holdout = d.y.tail(d.y.size() - n_train);
    return s;
}

StackModel fit(const Dataset& d, Task task, FinalEstimator finalest = FinalEstimator::nnls1) {
    StackSpec s;
    s.task = task;
    s.seed = 11;
    s.finalest = finalest;
    if (task == Task::regress)
        s.learners = {make_learner(Method::ols, task), make_learner(Method::rf, task, "n_estimators(20)"),
                      make_learner(Method::gradboost, task, "n_estimators(20)")};
    else
        s.learners = {make_learner(Method::logit, task), make_learner(Method::rf, task, "n_estimators(20)"),
                      make_learner(Method::rf, task, "n_estimators(5) max_depth(2)")};
    return fit_stack(s, d);
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("rmspe values") {
    Vector y(2), p(2);
    y << 0, 0;
    p << 3, 4;
    CHECK(rmspe(y, p) == doctest::Approx(3.53553).epsilon(1e-6));
    CHECK(rmspe(p, p) == 0.0);
    CHECK_THROWS_AS(rmspe(y, Vector::Zero(3)), Error);
    CHECK_THROWS_AS(rmspe(Vector(0), Vector(0)), Error);
}

TEST_CASE("confusion counts") {
    Vector y(2), p(2);
    y << 1, 0;
    p << 0.9, 0.1;
    const auto c = confusion(y, p);
    CHECK(c.count[1][1] == 1);
    CHECK(c.count[0][0] == 1);
    CHECK(c.count[0][1] == 0);
    CHECK(c.count[1][0] == 0);
    CHECK(c.accuracy() == 1.0);

    const auto all = confusion(y, p, 0.0);
    CHECK(all.count[1][0] + all.count[1][1] == 2);
    CHECK(all.count[1][1] == 1);
    CHECK(all.count[1][0] == 1);

    Confusion spam_holdout;
    spam_holdout.count[0][0] = 678;
    spam_holdout.count[1][1] = 397;
    spam_holdout.count[0][1] = 29;
    spam_holdout.count[1][0] = 29;
    CHECK(spam_holdout.total() == 1133);
    CHECK(spam_holdout.accuracy() == doctest::Approx(0.949).epsilon(5e-4));
}

TEST_CASE("roc curve agrees with the pairwise statistic") {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.below(200));
        Vector s(n), l(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            s(i) = std::round(rng.uniform() * 10.0) / 10.0;
            l(i) = i < 2 ? static_cast<double>(i) : (rng.uniform() < 0.4 ? 1.0 : 0.0);
        }
        const auto roc = roc_curve(s, l);
        CHECK(std::abs(roc.auc - auc_pairwise(s, l)) < 1e-12);
        CHECK(roc.points.front().fpr == 0.0);
        CHECK(roc.points.front().tpr == 0.0);
        CHECK(roc.points.back().fpr == 1.0);
        CHECK(roc.points.back().tpr == 1.0);
        for (std::size_t k = 1; k < roc.points.size(); ++k) {
            CHECK(roc.points[k].fpr >= roc.points[k - 1].fpr);
            CHECK(roc.points[k].tpr >= roc.points[k - 1].tpr);
        }
        const auto reversed = roc_curve(-s, l);
        CHECK(std::abs(reversed.auc - (1.0 - roc.auc)) < 1e-12);
    }
}

TEST_CASE("roc extremes") {
    Vector s(4), l(4);
    s << 0.1, 0.2, 0.8, 0.9;
    l << 0, 0, 1, 1;
    CHECK(roc_curve(s, l).auc == 1.0);
    CHECK_THROWS_WITH_AS(roc_curve(s, Vector::Ones(4)), doctest::Contains("both classes"), Error);

    Rng rng(2);
    Vector rs(2000), rl(2000);
    for (Eigen::Index i = 0; i < 2000; ++i) {
        rs(i) = rng.uniform();
        rl(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    CHECK(std::abs(roc_curve(rs, rl).auc - 0.5) <= 0.05);
}

TEST_CASE("probability histogram") {
    Vector p(6);
    p << 0.0, 0.05, 0.5, 0.999, 1.0, 1.0;
    const auto h = probability_histogram(p);
    long total = 0;
    for (long c : h) total += c;
    CHECK(total == 6);
    CHECK(h[0] == 1);
    CHECK(h[1] == 1);
    CHECK(h[10] == 1);
    CHECK(h[19] == 3);
}

TEST_CASE("regression evaluation") {
    const auto s = split(testing::friedman_like(200, 3), 150);
    const auto m = fit(s.train, Task::regress);
    const auto r = evaluate(m, {s.train.X, s.X_holdout, s.y_holdout});
    REQUIRE(r.rows.size() == 4);
    CHECK(r.rows[0].label == "STACKING");
    CHECK(!r.rows[0].weight);
    CHECK(r.has_holdout);
    CHECK(r.holdout_count == 50);

    const Vector cv_stack = m.final_fit.combine(m.Z);
    CHECK(*r.rows[0].rmspe[cross_validated] == rmspe(m.y, cv_stack));
    const Matrix refit = predict_base(m, s.train.X);
    CHECK(*r.rows[1].rmspe[in_sample] == rmspe(m.y, refit.col(0)));
    CHECK(*r.rows[2].rmspe[cross_validated] == rmspe(m.y, m.Z.col(1)));
    const Matrix hold = predict_base(m, s.X_holdout);
    CHECK(*r.rows[3].rmspe[holdout] == rmspe(s.y_holdout, hold.col(2)));
    for (const auto& row : r.rows)
        for (const auto& v : row.rmspe) CHECK(*v >= 0.0);

    double best_cv = INFINITY;
    for (std::size_t j = 1; j < r.rows.size(); ++j) best_cv = std::min(best_cv, *r.rows[j].rmspe[cross_validated]);
    CHECK(*r.rows[0].rmspe[cross_validated] <= best_cv + 1e-9);

    const std::string text = format_report(r);
    CHECK(text.find("Number of holdout observations: 50\n\n") != std::string::npos);
    CHECK(text.find("  Method         | Weight   In-Sample        CV         Holdout\n") != std::string::npos);
    CHECK(text.find("  STACKING       |    . ") != std::string::npos);
    CHECK(text.find(std::string(17, '-') + "+" + std::string(47, '-')) != std::string::npos);

    const auto no_hold = evaluate(m, {s.train.X, std::nullopt, std::nullopt});
    CHECK(!no_hold.has_holdout);
    CHECK(!no_hold.rows[0].rmspe[holdout]);
    CHECK_THROWS_WITH_AS(evaluate(m, {s.train.X, Matrix(0, 4), Vector(0)}), doctest::Contains("whole sample"), Error);
    CHECK_THROWS_AS(confusion_table(m, {s.train.X, std::nullopt, std::nullopt}), Error);
}

TEST_CASE("singlebest stacking reproduces the chosen learner") {
    const auto s = split(testing::friedman_like(160, 4), 120);
    const auto m = fit(s.train, Task::regress, FinalEstimator::singlebest);
    const auto r = rmspe_table(m, {s.train.X, s.X_holdout, s.y_holdout});
    Eigen::Index chosen = 0;
    m.final_fit.weights.maxCoeff(&chosen);
    for (int part : {in_sample, cross_validated, holdout})
        CHECK(*r.rows[0].rmspe[part] == *r.rows[static_cast<std::size_t>(chosen) + 1].rmspe[part]);
}

TEST_CASE("classification evaluation") {
    const auto s = split(testing::logistic_data(240, 5), 180);
    const auto m = fit(s.train, Task::classify);
    const auto r = confusion_table(m, {s.train.X, s.X_holdout, s.y_holdout});
    for (const auto& row : r.rows) {
        CHECK(row.confusion[in_sample]->total() == 180);
        CHECK(row.confusion[cross_validated]->total() == 180);
        CHECK(row.confusion[holdout]->total() == 60);
    }
    const std::string text = format_report(r);
    CHECK(text.find("Number of holdout observations: 60") != std::string::npos);
    CHECK(text.find("  STACKING     0 |") != std::string::npos);
    CHECK(text.find("  STACKING     1 |") != std::string::npos);
    CHECK(text.find(std::string(17, '-') + "+" + std::string(59, '-')) != std::string::npos);
    CHECK(learner_labels(m) == std::vector<std::string>{"logit", "rf_2", "rf_3"});
    CHECK_THROWS_AS(rmspe_table(m, {s.train.X, std::nullopt, std::nullopt}), Error);
}

TEST_CASE("regression plot files") {
    const auto s = split(testing::friedman_like(120, 6), 90);
    const auto m = fit(s.train, Task::regress);
    const auto dir = testing::temp_dir("plots_regress");
    const auto files = emit_plots(m, {s.train.X, s.X_holdout, s.y_holdout}, dir.string(), {"My title", "", "", "", false});
    CHECK(files.size() == 5);
    const std::string csv = testing::read_text(dir / "scatter.csv");
    CHECK(csv.rfind("observed,predicted,learner,partition\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 4 * 30);
    CHECK(csv.find(",holdout\n") != std::string::npos);

    const std::string svg = testing::read_text(dir / "scatter_STACKING.svg");
    CHECK(svg.find("My title") != std::string::npos);
    std::smatch match;
    REQUIRE(std::regex_search(svg, match, std::regex("class=\"reference\"[^>]*data-from=\"([^,]+),([^\"]+)\" data-to=\"([^,]+),([^\"]+)\"")));
    const double lo = s.y_holdout.minCoeff(), hi = s.y_holdout.maxCoeff();
    CHECK(std::stod(match[1]) == lo);
    CHECK(std::stod(match[2]) == lo);
    CHECK(std::stod(match[3]) == hi);
    CHECK(std::stod(match[4]) == hi);

    const auto in_sample_dir = testing::temp_dir("plots_in_sample");
    emit_plots(m, {s.train.X, std::nullopt, std::nullopt}, in_sample_dir.string());
    CHECK(count_lines(testing::read_text(in_sample_dir / "scatter.csv")) == 1 + 4 * 90);
}

TEST_CASE("classification plot files") {
    const auto s = split(testing::logistic_data(200, 7), 150);
    const auto m = fit(s.train, Task::classify);
    const auto dir = testing::temp_dir("plots_classify");
    PlotOptions opt;
    opt.histogram = true;
    const auto files = emit_plots(m, {s.train.X, s.X_holdout, s.y_holdout}, dir.string(), opt);
    CHECK(files.size() == 10);
    const std::string roc = testing::read_text(dir / "roc.csv");
    CHECK(roc.rfind("fpr,tpr,threshold,learner,partition\n0,0,inf,STACKING,holdout\n", 0) == 0);
    CHECK(testing::read_text(dir / "roc_rf_2.svg").find("AUC = ") != std::string::npos);

    const std::string hist = testing::read_text(dir / "histogram.csv");
    std::istringstream lines(hist);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "bin_lower,bin_upper,count,learner,partition");
    std::map<std::string, long> sums;
    while (std::getline(lines, line)) {
        std::vector<std::string> f;
        std::istringstream fields(line);
        for (std::string x; std::getline(fields, x, ',');) f.push_back(x);
        REQUIRE(f.size() == 5);
        sums[f[3]] += std::stol(f[2]);
    }
    CHECK(sums.size() == 4);
    for (const auto& [label, total] : sums) CHECK(total == 50);
}

TEST_CASE("unwritable plot directory") {
    const auto s = split(testing::friedman_like(60, 8), 50);
    const auto m = fit(s.train, Task::regress);
    const auto dir = testing::temp_dir("plots_blocked");
    testing::write_text(dir / "file", "x");
    try {
        emit_plots(m, {s.train.X, std::nullopt, std::nullopt}, (dir / "file" / "sub").string());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::io);
    }
}
