#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stackgen/stacking.hpp"

namespace stackgen {

enum Partition { in_sample = 0, cross_validated = 1, holdout = 2 };

// 2 x 2 counts indexed [predicted][actual].
struct Confusion {
    std::array<std::array<long, 2>, 2> count{};

    long total() const { return count[0][0] + count[0][1] + count[1][0] + count[1][1]; }
    double accuracy() const;
};

double rmspe(const Vector& y, const Vector& pred);
// Predicted class is 1 when p >= threshold.
Confusion confusion(const Vector& y, const Vector& p, double threshold = 0.5);

struct ReportRow {
    std::string label;
    std::optional<double> weight;  // absent for the stacked row
    std::array<std::optional<double>, 3> rmspe;
    std::array<std::optional<Confusion>, 3> confusion;
};

struct EvalReport {
    Task task = Task::regress;
    std::vector<ReportRow> rows;  // STACKING first, then learners in order
    bool has_holdout = false;
    std::size_t holdout_count = 0;
    double threshold = 0.5;
};

// Evaluation data: the training predictors (rows in model order) and an
// optional holdout sample.
struct EvalInput {
    Matrix X_train;
    std::optional<Matrix> X_holdout;
    std::optional<Vector> y_holdout;
};

// Display names: the method name, suffixed with the position when a method
// occurs more than once (CSV and file names only).
std::vector<std::string> learner_labels(const StackModel& model);

EvalReport rmspe_table(const StackModel& model, const EvalInput& in);
EvalReport confusion_table(const StackModel& model, const EvalInput& in, double threshold = 0.5);
EvalReport evaluate(const StackModel& model, const EvalInput& in, double threshold = 0.5);

std::string format_report(const EvalReport& report);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // scores >= threshold are classified positive
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) to (1,1)
    double auc = 0.0;
};

RocCurve roc_curve(const Vector& scores, const Vector& labels);
// Probability that a positive outscores a negative, ties counted one half.
double auc_pairwise(const Vector& scores, const Vector& labels);

// Counts over 20 equal bins of [0, 1]; the last bin is closed.
std::array<long, 20> probability_histogram(const Vector& p);

struct PlotOptions {
    std::string title;
    std::string subtitle;
    std::string xlabel;
    std::string ylabel;
    bool histogram = false;
};

// Writes CSV data and SVG charts for the holdout sample when one is given,
// otherwise for the estimation sample. Returns the written paths.
std::vector<std::string> emit_plots(const StackModel& model, const EvalInput& in, const std::string& out_dir,
                                    const PlotOptions& options = {});

}  // namespace stackgen
