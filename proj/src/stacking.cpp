#include "stackgen/stacking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <unordered_map>

#include "stackgen/parallel.hpp"

namespace stackgen {

namespace {

Matrix rows_of(const Matrix& X, const IndexVector& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

Vector rows_of(const Vector& y, const IndexVector& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
    return out;
}

std::string learner_label(const StackSpec& spec, std::size_t j) {
    return "learner " + std::to_string(j + 1) + " (" + to_string(spec.learners[j].method) + ")";
}

[[noreturn]] void rethrow_with(const std::string& where, const Error& e) { fail(e.code(), where + ": " + e.what()); }

// Fits learner j without fold k and writes its predictions for fold k into Z.
void fold_task(const StackSpec& spec, const Dataset& data, const FoldAssignment& folds,
               const std::vector<std::size_t>& columns, std::uint64_t master, std::size_t j, int k, Matrix& Z) {
    const IndexVector train = folds.complement(k);
    const IndexVector valid = folds.members(k);
    try {
        const FittedLearner f = fit_learner(spec.learners[j], rows_of(data.X, train), rows_of(data.y, train), columns,
                                            task_seed(master, j, k), spec.bfolds);
        const Vector pred = f.predict(rows_of(data.X, valid));
        for (std::size_t i = 0; i < valid.size(); ++i)
            Z(static_cast<Eigen::Index>(valid[i]), static_cast<Eigen::Index>(j)) = pred(static_cast<Eigen::Index>(i));
    } catch (const Error& e) {
        rethrow_with(learner_label(spec, j) + " failed on fold " + std::to_string(k), e);
    }
}

}  // namespace

void validate(const StackSpec& spec) {
    if (spec.learners.empty()) fail(ErrorCode::invalid_argument, "at least one base learner is required");
    for (std::size_t j = 0; j < spec.learners.size(); ++j) {
        const auto& l = spec.learners[j];
        if (l.task != spec.task || !supports(l.method, spec.task))
            fail(ErrorCode::invalid_argument,
                 learner_label(spec, j) + " does not support type " + to_string(spec.task));
    }
    if (spec.fold_values.empty() && spec.folds < 2) fail(ErrorCode::invalid_argument, "folds must be at least 2");
    if (spec.bfolds < 2) fail(ErrorCode::invalid_argument, "bfolds must be at least 2");
    if (spec.seed < -1) fail(ErrorCode::invalid_argument, "seed must be -1, 0 or a positive integer");
    if (!spec.voteweights.empty() && !spec.voting) fail(ErrorCode::invalid_argument, "voteweights requires voting");
    if (spec.voting) {
        const std::size_t J = spec.learners.size();
        if (J < 2) fail(ErrorCode::invalid_argument, "voting requires at least two base learners");
        if (!spec.voteweights.empty()) {
            if (spec.voteweights.size() != J - 1)
                fail(ErrorCode::invalid_argument, "voteweights needs " + std::to_string(J - 1) + " values (one fewer than learners)");
            double total = 0.0;
            for (double w : spec.voteweights) {
                if (!(w > 0.0)) fail(ErrorCode::invalid_argument, "voteweights must be positive");
                total += w;
            }
            if (!(total < 1.0)) fail(ErrorCode::invalid_argument, "voteweights must sum to less than 1");
        }
    }
}

Vector voting_weights(const StackSpec& spec) {
    const auto J = static_cast<Eigen::Index>(spec.learners.size());
    if (spec.voteweights.empty()) return Vector::Constant(J, 1.0 / static_cast<double>(J));
    Vector w(J);
    double total = 0.0;
    for (Eigen::Index j = 0; j + 1 < J; ++j) {
        w(j) = spec.voteweights[static_cast<std::size_t>(j)];
        total += w(j);
    }
    w(J - 1) = 1.0 - total;
    return w;
}

std::uint64_t resolve_seed(std::int64_t policy) {
    if (policy > 0) return static_cast<std::uint64_t>(policy);
    if (policy == -1) return global_rng::draw_seed();
    if (policy == 0) {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
    fail(ErrorCode::invalid_argument, "seed must be -1, 0 or a positive integer");
}

FoldAssignment make_folds(const StackSpec& spec, std::size_t n, std::uint64_t master) {
    if (!spec.fold_values.empty()) {
        if (spec.fold_values.size() != n) fail(ErrorCode::data, "fold variable length differs from the number of rows");
        return folds_from_column(spec.fold_values);
    }
    return assign_folds(n, spec.folds, derive_seed(master, kFoldStream, 0));
}

Vector StackModel::weights() const { return final_fit.weights; }

Matrix cross_fit(const StackSpec& spec, const Dataset& data, const FoldAssignment& folds, std::uint64_t master) {
    const std::size_t J = spec.learners.size();
    const auto K = static_cast<std::size_t>(folds.K);
    if (folds.n() != data.n()) fail(ErrorCode::invalid_argument, "fold assignment does not match the data");
    std::vector<std::vector<std::size_t>> columns(J);
    for (std::size_t j = 0; j < J; ++j) columns[j] = resolve_columns(spec.learners[j], data.colnames);

    Matrix Z = Matrix::Constant(data.X.rows(), static_cast<Eigen::Index>(J), std::numeric_limits<double>::quiet_NaN());
    parallel_for(J * K, spec.njobs, [&](std::size_t t) {
        const std::size_t j = t / K;
        fold_task(spec, data, folds, columns[j], master, j, static_cast<int>(t % K) + 1, Z);
    });
    return Z;
}

StackModel fit_stack(const StackSpec& spec, const Dataset& data) {
    validate(spec);
    if (data.task != spec.task) fail(ErrorCode::invalid_argument, "dataset type differs from the stacking type");
    validate_labels(data.y, spec.task);

    StackModel m;
    m.spec = spec;
    m.colnames = data.colnames;
    m.y = data.y;
    m.master_seed = resolve_seed(spec.seed);
    m.folds = make_folds(spec, data.n(), m.master_seed);

    const std::size_t J = spec.learners.size();
    const auto K = static_cast<std::size_t>(m.folds.K);
    std::vector<std::vector<std::size_t>> columns(J);
    for (std::size_t j = 0; j < J; ++j) columns[j] = resolve_columns(spec.learners[j], data.colnames);

    // One task list: J*K fold fits followed by J full-sample refits.
    m.Z = Matrix::Constant(data.X.rows(), static_cast<Eigen::Index>(J), std::numeric_limits<double>::quiet_NaN());
    std::vector<FittedLearner> refits(J);
    parallel_for(J * K + J, spec.njobs, [&](std::size_t t) {
        if (t >= J * K) {
            const std::size_t j = t - J * K;
            try {
                refits[j] = fit_learner(spec.learners[j], data.X, data.y, columns[j], task_seed(m.master_seed, j, 0),
                                        spec.bfolds);
            } catch (const Error& e) {
                rethrow_with(learner_label(spec, j) + " failed on the full sample", e);
            }
            return;
        }
        const std::size_t j = t / K;
        fold_task(spec, data, m.folds, columns[j], m.master_seed, j, static_cast<int>(t % K) + 1, m.Z);
    });
    m.learners = std::move(refits);
    if (has_nan(m.Z)) fail(ErrorCode::numeric, "cross-fitted predictions contain NaN");

    if (spec.voting) {
        m.final_fit.estimator = spec.finalest;
        m.final_fit.weights = voting_weights(spec);
        m.final_fit.objective = squared_error(m.Z, m.y, m.final_fit.weights);
    } else if (J == 1) {
        m.final_fit.estimator = spec.finalest;
        m.final_fit.weights = Vector::Ones(1);
        m.final_fit.objective = squared_error(m.Z, m.y, m.final_fit.weights);
    } else {
        m.final_fit = solve_final(spec.finalest, m.Z, m.y, spec.task, spec.bfolds,
                                  derive_seed(m.master_seed, kFinalStream, 0));
    }
    m.train_rows.resize(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) m.train_rows[i] = i;
    m.source_rows = data.n();
    return m;
}

Matrix predict_base(const StackModel& model, const Matrix& X) {
    if (static_cast<std::size_t>(X.cols()) != model.colnames.size())
        fail(ErrorCode::invalid_argument, "prediction data has " + std::to_string(X.cols()) + " predictors, model expects " +
                                              std::to_string(model.colnames.size()));
    Matrix P(X.rows(), static_cast<Eigen::Index>(model.J()));
    for (std::size_t j = 0; j < model.J(); ++j) P.col(static_cast<Eigen::Index>(j)) = model.learners[j].predict(X);
    return P;
}

Vector combine(const StackModel& model, const Matrix& base) {
    if (model.spec.voting && model.task() == Task::classify) {
        const Vector& w = model.final_fit.weights;
        Vector share = Vector::Zero(base.rows());
        for (Eigen::Index i = 0; i < base.rows(); ++i)
            for (Eigen::Index j = 0; j < base.cols(); ++j)
                if (base(i, j) > 0.5) share(i) += w(j);
        return share;
    }
    return model.final_fit.combine(base);
}

Vector predict_stack(const StackModel& model, const Matrix& X, PredictKind kind) {
    Vector v = combine(model, predict_base(model, X));
    if (model.task() == Task::regress) {
        if (kind == PredictKind::pr) fail(ErrorCode::invalid_argument, "pr is only available for classification");
        return v;
    }
    v = v.cwiseMax(0.0).cwiseMin(1.0);
    if (kind == PredictKind::xb) v = (v.array() >= 0.5).cast<double>();
    return v;
}

Matrix cvalid_rows(const StackModel& model, const std::vector<std::size_t>& source_rows) {
    std::unordered_map<std::size_t, Eigen::Index> where;
    for (std::size_t i = 0; i < model.train_rows.size(); ++i) where.emplace(model.train_rows[i], static_cast<Eigen::Index>(i));
    Matrix out(static_cast<Eigen::Index>(source_rows.size()), model.Z.cols());
    for (std::size_t r = 0; r < source_rows.size(); ++r) {
        const auto it = where.find(source_rows[r]);
        if (it == where.end())
            fail(ErrorCode::invalid_argument, "cross-validated predictions are only available for the estimation sample (row " +
                                                  std::to_string(source_rows[r] + 1) + " is outside it)");
        out.row(static_cast<Eigen::Index>(r)) = model.Z.row(it->second);
    }
    return out;
}

std::string format_weights(const StackModel& model) {
    std::string out;
    if (model.J() == 1) out += "Single base learner: no stacking done.\n\n";
    out += model.spec.voting ? "Voting weights:\n" : "Stacking weights:\n";
    out += std::string(17, '-') + "+" + std::string(21, '-') + "\n";
    out += "  Method         |      Weight\n";
    out += std::string(17, '-') + "+" + std::string(21, '-') + "\n";
    char line[128];
    for (std::size_t j = 0; j < model.J(); ++j) {
        std::snprintf(line, sizeof line, "  %-15s|      %.7f\n", to_string(model.spec.learners[j].method).c_str(),
                      model.final_fit.weights(static_cast<Eigen::Index>(j)));
        out += line;
    }
    if (model.final_fit.intercept != 0.0) {
        std::snprintf(line, sizeof line, "  %-15s|      %.7f\n", "_cons", model.final_fit.intercept);
        out += line;
    }
    return out;
}

}  // namespace stackgen
