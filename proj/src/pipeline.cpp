#include "stackgen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace stackgen {

namespace {

struct StepName {
    StepKind kind;
    const char* name;
};

constexpr StepName kStepNames[] = {
    {StepKind::stdscaler, "stdscaler"},       {StepKind::nostdscaler, "nostdscaler"},
    {StepKind::minmaxscaler, "minmaxscaler"}, {StepKind::onehot, "onehot"},
    {StepKind::medianimputer, "medianimputer"}, {StepKind::knnimputer, "knnimputer"},
    {StepKind::poly2, "poly2"},               {StepKind::poly3, "poly3"},
    {StepKind::interact, "interact"},
};

bool is_imputer(StepKind k) { return k == StepKind::medianimputer || k == StepKind::knnimputer; }

// Monomials as lists of column indices, ordered by degree and then
// lexicographically (a, b, a^2, ab, b^2, ...).
std::vector<std::vector<std::size_t>> monomials(std::size_t p, int degree, bool interaction_only) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    for (int d = 1; d <= degree; ++d) {
        cur.assign(static_cast<std::size_t>(d), 0);
        // enumerate non-decreasing (or strictly increasing) index tuples
        auto rec = [&](auto&& self, std::size_t pos, std::size_t start) -> void {
            if (pos == cur.size()) {
                out.push_back(cur);
                return;
            }
            for (std::size_t j = start; j < p; ++j) {
                cur[pos] = j;
                self(self, pos + 1, interaction_only ? j + 1 : j);
            }
        };
        rec(rec, 0, 0);
    }
    return out;
}

int poly_degree(StepKind k) { return k == StepKind::poly3 ? 3 : 2; }

void check_finite_input(const Matrix& X, StepKind kind) {
    if (X.hasNaN()) {
        PipelineStep s{kind};
        fail(ErrorCode::data, "missing values reach pipeline step '" + step_name(s) +
                                  "'; add medianimputer or knnimputer before it");
    }
}

FittedStep fit_step(const PipelineStep& step, const Matrix& X) {
    FittedStep f;
    f.kind = step.kind;
    f.k = step.k;
    f.p_in = static_cast<std::size_t>(X.cols());
    f.p_out = f.p_in;
    const Eigen::Index n = X.rows();
    switch (step.kind) {
        case StepKind::nostdscaler:
            break;
        case StepKind::stdscaler: {
            check_finite_input(X, step.kind);
            f.center = X.colwise().mean().transpose();
            f.scale.resize(X.cols());
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const double var = (X.col(j).array() - f.center(j)).square().sum() / static_cast<double>(n);
                const double sd = std::sqrt(var);
                if (!(sd > 1e-12 * std::max(1.0, std::abs(f.center(j))))) {
                    warn("stdscaler: column " + std::to_string(j + 1) +
                         " has zero variance and is left unscaled");
                    f.scale(j) = 1.0;
                } else {
                    f.scale(j) = sd;
                }
            }
            break;
        }
        case StepKind::minmaxscaler: {
            check_finite_input(X, step.kind);
            f.center = X.colwise().minCoeff().transpose();
            f.scale = X.colwise().maxCoeff().transpose() - f.center;
            for (Eigen::Index j = 0; j < f.scale.size(); ++j)
                if (f.scale(j) == 0.0) f.scale(j) = 1.0;
            break;
        }
        case StepKind::onehot: {
            check_finite_input(X, step.kind);
            f.levels.resize(f.p_in);
            f.p_out = 0;
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                std::vector<double> lv(X.col(j).data(), X.col(j).data() + n);
                std::sort(lv.begin(), lv.end());
                lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
                f.p_out += lv.size();
                f.levels[static_cast<std::size_t>(j)] = std::move(lv);
            }
            break;
        }
        case StepKind::medianimputer: {
            f.center.resize(X.cols());
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                std::vector<double> v;
                for (Eigen::Index i = 0; i < n; ++i)
                    if (!std::isnan(X(i, j))) v.push_back(X(i, j));
                if (v.empty())
                    fail(ErrorCode::data, "medianimputer: column " + std::to_string(j + 1) +
                                              " has no observed values");
                std::sort(v.begin(), v.end());
                const std::size_t m = v.size();
                f.center(j) = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
            }
            break;
        }
        case StepKind::knnimputer: {
            if (step.k < 1) fail(ErrorCode::invalid_argument, "knnimputer: k must be at least 1");
            if (static_cast<Eigen::Index>(step.k) >= n)
                fail(ErrorCode::invalid_argument,
                     "knnimputer: k (" + std::to_string(step.k) + ") must be smaller than the number of rows");
            f.reference = X;
            break;
        }
        case StepKind::poly2:
        case StepKind::poly3:
        case StepKind::interact:
            check_finite_input(X, step.kind);
            f.p_out = poly_output_columns(f.p_in, step.kind == StepKind::interact ? 2 : poly_degree(step.kind),
                                          step.kind == StepKind::interact);
            break;
    }
    return f;
}

Matrix apply_step(const FittedStep& f, const Matrix& X) {
    if (static_cast<std::size_t>(X.cols()) != f.p_in)
        fail(ErrorCode::invalid_argument, "pipeline: expected " + std::to_string(f.p_in) +
                                              " columns, got " + std::to_string(X.cols()));
    const Eigen::Index n = X.rows();
    switch (f.kind) {
        case StepKind::nostdscaler:
            return X;
        case StepKind::stdscaler:
        case StepKind::minmaxscaler: {
            check_finite_input(X, f.kind);
            Matrix out(n, X.cols());
            for (Eigen::Index j = 0; j < X.cols(); ++j)
                out.col(j) = (X.col(j).array() - f.center(j)) / f.scale(j);
            return out;
        }
        case StepKind::onehot: {
            check_finite_input(X, f.kind);
            Matrix out = Matrix::Zero(n, static_cast<Eigen::Index>(f.p_out));
            Eigen::Index offset = 0;
            std::size_t unseen = 0;
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const auto& lv = f.levels[static_cast<std::size_t>(j)];
                for (Eigen::Index i = 0; i < n; ++i) {
                    auto it = std::lower_bound(lv.begin(), lv.end(), X(i, j));
                    if (it != lv.end() && *it == X(i, j))
                        out(i, offset + (it - lv.begin())) = 1.0;
                    else
                        ++unseen;
                }
                offset += static_cast<Eigen::Index>(lv.size());
            }
            if (unseen > 0)
                warn("onehot: " + std::to_string(unseen) +
                     " cell(s) hold categories unseen in training; encoded as all zeros");
            return out;
        }
        case StepKind::medianimputer: {
            Matrix out = X;
            for (Eigen::Index j = 0; j < X.cols(); ++j)
                for (Eigen::Index i = 0; i < n; ++i)
                    if (std::isnan(out(i, j))) out(i, j) = f.center(j);
            return out;
        }
        case StepKind::knnimputer: {
            Matrix out = X;
            for (Eigen::Index i = 0; i < n; ++i)
                if (X.row(i).hasNaN()) out.row(i) = knn_impute(f.reference, X.row(i).transpose(), f.k).transpose();
            return out;
        }
        case StepKind::poly2:
        case StepKind::poly3:
        case StepKind::interact: {
            check_finite_input(X, f.kind);
            const bool inter = f.kind == StepKind::interact;
            const auto terms = monomials(f.p_in, inter ? 2 : poly_degree(f.kind), inter);
            Matrix out(n, static_cast<Eigen::Index>(terms.size()));
            for (std::size_t t = 0; t < terms.size(); ++t) {
                auto col = out.col(static_cast<Eigen::Index>(t));
                col = X.col(static_cast<Eigen::Index>(terms[t][0]));
                for (std::size_t q = 1; q < terms[t].size(); ++q)
                    col.array() *= X.col(static_cast<Eigen::Index>(terms[t][q])).array();
            }
            return out;
        }
    }
    fail(ErrorCode::internal, "unhandled pipeline step");
}

}  // namespace

bool PipelineSpec::contains(StepKind kind) const {
    return std::any_of(steps.begin(), steps.end(), [&](const PipelineStep& s) { return s.kind == kind; });
}

std::string step_name(const PipelineStep& step) {
    for (const auto& sn : kStepNames)
        if (sn.kind == step.kind) {
            std::string name = sn.name;
            if (step.kind == StepKind::knnimputer && step.k != 5) name += "(" + std::to_string(step.k) + ")";
            return name;
        }
    return "?";
}

PipelineSpec parse_pipeline(const std::string& text) {
    PipelineSpec spec;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        std::string base = tok;
        std::string arg;
        if (auto lp = tok.find('('); lp != std::string::npos) {
            if (tok.back() != ')') fail(ErrorCode::parse, "malformed pipeline step '" + tok + "'");
            base = tok.substr(0, lp);
            arg = tok.substr(lp + 1, tok.size() - lp - 2);
        }
        if (base == "sparse" || base == "stdscaler0")
            fail(ErrorCode::invalid_argument, "pipeline '" + base + "' unsupported: dense backend only");
        const StepName* found = nullptr;
        for (const auto& sn : kStepNames)
            if (base == sn.name) found = &sn;
        if (!found) fail(ErrorCode::invalid_argument, "unknown pipeline step '" + base + "'");
        PipelineStep step{found->kind};
        if (!arg.empty()) {
            if (step.kind != StepKind::knnimputer)
                fail(ErrorCode::parse, "pipeline step '" + base + "' takes no argument");
            try {
                std::size_t used = 0;
                step.k = std::stoi(arg, &used);
                if (used != arg.size()) throw std::invalid_argument(arg);
            } catch (const std::exception&) {
                fail(ErrorCode::parse, "knnimputer: invalid neighbour count '" + arg + "'");
            }
            if (step.k < 1) fail(ErrorCode::invalid_argument, "knnimputer: k must be at least 1");
        }
        spec.steps.push_back(step);
    }
    // Imputers must come before any step that cannot handle NaN.
    bool seen_other = false;
    for (const auto& s : spec.steps) {
        if (is_imputer(s.kind) && seen_other)
            fail(ErrorCode::invalid_argument, "imputer steps must precede scalers, encoders and polynomials");
        if (!is_imputer(s.kind) && s.kind != StepKind::nostdscaler) seen_other = true;
    }
    return spec;
}

std::string to_string(const PipelineSpec& spec) {
    std::string out;
    for (const auto& s : spec.steps) {
        if (!out.empty()) out += ' ';
        out += step_name(s);
    }
    return out;
}

std::size_t poly_output_columns(std::size_t p, int degree, bool interaction_only) {
    // sum over d of C(p+d-1, d) (with replacement) or C(p, d) (interactions)
    std::size_t total = 0;
    for (int d = 1; d <= degree; ++d) {
        double c = 1.0;
        const std::size_t top = interaction_only ? p : p + static_cast<std::size_t>(d) - 1;
        for (int q = 1; q <= d; ++q) c = c * static_cast<double>(top - static_cast<std::size_t>(q) + 1) / q;
        total += static_cast<std::size_t>(std::llround(c));
    }
    return total;
}

std::pair<FittedPipeline, Matrix> fit_transform(const PipelineSpec& spec, const Matrix& X_train) {
    if (X_train.rows() == 0 || X_train.cols() == 0) fail(ErrorCode::data, "pipeline: empty training matrix");
    std::vector<FittedStep> fitted;
    Matrix cur = X_train;
    for (const auto& step : spec.steps) {
        fitted.push_back(fit_step(step, cur));
        cur = apply_step(fitted.back(), cur);
    }
    const auto p_in = static_cast<std::size_t>(X_train.cols());
    const auto p_out = static_cast<std::size_t>(cur.cols());
    return {FittedPipeline(std::move(fitted), p_in, p_out), std::move(cur)};
}

Matrix FittedPipeline::transform(const Matrix& X) const {
    if (static_cast<std::size_t>(X.cols()) != p_in_)
        fail(ErrorCode::invalid_argument, "pipeline: expected " + std::to_string(p_in_) + " columns, got " +
                                              std::to_string(X.cols()));
    Matrix cur = X;
    for (const auto& s : steps_) cur = apply_step(s, cur);
    return cur;
}

Vector knn_impute(const Matrix& reference, const Vector& x, int k) {
    if (k < 1) fail(ErrorCode::invalid_argument, "knn_impute: k must be at least 1");
    const Eigen::Index p = x.size();
    if (reference.cols() != p) fail(ErrorCode::invalid_argument, "knn_impute: column mismatch");
    const Eigen::Index nref = reference.rows();
    std::vector<double> dist(static_cast<std::size_t>(nref), std::numeric_limits<double>::infinity());
    for (Eigen::Index r = 0; r < nref; ++r) {
        double ss = 0.0;
        Eigen::Index shared = 0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (std::isnan(x(j)) || std::isnan(reference(r, j))) continue;
            const double d = x(j) - reference(r, j);
            ss += d * d;
            ++shared;
        }
        if (shared > 0) dist[static_cast<std::size_t>(r)] = std::sqrt(static_cast<double>(p) / shared * ss);
    }
    Vector out = x;
    std::vector<Eigen::Index> donors;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!std::isnan(x(j))) continue;
        donors.clear();
        for (Eigen::Index r = 0; r < nref; ++r)
            if (!std::isnan(reference(r, j)) && std::isfinite(dist[static_cast<std::size_t>(r)]))
                donors.push_back(r);
        if (donors.empty())
            fail(ErrorCode::data, "knn_impute: no reference row shares an observed coordinate");
        const std::size_t take = std::min(donors.size(), static_cast<std::size_t>(k));
        std::stable_sort(donors.begin(), donors.end(), [&](Eigen::Index a, Eigen::Index b) {
            return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
        });
        double sum = 0.0;
        for (std::size_t q = 0; q < take; ++q) sum += reference(donors[q], j);
        out(j) = sum / static_cast<double>(take);
    }
    return out;
}

}  // namespace stackgen
