#include "stackgen/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stackgen/data.hpp"
#include "stackgen/ensemble.hpp"
#include "stackgen/linear.hpp"

namespace stackgen {

namespace {

void check_shape(const Matrix& Z, const Vector& y) {
    if (Z.cols() < 1) fail(ErrorCode::invalid_argument, "final estimator: no base learners");
    if (Z.rows() != y.size()) fail(ErrorCode::invalid_argument, "final estimator: Z and y have different row counts");
    if (Z.rows() == 0) fail(ErrorCode::invalid_argument, "final estimator: no observations");
    if (has_nan(Z)) fail(ErrorCode::numeric, "final estimator: base predictions contain NaN");
}

long iteration_cap(Eigen::Index J) { return std::max<long>(30, 10 * static_cast<long>(J) * static_cast<long>(J)); }

Matrix columns_of(const Matrix& Z, const std::vector<Eigen::Index>& idx) {
    Matrix out(Z.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = Z.col(idx[k]);
    return out;
}

// Minimiser of ||y - Zs w||^2 subject to sum(w) = 1 from the KKT system,
// minimum-norm when the system is singular.
Vector sum_to_one_ls(const Matrix& Zs, const Vector& y) {
    const Eigen::Index m = Zs.cols();
    Matrix K = Matrix::Zero(m + 1, m + 1);
    K.topLeftCorner(m, m) = 2.0 * Zs.transpose() * Zs;
    K.block(0, m, m, 1).setOnes();
    K.block(m, 0, 1, m).setOnes();
    Vector rhs(m + 1);
    rhs.head(m) = 2.0 * Zs.transpose() * y;
    rhs(m) = 1.0;
    return K.completeOrthogonalDecomposition().solve(rhs).head(m);
}

FinalFit finish(FinalEstimator e, const Matrix& Z, const Vector& y, Vector w) {
    share_duplicate_weights(Z, w);
    FinalFit f;
    f.estimator = e;
    f.weights = std::move(w);
    f.objective = squared_error(Z, y, f.weights);
    return f;
}

}  // namespace

std::string to_string(FinalEstimator e) {
    switch (e) {
        case FinalEstimator::nnls1: return "nnls1";
        case FinalEstimator::nnls0: return "nnls0";
        case FinalEstimator::singlebest: return "singlebest";
        case FinalEstimator::ls1: return "ls1";
        case FinalEstimator::ols: return "ols";
        case FinalEstimator::ridge: return "ridge";
    }
    return "nnls1";
}

FinalEstimator parse_final_estimator(const std::string& text) {
    for (FinalEstimator e : {FinalEstimator::nnls1, FinalEstimator::nnls0, FinalEstimator::singlebest,
                             FinalEstimator::ls1, FinalEstimator::ols, FinalEstimator::ridge})
        if (text == to_string(e)) return e;
    fail(ErrorCode::invalid_argument, "unknown final estimator '" + text + "'");
}

Vector FinalFit::combine(const Matrix& P) const {
    if (P.cols() != weights.size()) fail(ErrorCode::invalid_argument, "final estimator: column mismatch");
    Vector out = (P * weights).array() + intercept;
    if (logistic) out = out.unaryExpr([](double z) { return stackgen::logistic(z); });
    return out;
}

double squared_error(const Matrix& Z, const Vector& y, const Vector& w, double intercept) {
    return ((y - Z * w).array() - intercept).square().sum();
}

void share_duplicate_weights(const Matrix& Z, Vector& w) {
    const Eigen::Index J = Z.cols();
    std::vector<bool> done(static_cast<std::size_t>(J), false);
    for (Eigen::Index a = 0; a < J; ++a) {
        if (done[static_cast<std::size_t>(a)]) continue;
        std::vector<Eigen::Index> group{a};
        for (Eigen::Index b = a + 1; b < J; ++b)
            if (!done[static_cast<std::size_t>(b)] && Z.col(a) == Z.col(b)) group.push_back(b);
        if (group.size() < 2) continue;
        double total = 0.0;
        for (auto j : group) total += w(j);
        for (auto j : group) {
            w(j) = total / static_cast<double>(group.size());
            done[static_cast<std::size_t>(j)] = true;
        }
    }
}

FinalFit solve_singlebest(const Matrix& Z, const Vector& y) {
    check_shape(Z, y);
    Eigen::Index best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < Z.cols(); ++j) {
        const double err = (y - Z.col(j)).squaredNorm();
        if (err < best_err) {
            best_err = err;
            best = j;
        }
    }
    FinalFit f;
    f.estimator = FinalEstimator::singlebest;
    f.weights = Vector::Zero(Z.cols());
    f.weights(best) = 1.0;
    f.objective = best_err;
    return f;
}

FinalFit solve_nnls1(const Matrix& Z, const Vector& y) {
    check_shape(Z, y);
    const Eigen::Index J = Z.cols();
    Vector w = solve_singlebest(Z, y).weights;
    if (J == 1) return finish(FinalEstimator::nnls1, Z, y, w);

    std::vector<bool> free(static_cast<std::size_t>(J), false);
    for (Eigen::Index j = 0; j < J; ++j) free[static_cast<std::size_t>(j)] = w(j) > 0.0;
    const double scale = std::max(1.0, (2.0 * Z.transpose() * y).cwiseAbs().maxCoeff());
    const double tol = 1e-10 * scale;
    const long cap = iteration_cap(J);
    bool converged = false;

    for (long it = 0; it < cap; ++it) {
        std::vector<Eigen::Index> P;
        for (Eigen::Index j = 0; j < J; ++j)
            if (free[static_cast<std::size_t>(j)]) P.push_back(j);
        const Vector s = sum_to_one_ls(columns_of(Z, P), y);

        double alpha = 1.0;
        for (std::size_t k = 0; k < P.size(); ++k) {
            const double wi = w(P[k]);
            if (s(static_cast<Eigen::Index>(k)) <= 0.0 && wi - s(static_cast<Eigen::Index>(k)) > 0.0)
                alpha = std::min(alpha, wi / (wi - s(static_cast<Eigen::Index>(k))));
        }
        if (alpha < 1.0) {
            // Step to the boundary and drop the variables that reached zero.
            for (std::size_t k = 0; k < P.size(); ++k) {
                double& wi = w(P[k]);
                wi += alpha * (s(static_cast<Eigen::Index>(k)) - wi);
                if (wi <= 1e-14) {
                    wi = 0.0;
                    free[static_cast<std::size_t>(P[k])] = false;
                }
            }
            const double total = w.sum();
            w /= total;
            continue;
        }
        for (std::size_t k = 0; k < P.size(); ++k) w(P[k]) = std::max(0.0, s(static_cast<Eigen::Index>(k)));
        w /= w.sum();

        // Multipliers of the inactive bounds: g_j - nu with nu the common
        // gradient on the free set.
        const Vector g = 2.0 * Z.transpose() * (Z * w - y);
        const double nu = g.dot(w);
        Eigen::Index enter = -1;
        double most_negative = -tol;
        for (Eigen::Index j = 0; j < J; ++j) {
            if (free[static_cast<std::size_t>(j)]) continue;
            if (g(j) - nu < most_negative) {
                most_negative = g(j) - nu;
                enter = j;
            }
        }
        if (enter < 0) {
            converged = true;
            break;
        }
        free[static_cast<std::size_t>(enter)] = true;
    }
    if (!converged) warn("nnls1: iteration limit reached");
    FinalFit f = finish(FinalEstimator::nnls1, Z, y, w);
    const FinalFit vertex = solve_singlebest(Z, y);
    if (vertex.objective < f.objective) f = finish(FinalEstimator::nnls1, Z, y, vertex.weights);
    return f;
}

FinalFit solve_nnls0(const Matrix& Z, const Vector& y) {
    check_shape(Z, y);
    const Eigen::Index J = Z.cols();
    Vector w = Vector::Zero(J);
    std::vector<bool> free(static_cast<std::size_t>(J), false);
    const double tol = 1e-12 * std::max(1.0, Z.norm() * y.norm());
    Vector g = Z.transpose() * y;
    const long cap = iteration_cap(J);
    long it = 0;
    for (; it < cap; ++it) {
        Eigen::Index enter = -1;
        double best = tol;
        for (Eigen::Index j = 0; j < J; ++j)
            if (!free[static_cast<std::size_t>(j)] && g(j) > best) {
                best = g(j);
                enter = j;
            }
        if (enter < 0) break;
        free[static_cast<std::size_t>(enter)] = true;
        for (long inner = 0; inner < cap; ++inner) {
            std::vector<Eigen::Index> P;
            for (Eigen::Index j = 0; j < J; ++j)
                if (free[static_cast<std::size_t>(j)]) P.push_back(j);
            const Vector s = columns_of(Z, P).completeOrthogonalDecomposition().solve(y);
            bool positive = true;
            double alpha = 1.0;
            for (std::size_t k = 0; k < P.size(); ++k) {
                const double sk = s(static_cast<Eigen::Index>(k));
                if (sk <= 0.0) {
                    positive = false;
                    const double wi = w(P[k]);
                    if (wi - sk > 0.0) alpha = std::min(alpha, wi / (wi - sk));
                    else alpha = 0.0;
                }
            }
            if (positive) {
                for (std::size_t k = 0; k < P.size(); ++k) w(P[k]) = s(static_cast<Eigen::Index>(k));
                break;
            }
            for (std::size_t k = 0; k < P.size(); ++k) {
                double& wi = w(P[k]);
                wi += alpha * (s(static_cast<Eigen::Index>(k)) - wi);
                if (wi <= 1e-15) {
                    wi = 0.0;
                    free[static_cast<std::size_t>(P[k])] = false;
                }
            }
        }
        g = Z.transpose() * (y - Z * w);
    }
    if (it == cap) warn("nnls0: iteration limit reached");
    return finish(FinalEstimator::nnls0, Z, y, w);
}

FinalFit solve_ls1(const Matrix& Z, const Vector& y) {
    check_shape(Z, y);
    const Eigen::Index J = Z.cols();
    Matrix G = 2.0 * Z.transpose() * Z;
    Matrix K = Matrix::Zero(J + 1, J + 1);
    Vector rhs(J + 1);
    rhs.head(J) = 2.0 * Z.transpose() * y;
    rhs(J) = 1.0;
    auto assemble = [&] {
        K.topLeftCorner(J, J) = G;
        K.block(0, J, J, 1).setOnes();
        K.block(J, 0, 1, J).setOnes();
    };
    assemble();
    Eigen::FullPivLU<Matrix> lu(K);
    if (!lu.isInvertible()) {
        G.diagonal().array() += 1e-10;
        assemble();
        lu.compute(K);
    }
    Vector w = lu.solve(rhs).head(J);
    return finish(FinalEstimator::ls1, Z, y, w);
}

FinalFit solve_ols_final(const Matrix& Z, const Vector& y) {
    check_shape(Z, y);
    const LinearModel m = fit_ols(Z, y, true);
    FinalFit f;
    f.estimator = FinalEstimator::ols;
    f.weights = m.coef;
    f.intercept = m.intercept;
    f.objective = squared_error(Z, y, f.weights, f.intercept);
    return f;
}

std::vector<double> ridge_grid() {
    std::vector<double> g;
    for (int e = -4; e <= 4; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

FinalFit solve_ridge_fixed(const Matrix& Z, const Vector& y, double lambda, Task task) {
    check_shape(Z, y);
    if (!(lambda > 0.0)) fail(ErrorCode::invalid_argument, "ridge: penalty must be positive");
    FinalFit f;
    f.estimator = FinalEstimator::ridge;
    f.lambda = lambda;
    if (task == Task::classify) {
        LogitOptions o;
        o.C = 1.0 / lambda;
        const LinearModel m = fit_logit(Z, y, o);
        f.weights = m.coef;
        f.intercept = m.intercept;
        f.logistic = true;
        f.objective = (y - f.combine(Z)).squaredNorm();
        return f;
    }
    const Vector mean = Z.colwise().mean().transpose();
    const Matrix Zc = Z.rowwise() - mean.transpose();
    const double ybar = y.mean();
    Matrix A = Zc.transpose() * Zc;
    A.diagonal().array() += lambda;
    f.weights = A.ldlt().solve(Zc.transpose() * (y.array() - ybar).matrix());
    f.intercept = ybar - mean.dot(f.weights);
    f.objective = squared_error(Z, y, f.weights, f.intercept);
    return f;
}

FinalFit solve_ridge_final(const Matrix& Z, const Vector& y, Task task, int folds, std::uint64_t seed) {
    check_shape(Z, y);
    const FoldAssignment fa = assign_folds(static_cast<std::size_t>(Z.rows()), folds, seed);
    const auto grid = ridge_grid();
    std::vector<double> err(grid.size(), 0.0);
    for (int k = 1; k <= fa.K; ++k) {
        const IndexVector tr = fa.complement(k), va = fa.members(k);
        Matrix Zt(static_cast<Eigen::Index>(tr.size()), Z.cols()), Zv(static_cast<Eigen::Index>(va.size()), Z.cols());
        Vector yt(Zt.rows()), yv(Zv.rows());
        for (std::size_t i = 0; i < tr.size(); ++i) {
            Zt.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(tr[i]));
            yt(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(tr[i]));
        }
        for (std::size_t i = 0; i < va.size(); ++i) {
            Zv.row(static_cast<Eigen::Index>(i)) = Z.row(static_cast<Eigen::Index>(va[i]));
            yv(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(va[i]));
        }
        if (task == Task::classify && yt.maxCoeff() == yt.minCoeff())
            fail(ErrorCode::data, "ridge: a training fold contains a single class");
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const Vector pred = solve_ridge_fixed(Zt, yt, grid[g], task).combine(Zv);
            double e = 0.0;
            for (Eigen::Index i = 0; i < yv.size(); ++i) {
                if (task == Task::regress) {
                    e += (yv(i) - pred(i)) * (yv(i) - pred(i));
                } else {
                    const double p = std::clamp(pred(i), 1e-15, 1.0 - 1e-15);
                    e -= 2.0 * (yv(i) * std::log(p) + (1.0 - yv(i)) * std::log(1.0 - p));
                }
            }
            err[g] += e / static_cast<double>(y.size());
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(err.begin(), err.end()) - err.begin());
    return solve_ridge_fixed(Z, y, grid[best], task);
}

FinalFit solve_final(FinalEstimator e, const Matrix& Z, const Vector& y, Task task, int folds, std::uint64_t seed) {
    switch (e) {
        case FinalEstimator::nnls1: return solve_nnls1(Z, y);
        case FinalEstimator::nnls0: return solve_nnls0(Z, y);
        case FinalEstimator::singlebest: return solve_singlebest(Z, y);
        case FinalEstimator::ls1: return solve_ls1(Z, y);
        case FinalEstimator::ols: return solve_ols_final(Z, y);
        case FinalEstimator::ridge: return solve_ridge_final(Z, y, task, folds, seed);
    }
    fail(ErrorCode::internal, "unknown final estimator");
}

}  // namespace stackgen
