#include "stackgen/linear.hpp"

#include "stackgen/data.hpp"
#include "stackgen/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackgen {

Vector LinearModel::decision(const Matrix& X) const {
    if (X.cols() != coef.size()) fail(ErrorCode::invalid_argument, "linear model: column mismatch");
    return (X * coef).array() + intercept;
}

Vector LinearModel::predict(const Matrix& X) const {
    Vector d = decision(X);
    if (logistic) d = d.unaryExpr([](double z) { return stackgen::logistic(z); });
    return d;
}

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

LinearModel fit_ols(const Matrix& X, const Vector& y, bool fit_intercept) {
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "ols: size mismatch");
    LinearModel m;
    if (fit_intercept) {
        const Eigen::RowVectorXd xm = X.colwise().mean();
        const double ym = y.mean();
        const Matrix Xc = X.rowwise() - xm;
        m.coef = Xc.completeOrthogonalDecomposition().solve((y.array() - ym).matrix());
        m.intercept = ym - xm.dot(m.coef);
    } else {
        m.coef = X.completeOrthogonalDecomposition().solve(y);
    }
    return m;
}

namespace {

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Matrix with_intercept(const Matrix& X, bool fit_intercept) {
    if (!fit_intercept) return X;
    Matrix A(X.rows(), X.cols() + 1);
    A.col(0).setOnes();
    A.rightCols(X.cols()) = X;
    return A;
}

}  // namespace

LinearModel fit_logit(const Matrix& X, const Vector& y, const LogitOptions& opt) {
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "logit: size mismatch");
    const bool penalized = opt.C > 0.0;
    const double C = penalized ? opt.C : 1.0;
    const Matrix A = with_intercept(X, opt.fit_intercept);
    const Eigen::Index q = A.cols();
    Vector pen = Vector::Constant(q, penalized ? 1.0 : 0.0);
    if (opt.fit_intercept) pen(0) = 0.0;

    auto objective = [&](const Vector& theta, const Vector& eta) {
        double loss = 0.0;
        for (Eigen::Index i = 0; i < eta.size(); ++i) loss += log1pexp(eta(i)) - y(i) * eta(i);
        return 0.5 * (pen.array() * theta.array().square()).sum() + C * loss;
    };

    Vector theta = Vector::Zero(q);
    Vector eta = A * theta;
    double obj = objective(theta, eta);
    bool converged = false;
    for (int it = 0; it < opt.max_iter; ++it) {
        Vector p = eta.unaryExpr([](double z) { return logistic(z); });
        Vector g = pen.cwiseProduct(theta) + C * A.transpose() * (p - y);
        Vector w = (C * p.array() * (1.0 - p.array())).matrix();
        Matrix H = Matrix::Zero(q, q);
        H.selfadjointView<Eigen::Lower>().rankUpdate((A.array().colwise() * w.array().sqrt()).matrix().transpose());
        H.diagonal() += pen + Vector::Constant(q, 1e-10);
        Eigen::LDLT<Matrix> ldlt(H.selfadjointView<Eigen::Lower>());
        Vector step = ldlt.solve(g);
        const double decrement = g.dot(step);
        if (!(decrement >= 0.0) || !step.allFinite()) break;
        if (decrement / 2.0 <= opt.tol * opt.tol * std::max(1.0, std::abs(obj))) {
            converged = true;
            break;
        }
        double t = 1.0;
        Vector cand, cand_eta;
        double cand_obj = obj;
        for (int ls = 0; ls < 40; ++ls) {
            cand = theta - t * step;
            cand_eta = A * cand;
            cand_obj = objective(cand, cand_eta);
            if (cand_obj <= obj - 1e-4 * t * decrement) break;
            t *= 0.5;
        }
        if (!(cand_obj <= obj)) break;
        theta = std::move(cand);
        eta = std::move(cand_eta);
        obj = cand_obj;
    }
    if (!converged) warn("logit: Newton iterations did not converge; returning last iterate");

    LinearModel m;
    m.logistic = true;
    if (opt.fit_intercept) {
        m.intercept = theta(0);
        m.coef = theta.tail(q - 1);
    } else {
        m.coef = theta;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Elastic net

namespace {

double clamp_ratio(double l1_ratio) { return std::max(l1_ratio, 1e-3); }

// Centred Gram quantities for the Gaussian problem.
struct GaussGram {
    Matrix G;             // Xc'Xc / n
    Vector c;             // Xc'yc / n
    double yvar = 0.0;    // yc'yc / n
    Eigen::RowVectorXd xmean;
    double ymean = 0.0;
};

GaussGram gauss_gram(const Matrix& X, const Vector& y, bool fit_intercept) {
    GaussGram g;
    const double n = static_cast<double>(X.rows());
    if (fit_intercept) {
        g.xmean = X.colwise().mean();
        g.ymean = y.mean();
    } else {
        g.xmean = Eigen::RowVectorXd::Zero(X.cols());
    }
    const Matrix Xc = X.rowwise() - g.xmean;
    const Vector yc = (y.array() - g.ymean).matrix();
    g.G = Matrix::Zero(X.cols(), X.cols());
    g.G.selfadjointView<Eigen::Lower>().rankUpdate(Xc.transpose(), 1.0 / n);
    g.G = g.G.selfadjointView<Eigen::Lower>();
    g.c = Xc.transpose() * yc / n;
    g.yvar = yc.squaredNorm() / n;
    return g;
}

// Cyclic coordinate descent on the Gram form; `beta` is the warm start.
bool gram_cd(const GaussGram& g, double lambda, const EnetSettings& s, Vector& beta) {
    const double l1 = lambda * s.l1_ratio;
    const double l2 = lambda * (1.0 - s.l1_ratio);
    Vector r = g.c - g.G * beta;
    const double thresh = s.tol * s.tol * std::max(g.yvar, std::numeric_limits<double>::min());
    for (int it = 0; it < s.max_iter; ++it) {
        double maxdelta = 0.0;
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
            const double gjj = g.G(j, j);
            const double old = beta(j);
            const double denom = gjj + l2;
            const double nw = denom > 0.0 ? soft_threshold(r(j) + gjj * old, l1) / denom : 0.0;
            if (nw != old) {
                const double d = nw - old;
                r.noalias() -= g.G.col(j) * d;
                beta(j) = nw;
                maxdelta = std::max(maxdelta, gjj * d * d);
            }
        }
        if (maxdelta <= thresh) return true;
    }
    return false;
}

LinearModel gauss_model(const GaussGram& g, const Vector& beta) {
    LinearModel m;
    m.coef = beta;
    m.intercept = g.ymean - g.xmean.dot(beta);
    return m;
}

// Penalised logistic regression by IRLS with an inner weighted coordinate
// descent; (b0, beta) are warm-started in place.
bool logistic_enet(const Matrix& X, const Vector& y, double lambda, const EnetSettings& s, double& b0,
                   Vector& beta) {
    const Eigen::Index n = X.rows(), p = X.cols();
    const double nn = static_cast<double>(n);
    const double l1 = lambda * s.l1_ratio;
    const double l2 = lambda * (1.0 - s.l1_ratio);
    double prev_dev = std::numeric_limits<double>::infinity();
    Matrix Xc(n, p);
    Vector w(n), z(n), r(n), v(p);
    bool outer_ok = false;
    for (int irls = 0; irls < 100; ++irls) {
        const Vector eta = (X * beta).array() + b0;
        double dev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pi = logistic(eta(i));
            w(i) = std::max(pi * (1.0 - pi), 1e-5);
            z(i) = eta(i) + (y(i) - pi) / w(i);
            dev += 2.0 * (log1pexp(eta(i)) - y(i) * eta(i));
        }
        if (std::abs(prev_dev - dev) <= 1e-10 * (std::abs(dev) + 0.1)) {
            outer_ok = true;
            break;
        }
        prev_dev = dev;
        const double wsum = w.sum();
        Eigen::RowVectorXd xm = Eigen::RowVectorXd::Zero(p);
        double zm = 0.0;
        if (s.fit_intercept) {
            xm = (w.transpose() * X) / wsum;
            zm = w.dot(z) / wsum;
        }
        Xc = X.rowwise() - xm;
        r = (z.array() - zm).matrix() - Xc * beta;
        for (Eigen::Index j = 0; j < p; ++j) v(j) = w.dot(Xc.col(j).cwiseAbs2()) / nn;
        const double scale = (w.array() * (z.array() - zm).square()).sum() / nn;
        const double thresh = s.tol * s.tol * std::max(scale, std::numeric_limits<double>::min());
        for (int it = 0; it < s.max_iter; ++it) {
            double maxdelta = 0.0;
            for (Eigen::Index j = 0; j < p; ++j) {
                const double old = beta(j);
                const double grad = (w.array() * Xc.col(j).array() * r.array()).sum() / nn + v(j) * old;
                const double denom = v(j) + l2;
                const double nw = denom > 0.0 ? soft_threshold(grad, l1) / denom : 0.0;
                if (nw != old) {
                    const double d = nw - old;
                    r.noalias() -= Xc.col(j) * d;
                    beta(j) = nw;
                    maxdelta = std::max(maxdelta, v(j) * d * d);
                }
            }
            if (maxdelta <= thresh) break;
        }
        b0 = s.fit_intercept ? zm - xm.dot(beta) : 0.0;
    }
    return outer_ok;
}

double logistic_deviance(const Vector& y, const Vector& eta) {
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) dev += 2.0 * (log1pexp(eta(i)) - y(i) * eta(i));
    return dev;
}

LinearModel intercept_only(const Vector& y, Task task, Eigen::Index p, bool fit_intercept) {
    LinearModel m;
    m.coef = Vector::Zero(p);
    if (task == Task::classify) {
        m.logistic = true;
        const double rate = std::clamp(y.mean(), 1e-12, 1.0 - 1e-12);
        m.intercept = fit_intercept ? std::log(rate / (1.0 - rate)) : 0.0;
    } else {
        m.intercept = fit_intercept ? y.mean() : 0.0;
    }
    return m;
}

bool degenerate_outcome(const Vector& y) { return y.maxCoeff() == y.minCoeff(); }

}  // namespace

double enet_lambda_max(const Matrix& X, const Vector& y, Task task, double l1_ratio, bool fit_intercept) {
    const double ratio = clamp_ratio(l1_ratio);
    if (task == Task::regress) return gauss_gram(X, y, fit_intercept).c.cwiseAbs().maxCoeff() / ratio;
    const double n = static_cast<double>(X.rows());
    const double pbar = fit_intercept ? y.mean() : 0.5;
    Eigen::RowVectorXd xm = fit_intercept ? Eigen::RowVectorXd(X.colwise().mean())
                                          : Eigen::RowVectorXd::Zero(X.cols());
    const Vector grad = (X.rowwise() - xm).transpose() * (y.array() - pbar).matrix() / n;
    return grad.cwiseAbs().maxCoeff() / ratio;
}

std::vector<double> enet_grid(double lambda_max, double eps, int n_alphas) {
    if (n_alphas < 1) fail(ErrorCode::invalid_argument, "n_alphas must be at least 1");
    if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "eps must be positive");
    std::vector<double> grid(static_cast<std::size_t>(n_alphas));
    grid[0] = lambda_max;
    for (int i = 1; i < n_alphas; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_alphas - 1);
        grid[static_cast<std::size_t>(i)] = i == n_alphas - 1 ? lambda_max * eps : lambda_max * std::pow(eps, t);
    }
    return grid;
}

std::vector<LinearModel> enet_path(const Matrix& X, const Vector& y, Task task,
                                   const std::vector<double>& lambdas, const EnetSettings& s) {
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "elastic net: size mismatch");
    if (s.l1_ratio < 0.0 || s.l1_ratio > 1.0) fail(ErrorCode::invalid_argument, "l1_ratio must lie in [0, 1]");
    std::vector<LinearModel> out;
    out.reserve(lambdas.size());
    Vector beta = Vector::Zero(X.cols());
    bool all_converged = true;
    if (task == Task::regress) {
        const GaussGram g = gauss_gram(X, y, s.fit_intercept);
        for (double lam : lambdas) {
            all_converged &= gram_cd(g, lam, s, beta);
            out.push_back(gauss_model(g, beta));
        }
    } else {
        LinearModel init = intercept_only(y, task, X.cols(), s.fit_intercept);
        double b0 = init.intercept;
        for (double lam : lambdas) {
            all_converged &= logistic_enet(X, y, lam, s, b0, beta);
            LinearModel m;
            m.coef = beta;
            m.intercept = b0;
            m.logistic = true;
            out.push_back(std::move(m));
        }
    }
    if (!all_converged) warn("elastic net: coordinate descent reached max_iter before converging");
    return out;
}

LinearModel fit_elastic_net(const Matrix& X, const Vector& y, Task task, double lambda, const EnetSettings& s) {
    return enet_path(X, y, task, {lambda}, s).front();
}

EnetCvResult fit_elastic_net_cv(const Matrix& X, const Vector& y, Task task, const EnetCvOptions& opt,
                                std::uint64_t seed) {
    if (opt.folds < 2) fail(ErrorCode::invalid_argument, "elastic net CV: number of folds must be at least 2");
    EnetCvResult res;
    if (degenerate_outcome(y)) {
        warn("elastic net CV: outcome has zero variance; fitting an intercept-only model");
        res.model = intercept_only(y, task, X.cols(), opt.settings.fit_intercept);
        return res;
    }
    if (!opt.alphas.empty()) {
        res.lambdas = opt.alphas;
        std::sort(res.lambdas.begin(), res.lambdas.end(), std::greater<>());
    } else {
        const double lmax = enet_lambda_max(X, y, task, opt.settings.l1_ratio, opt.settings.fit_intercept);
        if (!(lmax > 0.0)) {
            warn("elastic net CV: no predictor varies with the outcome; fitting an intercept-only model");
            res.model = intercept_only(y, task, X.cols(), opt.settings.fit_intercept);
            return res;
        }
        res.lambdas = enet_grid(lmax, opt.eps, opt.n_alphas);
    }

    const FoldAssignment folds = assign_folds(static_cast<std::size_t>(X.rows()), opt.folds, seed);
    res.cv_error.assign(res.lambdas.size(), 0.0);
    for (int k = 1; k <= folds.K; ++k) {
        const IndexVector tr = folds.complement(k);
        const IndexVector va = folds.members(k);
        Matrix Xt(static_cast<Eigen::Index>(tr.size()), X.cols());
        Vector yt(static_cast<Eigen::Index>(tr.size()));
        for (std::size_t i = 0; i < tr.size(); ++i) {
            Xt.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(tr[i]));
            yt(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(tr[i]));
        }
        Matrix Xv(static_cast<Eigen::Index>(va.size()), X.cols());
        Vector yv(static_cast<Eigen::Index>(va.size()));
        for (std::size_t i = 0; i < va.size(); ++i) {
            Xv.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(va[i]));
            yv(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(va[i]));
        }
        if (task == Task::classify && (yt.maxCoeff() == yt.minCoeff()))
            fail(ErrorCode::data, "elastic net CV: a training fold contains a single class");
        const auto path = enet_path(Xt, yt, task, res.lambdas, opt.settings);
        for (std::size_t l = 0; l < path.size(); ++l) {
            const Vector eta = path[l].decision(Xv);
            const double err = task == Task::regress ? (yv - eta).squaredNorm() / static_cast<double>(yv.size())
                                                     : logistic_deviance(yv, eta) / static_cast<double>(yv.size());
            res.cv_error[l] += err / folds.K;
        }
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(res.cv_error.begin(), res.cv_error.end()) - res.cv_error.begin());
    res.lambda = res.lambdas[best];
    std::vector<double> head(res.lambdas.begin(), res.lambdas.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    res.model = enet_path(X, y, task, head, opt.settings).back();
    return res;
}

LassoIcResult fit_lasso_ic(const Matrix& X, const Vector& y, InfoCriterion ic, double eps, int n_alphas,
                           const EnetSettings& s) {
    LassoIcResult res;
    EnetSettings lasso = s;
    lasso.l1_ratio = 1.0;
    if (degenerate_outcome(y)) {
        warn("lassoic: outcome has zero variance; fitting an intercept-only model");
        res.model = intercept_only(y, Task::regress, X.cols(), s.fit_intercept);
        return res;
    }
    const double lmax = enet_lambda_max(X, y, Task::regress, 1.0, s.fit_intercept);
    if (!(lmax > 0.0)) {
        warn("lassoic: no predictor varies with the outcome; fitting an intercept-only model");
        res.model = intercept_only(y, Task::regress, X.cols(), s.fit_intercept);
        return res;
    }
    res.lambdas = enet_grid(lmax, eps, n_alphas);
    const auto path = enet_path(X, y, Task::regress, res.lambdas, lasso);
    const double n = static_cast<double>(X.rows());
    const double penalty = ic == InfoCriterion::aic ? 2.0 : std::log(n);
    for (const auto& m : path) {
        const double rss = (y - m.decision(X)).squaredNorm();
        const int df = static_cast<int>((m.coef.array() != 0.0).count());
        res.df.push_back(df);
        res.criterion.push_back(n * std::log(std::max(rss, std::numeric_limits<double>::min()) / n) + penalty * df);
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(res.criterion.begin(), res.criterion.end()) - res.criterion.begin());
    res.lambda = res.lambdas[best];
    res.model = path[best];
    return res;
}

}  // namespace stackgen
