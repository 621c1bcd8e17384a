#include "stackgen/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace stackgen {

namespace {

constexpr double kTau = 1e-12;
constexpr double kUnbounded = 1e100;

// Dual problem  min 0.5 a'Qa + p'a  s.t.  y'a = 0, 0 <= a_t <= C_t,
// with Q_st = y_s y_t x_s'x_t (+ extra_s on the diagonal). Variable t refers
// to data row row[t].
class SmoSolver {
public:
    SmoSolver(const Matrix& X, std::vector<int> y, std::vector<Eigen::Index> row, Vector p, std::vector<double> cap,
              Vector extra)
        : X_(X), y_(std::move(y)), row_(std::move(row)), p_(std::move(p)), cap_(std::move(cap)),
          extra_(std::move(extra)) {
        const auto l = static_cast<Eigen::Index>(y_.size());
        alpha_ = Vector::Zero(l);
        G_ = p_;
        QD_.resize(l);
        for (Eigen::Index t = 0; t < l; ++t) QD_(t) = X_.row(row_[t]).squaredNorm() + extra_(t);
    }

    bool solve(double eps, long max_iter) {
        const auto l = static_cast<Eigen::Index>(y_.size());
        if (max_iter < 0) max_iter = std::max<long>(10000000L, 100L * static_cast<long>(l));
        Vector Qi(l), Qj(l);
        for (long iter = 0; iter < max_iter; ++iter) {
            Eigen::Index i = -1, j = -1;
            if (select_working_set(eps, i, j, Qi)) return true;
            column(j, Qj);
            const double Ci = cap_[static_cast<std::size_t>(i)], Cj = cap_[static_cast<std::size_t>(j)];
            const double old_ai = alpha_(i), old_aj = alpha_(j);
            double ai = old_ai, aj = old_aj;
            if (y_[static_cast<std::size_t>(i)] != y_[static_cast<std::size_t>(j)]) {
                double quad = QD_(i) + QD_(j) + 2.0 * Qi(j);
                if (quad <= 0) quad = kTau;
                const double delta = (-G_(i) - G_(j)) / quad;
                const double diff = ai - aj;
                ai += delta;
                aj += delta;
                if (diff > 0) {
                    if (aj < 0) { aj = 0; ai = diff; }
                } else {
                    if (ai < 0) { ai = 0; aj = -diff; }
                }
                if (diff > Ci - Cj) {
                    if (ai > Ci) { ai = Ci; aj = Ci - diff; }
                } else {
                    if (aj > Cj) { aj = Cj; ai = Cj + diff; }
                }
            } else {
                double quad = QD_(i) + QD_(j) - 2.0 * Qi(j);
                if (quad <= 0) quad = kTau;
                const double delta = (G_(i) - G_(j)) / quad;
                const double sum = ai + aj;
                ai -= delta;
                aj += delta;
                if (sum > Ci) {
                    if (ai > Ci) { ai = Ci; aj = sum - Ci; }
                } else {
                    if (aj < 0) { aj = 0; ai = sum; }
                }
                if (sum > Cj) {
                    if (aj > Cj) { aj = Cj; ai = sum - Cj; }
                } else {
                    if (ai < 0) { ai = 0; aj = sum; }
                }
            }
            alpha_(i) = ai;
            alpha_(j) = aj;
            G_.noalias() += Qi * (ai - old_ai) + Qj * (aj - old_aj);
        }
        return false;
    }

    // Offset rho of the decision function w'x - rho.
    double rho() const {
        double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
        long nr_free = 0;
        for (Eigen::Index t = 0; t < alpha_.size(); ++t) {
            const int yt = y_[static_cast<std::size_t>(t)];
            const double yG = yt * G_(t);
            if (upper(t)) {
                if (yt == -1) ub = std::min(ub, yG);
                else lb = std::max(lb, yG);
            } else if (lower(t)) {
                if (yt == +1) ub = std::min(ub, yG);
                else lb = std::max(lb, yG);
            } else {
                ++nr_free;
                sum_free += yG;
            }
        }
        return nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;
    }

    Vector weights() const {
        Vector w = Vector::Zero(X_.cols());
        for (Eigen::Index t = 0; t < alpha_.size(); ++t)
            if (alpha_(t) != 0.0) w += (y_[static_cast<std::size_t>(t)] * alpha_(t)) * X_.row(row_[t]).transpose();
        return w;
    }

private:
    bool upper(Eigen::Index t) const { return alpha_(t) >= cap_[static_cast<std::size_t>(t)]; }
    bool lower(Eigen::Index t) const { return alpha_(t) <= 0.0; }

    void column(Eigen::Index i, Vector& out) const {
        const Vector k = X_ * X_.row(row_[i]).transpose();
        const int yi = y_[static_cast<std::size_t>(i)];
        for (Eigen::Index t = 0; t < out.size(); ++t) out(t) = yi * y_[static_cast<std::size_t>(t)] * k(row_[t]);
        out(i) += extra_(i);
    }

    // Second-order working set selection; returns true at optimality.
    bool select_working_set(double eps, Eigen::Index& out_i, Eigen::Index& out_j, Vector& Qi) {
        double Gmax = -std::numeric_limits<double>::infinity(), Gmax2 = Gmax;
        Eigen::Index imax = -1, jmin = -1;
        double obj_diff_min = std::numeric_limits<double>::infinity();
        const auto l = alpha_.size();
        for (Eigen::Index t = 0; t < l; ++t) {
            if (y_[static_cast<std::size_t>(t)] == +1) {
                if (!upper(t) && -G_(t) >= Gmax) { Gmax = -G_(t); imax = t; }
            } else {
                if (!lower(t) && G_(t) >= Gmax) { Gmax = G_(t); imax = t; }
            }
        }
        if (imax < 0) return true;
        column(imax, Qi);
        const int yi = y_[static_cast<std::size_t>(imax)];
        for (Eigen::Index t = 0; t < l; ++t) {
            if (y_[static_cast<std::size_t>(t)] == +1) {
                if (lower(t)) continue;
                const double grad_diff = Gmax + G_(t);
                if (G_(t) >= Gmax2) Gmax2 = G_(t);
                if (grad_diff > 0) {
                    const double quad = QD_(imax) + QD_(t) - 2.0 * yi * Qi(t);
                    const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
                    if (obj <= obj_diff_min) { jmin = t; obj_diff_min = obj; }
                }
            } else {
                if (upper(t)) continue;
                const double grad_diff = Gmax - G_(t);
                if (-G_(t) >= Gmax2) Gmax2 = -G_(t);
                if (grad_diff > 0) {
                    const double quad = QD_(imax) + QD_(t) + 2.0 * yi * Qi(t);
                    const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
                    if (obj <= obj_diff_min) { jmin = t; obj_diff_min = obj; }
                }
            }
        }
        if (Gmax + Gmax2 < eps || jmin < 0) return true;
        out_i = imax;
        out_j = jmin;
        return false;
    }

    const Matrix& X_;
    std::vector<int> y_;
    std::vector<Eigen::Index> row_;
    Vector p_;
    std::vector<double> cap_;
    Vector extra_;
    Vector alpha_, G_, QD_;
};

double platt_prob(double f, double a, double b) {
    const double z = a * f + b;
    return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

}  // namespace

Vector LinearSvm::decision(const Matrix& X) const {
    if (X.cols() != coef.size()) fail(ErrorCode::invalid_argument, "svm: column mismatch");
    return (X * coef).array() + intercept;
}

Vector LinearSvm::predict(const Matrix& X) const {
    Vector f = decision(X);
    if (classify)
        for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = platt_prob(f(i), platt_a, platt_b);
    return f;
}

PlattParams fit_platt(const Vector& dec, const Vector& labels) {
    const Eigen::Index n = dec.size();
    double prior1 = 0, prior0 = 0;
    for (Eigen::Index i = 0; i < n; ++i) (labels(i) > 0.5 ? prior1 : prior0) += 1.0;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
    Vector t(n);
    for (Eigen::Index i = 0; i < n; ++i) t(i) = labels(i) > 0.5 ? hi : lo;

    auto value = [&](double A, double B) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = dec(i) * A + B;
            f += z >= 0 ? t(i) * z + std::log1p(std::exp(-z)) : (t(i) - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    double A = 0.0, B = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = value(A, B);
    for (int it = 0; it < 100; ++it) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = dec(i) * A + B;
            double p, q;
            if (z >= 0) {
                p = std::exp(-z) / (1.0 + std::exp(-z));
                q = 1.0 / (1.0 + std::exp(-z));
            } else {
                p = 1.0 / (1.0 + std::exp(z));
                q = std::exp(z) / (1.0 + std::exp(z));
            }
            const double d2 = p * q;
            h11 += dec(i) * dec(i) * d2;
            h22 += d2;
            h21 += dec(i) * d2;
            const double d1 = t(i) - p;
            g1 += dec(i) * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1.0;
        while (step >= 1e-10) {
            const double nA = A + step * dA, nB = B + step * dB;
            const double nf = value(nA, nB);
            if (nf < fval + 1e-4 * step * gd) {
                A = nA;
                B = nB;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if (step < 1e-10) break;
    }
    return {A, B};
}

double svm_primal_objective(const Matrix& X, const Vector& y, Task task, const SvmOptions& opt, const Vector& w,
                            double b) {
    const Vector f = (X * w).array() + b;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        if (task == Task::regress) {
            loss += std::max(0.0, std::abs(y(i) - f(i)) - opt.epsilon);
        } else {
            const double s = y(i) > 0.5 ? 1.0 : -1.0;
            const double h = std::max(0.0, 1.0 - s * f(i));
            loss += opt.loss == SvmLoss::squared_hinge ? h * h : h;
        }
    }
    return 0.5 * w.squaredNorm() + opt.C * loss;
}

LinearSvm fit_linear_svm(const Matrix& X, const Vector& y, Task task, const SvmOptions& opt) {
    if (!(opt.C > 0.0)) fail(ErrorCode::invalid_argument, "svm: C must be positive");
    if (!(opt.epsilon >= 0.0)) fail(ErrorCode::invalid_argument, "svm: epsilon must be non-negative");
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "svm: size mismatch");
    const Eigen::Index n = X.rows();
    std::vector<int> ys;
    std::vector<Eigen::Index> rows;
    std::vector<double> cap;
    Vector p, extra;
    if (task == Task::regress) {
        ys.resize(static_cast<std::size_t>(2 * n));
        rows.resize(static_cast<std::size_t>(2 * n));
        p.resize(2 * n);
        for (Eigen::Index i = 0; i < n; ++i) {
            ys[static_cast<std::size_t>(i)] = +1;
            ys[static_cast<std::size_t>(i + n)] = -1;
            rows[static_cast<std::size_t>(i)] = rows[static_cast<std::size_t>(i + n)] = i;
            p(i) = opt.epsilon - y(i);
            p(i + n) = opt.epsilon + y(i);
        }
        cap.assign(static_cast<std::size_t>(2 * n), opt.C);
        extra = Vector::Zero(2 * n);
    } else {
        ys.resize(static_cast<std::size_t>(n));
        rows.resize(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            ys[static_cast<std::size_t>(i)] = y(i) > 0.5 ? +1 : -1;
            rows[static_cast<std::size_t>(i)] = i;
        }
        p = Vector::Constant(n, -1.0);
        if (opt.loss == SvmLoss::squared_hinge) {
            cap.assign(static_cast<std::size_t>(n), kUnbounded);
            extra = Vector::Constant(n, 1.0 / (2.0 * opt.C));
        } else {
            cap.assign(static_cast<std::size_t>(n), opt.C);
            extra = Vector::Zero(n);
        }
    }
    SmoSolver solver(X, std::move(ys), std::move(rows), std::move(p), std::move(cap), std::move(extra));
    if (!solver.solve(opt.tol, opt.max_iter)) warn("svm: reached max_iter before meeting the tolerance");

    LinearSvm m;
    m.coef = solver.weights();
    m.intercept = -solver.rho();
    m.classify = task == Task::classify;
    if (m.classify) {
        const PlattParams pp = fit_platt(m.decision(X), y);
        m.platt_a = pp.a;
        m.platt_b = pp.b;
    }
    return m;
}

}  // namespace stackgen
