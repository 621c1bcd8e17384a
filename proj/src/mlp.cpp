#include "stackgen/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "stackgen/ensemble.hpp"

namespace stackgen {

namespace {

void activate(Matrix& Z, Activation a) {
    switch (a) {
        case Activation::relu: Z = Z.cwiseMax(0.0); break;
        case Activation::tanh: Z = Z.array().tanh().matrix(); break;
        case Activation::logistic: Z = Z.unaryExpr([](double z) { return logistic(z); }); break;
    }
}

// Multiplies delta by the activation derivative expressed through the
// activated values A.
void scale_by_derivative(Matrix& delta, const Matrix& A, Activation a) {
    switch (a) {
        case Activation::relu: delta = (A.array() > 0.0).select(delta, 0.0); break;
        case Activation::tanh: delta.array() *= 1.0 - A.array().square(); break;
        case Activation::logistic: delta.array() *= A.array() * (1.0 - A.array()); break;
    }
}

// Activations of every layer; the last entry holds the raw output.
std::vector<Matrix> forward(const Mlp& net, const Matrix& X) {
    std::vector<Matrix> acts;
    acts.reserve(net.weights.size() + 1);
    acts.push_back(X);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Matrix Z = acts.back() * net.weights[l];
        Z.rowwise() += net.biases[l].transpose();
        if (l + 1 < net.weights.size()) activate(Z, net.activation);
        acts.push_back(std::move(Z));
    }
    return acts;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Matrix rows_of(const Matrix& X, const std::vector<std::size_t>& idx, std::size_t from, std::size_t to) {
    Matrix out(static_cast<Eigen::Index>(to - from), X.cols());
    for (std::size_t i = from; i < to; ++i) out.row(static_cast<Eigen::Index>(i - from)) = X.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

Vector rows_of(const Vector& y, const std::vector<std::size_t>& idx, std::size_t from, std::size_t to) {
    Vector out(static_cast<Eigen::Index>(to - from));
    for (std::size_t i = from; i < to; ++i) out(static_cast<Eigen::Index>(i - from)) = y(static_cast<Eigen::Index>(idx[i]));
    return out;
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::logistic: return "logistic";
    }
    return "relu";
}

Activation parse_activation(const std::string& text) {
    if (text == "relu") return Activation::relu;
    if (text == "tanh") return Activation::tanh;
    if (text == "logistic") return Activation::logistic;
    fail(ErrorCode::invalid_argument, "nnet: unknown activation '" + text + "'");
}

Vector Mlp::raw(const Matrix& X) const {
    if (weights.empty() || X.cols() != weights.front().rows()) fail(ErrorCode::invalid_argument, "nnet: column mismatch");
    return forward(*this, X).back().col(0);
}

Vector Mlp::predict(const Matrix& X) const {
    Vector out = raw(X);
    if (task == Task::classify) out = out.unaryExpr([](double z) { return logistic(z); });
    return out;
}

Mlp init_mlp(std::size_t p, const std::vector<int>& hidden, Activation act, Task task, Rng& rng) {
    if (hidden.empty()) fail(ErrorCode::invalid_argument, "nnet: hidden_layer_sizes must not be empty");
    for (int h : hidden)
        if (h <= 0) fail(ErrorCode::invalid_argument, "nnet: hidden layer sizes must be positive");
    Mlp net;
    net.task = task;
    net.activation = act;
    std::vector<Eigen::Index> sizes{static_cast<Eigen::Index>(p)};
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(1);
    const double factor = act == Activation::logistic ? 2.0 : 6.0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double bound = std::sqrt(factor / static_cast<double>(sizes[l] + sizes[l + 1]));
        Matrix W(sizes[l], sizes[l + 1]);
        for (Eigen::Index c = 0; c < W.cols(); ++c)
            for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = rng.uniform(-bound, bound);
        Vector b(sizes[l + 1]);
        for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(W));
        net.biases.push_back(std::move(b));
    }
    return net;
}

double mlp_loss_gradient(const Mlp& net, const Matrix& X, const Vector& y, double alpha, MlpGradient* grad) {
    const auto acts = forward(net, X);
    const double n = static_cast<double>(X.rows());
    const Vector z = acts.back().col(0);
    double loss = 0.0;
    Matrix delta(X.rows(), 1);
    if (net.task == Task::regress) {
        delta.col(0) = z - y;
        loss = 0.5 * delta.squaredNorm() / n;
    } else {
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            loss += softplus(z(i)) - y(i) * z(i);
            delta(i, 0) = logistic(z(i)) - y(i);
        }
        loss /= n;
    }
    double wss = 0.0;
    for (const auto& W : net.weights) wss += W.squaredNorm();
    loss += alpha / (2.0 * n) * wss;
    if (!grad) return loss;

    const std::size_t L = net.weights.size();
    grad->weights.resize(L);
    grad->biases.resize(L);
    for (std::size_t l = L; l-- > 0;) {
        grad->weights[l] = (acts[l].transpose() * delta + alpha * net.weights[l]) / n;
        grad->biases[l] = delta.colwise().sum().transpose() / n;
        if (l > 0) {
            Matrix next = delta * net.weights[l].transpose();
            scale_by_derivative(next, acts[l], net.activation);
            delta = std::move(next);
        }
    }
    return loss;
}

Mlp fit_mlp(const Matrix& X, const Vector& y, Task task, const MlpOptions& opt, std::uint64_t seed) {
    if (X.rows() != y.size()) fail(ErrorCode::invalid_argument, "nnet: size mismatch");
    if (opt.max_iter < 1) fail(ErrorCode::invalid_argument, "nnet: max_iter must be at least 1");
    if (!(opt.learning_rate_init > 0.0)) fail(ErrorCode::invalid_argument, "nnet: learning_rate_init must be positive");
    if (opt.alpha < 0.0) fail(ErrorCode::invalid_argument, "nnet: alpha must be non-negative");
    Rng rng(seed);
    Mlp net = init_mlp(static_cast<std::size_t>(X.cols()), opt.hidden_layer_sizes, opt.activation, task, rng);

    const auto n = static_cast<std::size_t>(X.rows());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Matrix Xtr = X, Xval;
    Vector ytr = y, yval;
    if (opt.early_stopping) {
        if (!(opt.validation_fraction > 0.0 && opt.validation_fraction < 1.0))
            fail(ErrorCode::invalid_argument, "nnet: validation_fraction must lie in (0, 1)");
        const auto n_val = static_cast<std::size_t>(std::ceil(opt.validation_fraction * static_cast<double>(n)));
        if (n_val < 1 || n_val >= n) fail(ErrorCode::invalid_argument, "nnet: too few rows for early stopping");
        rng.shuffle(order);
        Xval = rows_of(X, order, 0, n_val);
        yval = rows_of(y, order, 0, n_val);
        Xtr = rows_of(X, order, n_val, n);
        ytr = rows_of(y, order, n_val, n);
        order.resize(n - n_val);
        std::iota(order.begin(), order.end(), std::size_t{0});
    }
    const std::size_t n_train = order.size();
    const std::size_t batch = opt.batch_size > 0 ? std::min<std::size_t>(static_cast<std::size_t>(opt.batch_size), n_train)
                                                 : std::min<std::size_t>(200, n_train);

    MlpGradient m1, m2, g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        m1.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        m1.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    m2 = m1;
    long step = 0;
    double best = std::numeric_limits<double>::infinity();
    int no_improve = 0;
    Mlp best_net = net;
    bool converged = false;

    for (int epoch = 0; epoch < opt.max_iter; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t from = 0; from < n_train; from += batch) {
            const std::size_t to = std::min(n_train, from + batch);
            const Matrix Xb = rows_of(Xtr, order, from, to);
            const Vector yb = rows_of(ytr, order, from, to);
            total += mlp_loss_gradient(net, Xb, yb, opt.alpha, &g) * static_cast<double>(to - from);
            ++step;
            const double lr = opt.learning_rate_init * std::sqrt(1.0 - std::pow(opt.beta_2, step)) /
                              (1.0 - std::pow(opt.beta_1, step));
            auto adam = [&](auto& param, auto& grad, auto& mom, auto& vel) {
                mom = opt.beta_1 * mom + (1.0 - opt.beta_1) * grad;
                vel = opt.beta_2 * vel + (1.0 - opt.beta_2) * grad.cwiseProduct(grad);
                param.array() -= lr * mom.array() / (vel.array().sqrt() + opt.epsilon);
            };
            for (std::size_t l = 0; l < net.weights.size(); ++l) {
                adam(net.weights[l], g.weights[l], m1.weights[l], m2.weights[l]);
                adam(net.biases[l], g.biases[l], m1.biases[l], m2.biases[l]);
            }
        }
        net.n_iter = epoch + 1;
        const double current = opt.early_stopping ? mlp_loss_gradient(net, Xval, yval, 0.0, nullptr)
                                                  : total / static_cast<double>(n_train);
        if (!std::isfinite(current)) fail(ErrorCode::numeric, "nnet: loss diverged");
        if (current > best - opt.tol) ++no_improve;
        else no_improve = 0;
        if (current < best) {
            best = current;
            if (opt.early_stopping) best_net = net;
        }
        if (no_improve > opt.n_iter_no_change) {
            converged = true;
            break;
        }
    }
    if (!converged) warn("nnet: reached max_iter before the loss stabilised");
    if (opt.early_stopping) {
        const int iters = net.n_iter;
        net = std::move(best_net);
        net.n_iter = iters;
    }
    return net;
}

}  // namespace stackgen
