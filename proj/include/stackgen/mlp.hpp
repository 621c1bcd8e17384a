#pragma once

#include <cstdint>
#include <vector>

#include "stackgen/common.hpp"
#include "stackgen/rng.hpp"

namespace stackgen {

enum class Activation { relu, tanh, logistic };

const char* to_string(Activation a);
Activation parse_activation(const std::string& text);

struct MlpOptions {
    std::vector<int> hidden_layer_sizes{100};
    Activation activation = Activation::relu;
    double alpha = 1e-4;  // L2 penalty
    int batch_size = 0;   // 0: min(200, n)
    double learning_rate_init = 1e-3;
    double beta_1 = 0.9;
    double beta_2 = 0.999;
    double epsilon = 1e-8;
    int max_iter = 200;   // epochs
    double tol = 1e-4;
    int n_iter_no_change = 10;
    bool early_stopping = false;
    double validation_fraction = 0.1;
};

// Fully connected network. weights[l] maps layer l (rows) to layer l + 1
// (columns). The output unit is linear for regression and logistic for
// classification.
struct Mlp {
    Task task = Task::regress;
    Activation activation = Activation::relu;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    int n_iter = 0;

    // Pre-link output of the last layer.
    Vector raw(const Matrix& X) const;
    Vector predict(const Matrix& X) const;
};

struct MlpGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
};

// Scaled-uniform initialisation: bound sqrt(f / (fan_in + fan_out)) with
// f = 2 for logistic units and 6 otherwise.
Mlp init_mlp(std::size_t p, const std::vector<int>& hidden, Activation act, Task task, Rng& rng);

// Mean loss over the rows of X (half squared error, or log loss) plus
// alpha / (2n) * sum of squared weights, and its gradient.
double mlp_loss_gradient(const Mlp& net, const Matrix& X, const Vector& y, double alpha, MlpGradient* grad);

// Adam on shuffled mini-batches. Training stops after n_iter_no_change
// epochs without an improvement larger than tol in the training loss, or
// in the validation loss when early_stopping is set (best weights are then
// restored).
Mlp fit_mlp(const Matrix& X, const Vector& y, Task task, const MlpOptions& opt, std::uint64_t seed);

}  // namespace stackgen
