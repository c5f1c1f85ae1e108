#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rsl/forward.hpp"
#include "rsl/processes.hpp"

namespace rsl {

// Input-target pairs from the synthetic dynamical system; targets are unit
// vectors, inputs uniform on [-1,1]^d.
struct Dataset {
    Eigen::MatrixXd inputs;   // N x d
    Eigen::MatrixXd targets;  // N x d
    int d = 0;
    int k_steps = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

// x ~ U[-1,1]^d; z_0 = x; z_k = z_{k-1} + K^{-1/2} tanh_d(sin(5 k pi / K) z_{k-1}
// + cos(5 k pi / K) 1_d); y = z_K / ||z_K||. Defaults d = 10, K = 100.
Dataset gen_synthetic(std::size_t n, int d = 10, int k = 100, std::uint64_t seed = 0);

enum class DeltaMode { shared_scalar, per_layer_scalar };

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    double early_stop = 0.01;    // stop once the training loss falls below this
    std::size_t max_updates = 160;
    std::size_t depth = 8;
    std::string activation = "tanh";
    DeltaMode delta_mode = DeltaMode::shared_scalar;
    std::uint64_t seed = 0;
};

struct TrainResult {
    WeightTensor weights;
    std::vector<double> loss_history;  // full training loss after each update
    bool stopped_early = false;
    std::size_t updates = 0;
};

// (1/N) sum_i || h_L^{x_i} - y_i ||^2.
double evaluate_loss(const WeightTensor& w, const Activation& act, const Dataset& data);

// Gradients of the mean squared loss over the given rows, assembled from
// the backward Jacobians: with z_k = A_k h_k + b_k and
// v_k = g_{k+1}^T dl/dy,
//   dl/dA_k     = delta_k (sigma'_d(z_k) .* v_k) h_k^T,
//   dl/db_k     = delta_k (sigma'_d(z_k) .* v_k),
//   dl/ddelta_k = sigma_d(z_k) . v_k,
// where dl/dy = 2 (h_L - y) / batch.
struct Gradients {
    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::VectorXd> b;
    std::vector<double> delta;
};

Gradients loss_gradients(const WeightTensor& w, const Activation& act,
                         const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

// Minibatch SGD on the mean-square loss with constant learning rate, until
// the training loss falls below early_stop or max_updates is reached.
// Weights start from the Gaussian depth scaling; delta starts at L^{-1/2}
// (shared) or i.i.d. +/- L^{-1/2} (per layer).
TrainResult sgd_train(const TrainConfig& config, const Dataset& data);

// Depth/seed grid of trained networks, summarized by the fitted step-size
// exponent alpha-hat (log-log slope of max_k |delta_k| against L) and the
// cumulative-sum exponent beta-hat.
struct SweepResult {
    std::vector<std::size_t> depths;
    std::vector<std::uint64_t> seeds;
    std::vector<double> alpha_hats;  // one per seed
    std::vector<double> beta_hats;
    double alpha_mean = 0.0, alpha_std = 0.0;
    double beta_mean = 0.0, beta_std = 0.0;
    double sum_mean = 0.0, sum_std = 0.0;
};

SweepResult alpha_beta_sweep(const std::vector<std::size_t>& depths, const TrainConfig& base,
                             const std::vector<std::uint64_t>& seeds, const Dataset& data);

}  // namespace rsl
