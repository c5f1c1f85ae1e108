#include "rsl/train.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "rsl/backprop.hpp"
#include "rsl/diagnostics.hpp"
#include "rsl/errors.hpp"
#include "rsl/rng.hpp"
#include "rsl/stats.hpp"

namespace rsl {

Dataset gen_synthetic(std::size_t n, int d, int k, std::uint64_t seed) {
    if (n < 1 || d < 1 || k < 1) throw ValidationError("gen_synthetic: N, d, K must be >= 1");
    Dataset data;
    data.d = d;
    data.k_steps = k;
    data.seed = seed;
    data.inputs.resize(static_cast<Eigen::Index>(n), d);
    data.targets.resize(static_cast<Eigen::Index>(n), d);

    const std::uint64_t input_seed = derive_seed(seed, "data");
    const double step = 1.0 / std::sqrt(static_cast<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd z(d);
        for (;;) {
            RandomStream stream(input_seed, i, 0);
            Eigen::VectorXd x(d);
            for (int j = 0; j < d; ++j) x[j] = 2.0 * stream.uniform() - 1.0;
            z = x;
            for (int step_idx = 1; step_idx <= k; ++step_idx) {
                const double angle = 5.0 * step_idx * std::numbers::pi / k;
                const Eigen::VectorXd g =
                    std::sin(angle) * z + std::cos(angle) * Eigen::VectorXd::Ones(d);
                for (int j = 0; j < d; ++j) z[j] += step * std::tanh(g[j]);
            }
            if (z.norm() > 0.0) {
                data.inputs.row(static_cast<Eigen::Index>(i)) = x.transpose();
                break;
            }
        }
        data.targets.row(static_cast<Eigen::Index>(i)) = (z / z.norm()).transpose();
    }
    return data;
}

double evaluate_loss(const WeightTensor& w, const Activation& act, const Dataset& data) {
    if (data.d != w.d) throw ValidationError("evaluate_loss: dimension mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.inputs.rows(); ++i) {
        const HiddenTrajectory traj = forward_hidden(data.inputs.row(i).transpose(), w, act);
        total += (traj.states.back() - data.targets.row(i).transpose()).squaredNorm();
    }
    return total / static_cast<double>(data.inputs.rows());
}

Gradients loss_gradients(const WeightTensor& w, const Activation& act,
                         const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
    const std::size_t depth = w.depth();
    const auto batch = inputs.rows();
    if (batch == 0 || targets.rows() != batch) {
        throw ValidationError("loss_gradients: empty or mismatched batch");
    }
    Gradients grads;
    grads.a.assign(depth, Eigen::MatrixXd::Zero(w.d, w.d));
    grads.b.assign(depth, Eigen::VectorXd::Zero(w.d));
    grads.delta.assign(depth, 0.0);

    for (Eigen::Index i = 0; i < batch; ++i) {
        const HiddenTrajectory traj = forward_hidden(inputs.row(i).transpose(), w, act);
        const JacobianTrajectory g = backward_jacobians(w, traj, act);
        const Eigen::VectorXd dldy =
            2.0 / static_cast<double>(batch) * (traj.states.back() - targets.row(i).transpose());
        for (std::size_t k = 0; k < depth; ++k) {
            const Eigen::VectorXd z = w.a[k] * traj.states[k] + w.b[k];
            const Eigen::VectorXd v = g.mats[k + 1].transpose() * dldy;
            const double delta = w.step_size(k);
            Eigen::VectorXd sz(w.d), dz(w.d);
            for (Eigen::Index j = 0; j < w.d; ++j) {
                sz[j] = act.f(z[j]);
                dz[j] = act.d1(z[j]);
            }
            const Eigen::VectorXd scaled = dz.cwiseProduct(v);
            grads.a[k] += delta * scaled * traj.states[k].transpose();
            grads.b[k] += delta * scaled;
            grads.delta[k] += sz.dot(v);
        }
    }
    return grads;
}

namespace {

WeightTensor initial_weights(const TrainConfig& config, int d) {
    WeightTensor w = gaussian_init_weights(config.depth, d, derive_seed(config.seed, "init"));
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.depth));
    std::vector<double> delta(config.depth, scale);
    if (config.delta_mode == DeltaMode::per_layer_scalar) {
        RandomStream signs(derive_seed(config.seed, "init-delta"), 0, 0);
        for (auto& v : delta) v = signs.uniform() < 0.5 ? -scale : scale;
    }
    w.delta = std::move(delta);
    return w;
}

}  // namespace

TrainResult sgd_train(const TrainConfig& config, const Dataset& data) {
    if (config.batch_size == 0 || config.batch_size > data.size()) {
        throw ValidationError("sgd_train: batch size must lie in [1, N]");
    }
    if (!(config.learning_rate > 0.0)) throw ValidationError("sgd_train: learning rate must be > 0");
    if (config.early_stop < 0.0) throw ValidationError("sgd_train: early stop must be >= 0");
    if (config.depth < 1) throw ValidationError("sgd_train: depth must be >= 1");

    const Activation act = make_activation(config.activation);
    const std::size_t n = data.size();

    TrainResult result;
    result.weights = initial_weights(config, data.d);

    double loss = evaluate_loss(result.weights, act, data);
    if (loss <= config.early_stop) {
        result.stopped_early = true;
        return result;
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::uint64_t shuffle_seed = derive_seed(config.seed, "shuffle");

    std::size_t updates = 0;
    std::size_t epoch = 0;
    while (updates < config.max_updates) {
        RandomStream shuffle(shuffle_seed, epoch, 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle.uniform_below(i)]);
        }
        for (std::size_t start = 0; start + config.batch_size <= n && updates < config.max_updates;
             start += config.batch_size) {
            Eigen::MatrixXd xs(config.batch_size, data.d);
            Eigen::MatrixXd ys(config.batch_size, data.d);
            for (std::size_t j = 0; j < config.batch_size; ++j) {
                xs.row(static_cast<Eigen::Index>(j)) =
                    data.inputs.row(static_cast<Eigen::Index>(order[start + j]));
                ys.row(static_cast<Eigen::Index>(j)) =
                    data.targets.row(static_cast<Eigen::Index>(order[start + j]));
            }
            const Gradients grads = loss_gradients(result.weights, act, xs, ys);
            WeightTensor& w = result.weights;
            for (std::size_t k = 0; k < w.depth(); ++k) {
                w.a[k] -= config.learning_rate * grads.a[k];
                w.b[k] -= config.learning_rate * grads.b[k];
            }
            if (config.delta_mode == DeltaMode::shared_scalar) {
                const double total =
                    std::accumulate(grads.delta.begin(), grads.delta.end(), 0.0);
                for (auto& v : *w.delta) v -= config.learning_rate * total;
            } else {
                for (std::size_t k = 0; k < w.depth(); ++k) {
                    (*w.delta)[k] -= config.learning_rate * grads.delta[k];
                }
            }
            ++updates;

            loss = evaluate_loss(w, act, data);
            result.loss_history.push_back(loss);
            if (!(loss <= 1e4)) throw DivergenceError(loss, updates);
            if (loss <= config.early_stop) {
                result.stopped_early = true;
                result.updates = updates;
                return result;
            }
        }
        ++epoch;
    }
    result.updates = updates;
    return result;
}

SweepResult alpha_beta_sweep(const std::vector<std::size_t>& depths, const TrainConfig& base,
                             const std::vector<std::uint64_t>& seeds, const Dataset& data) {
    if (depths.size() < 3) throw ValidationError("alpha_beta_sweep: needs >= 3 depths");
    if (seeds.size() < 2) throw ValidationError("alpha_beta_sweep: needs >= 2 seeds");

    SweepResult out;
    out.depths = depths;
    out.seeds = seeds;

    const bool relu = base.activation.rfind("relu", 0) == 0;
    for (std::uint64_t seed : seeds) {
        std::vector<WeightTensor> trained;
        std::vector<double> logl, logdelta;
        for (std::size_t depth : depths) {
            TrainConfig cfg = base;
            cfg.depth = depth;
            cfg.seed = seed;
            TrainResult r = sgd_train(cfg, data);
            double delta_norm = 0.0;
            for (double v : *r.weights.delta) delta_norm = std::max(delta_norm, std::abs(v));
            logl.push_back(std::log(static_cast<double>(depth)));
            logdelta.push_back(std::log(delta_norm));
            trained.push_back(relu ? relu_fold(r.weights) : std::move(r.weights));
        }
        out.alpha_hats.push_back(-ols_fit(logl, logdelta).slope);
        const BetaEstimate est = estimate_beta(trained);
        out.beta_hats.push_back(est.beta_hat.value_or(std::numeric_limits<double>::quiet_NaN()));
    }

    auto summarize = [](const std::vector<double>& v, double& mean, double& sd) {
        const MeanStderr ms = mean_stderr(v);
        mean = ms.mean;
        sd = ms.stderr_ * std::sqrt(static_cast<double>(v.size()));
    };
    summarize(out.alpha_hats, out.alpha_mean, out.alpha_std);
    summarize(out.beta_hats, out.beta_mean, out.beta_std);
    std::vector<double> sums;
    for (std::size_t i = 0; i < out.alpha_hats.size(); ++i) {
        sums.push_back(out.alpha_hats[i] + out.beta_hats[i]);
    }
    summarize(sums, out.sum_mean, out.sum_std);
    return out;
}

}  // namespace rsl
