#include "rsl/limits.hpp"

#include <cmath>
#include <functional>
#include <thread>

#include "rsl/errors.hpp"
#include "rsl/stats.hpp"

namespace rsl {

namespace {

using VectorField = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

Trajectory rk4(const VectorField& field, const Eigen::VectorXd& x, std::size_t steps) {
    if (steps < 1) throw ValidationError("rk4: grid needs at least one step");
    const double h = 1.0 / static_cast<double>(steps);
    Trajectory traj;
    traj.states.reserve(steps + 1);
    traj.states.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * h;
        const Eigen::VectorXd& y = traj.states.back();
        const Eigen::VectorXd k1 = field(t, y);
        const Eigen::VectorXd k2 = field(t + 0.5 * h, y + 0.5 * h * k1);
        const Eigen::VectorXd k3 = field(t + 0.5 * h, y + 0.5 * h * k2);
        const Eigen::VectorXd k4 = field(t + h, y + h * k3);
        Eigen::VectorXd next = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double norm = next.norm();
        if (!(norm <= kExplosionThreshold)) throw ExplosionError(k + 1, norm);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

// Runs fn(i) for i in [0, n) on `workers` threads. Exceptions propagate from
// the lowest failing index, so outcomes do not depend on the worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const auto w = static_cast<std::size_t>(workers);
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += w) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

Trajectory solve_neural_ode(const LayerFunction& f, const Activation& act,
                            const Eigen::VectorXd& x, std::size_t steps) {
    if (x.size() != f.d) throw ValidationError("solve_neural_ode: dimension mismatch");
    return rk4(
        [&](double t, const Eigen::VectorXd& h) {
            Eigen::VectorXd z = f.a_of(t) * h + f.b_of(t);
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = act.f(z[i]);
            return z;
        },
        x, steps);
}

Trajectory solve_linear_ode(const LayerFunction& f, const Eigen::VectorXd& x, std::size_t steps) {
    if (x.size() != f.d) throw ValidationError("solve_linear_ode: dimension mismatch");
    return rk4(
        [&](double t, const Eigen::VectorXd& h) -> Eigen::VectorXd {
            return f.a_of(t) * h + f.b_of(t);
        },
        x, steps);
}

Eigen::VectorXd SdeSpec::drift(double t, const Eigen::VectorXd& h) const {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(h.size());
    if (beta_is_one) mu += trend.a_of(t) * h + trend.b_of(t);
    if (d2_at_zero != 0.0) {
        const auto [sigma_a, sigma_b] = covariance_tensors(ito, t);
        mu += 0.5 * d2_at_zero * q_field(sigma_a, sigma_b, h);
    }
    return mu;
}

Trajectory em_sde(const SdeSpec& spec, const Eigen::VectorXd& x, const ItoPath& path,
                  std::size_t steps) {
    if (steps < 1) throw ValidationError("em_sde: grid needs at least one step");
    if (path.fine_steps() % steps != 0) {
        throw GridMismatchError("em_sde: grid of " + std::to_string(steps) +
                                " steps does not subsample the fine path (" +
                                std::to_string(path.fine_steps()) + " steps)");
    }
    if (x.size() != path.dim()) throw ValidationError("em_sde: dimension mismatch");
    const std::size_t stride = path.fine_steps() / steps;
    const double dt = 1.0 / static_cast<double>(steps);

    Trajectory traj;
    traj.states.reserve(steps + 1);
    traj.states.push_back(x);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Eigen::VectorXd& h = traj.states.back();
        const Eigen::MatrixXd dwa = path.wa_fine((k + 1) * stride) - path.wa_fine(k * stride);
        const Eigen::VectorXd dwb = path.wb_fine((k + 1) * stride) - path.wb_fine(k * stride);
        Eigen::VectorXd next = h + spec.drift(t, h) * dt + dwa * h + dwb;
        const double norm = next.norm();
        if (!(norm <= kExplosionThreshold)) throw ExplosionError(k + 1, norm);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

double strong_error(const Trajectory& reference, const HiddenTrajectory& approx) {
    const std::size_t coarse = approx.depth();
    if (coarse == 0 || reference.steps() % coarse != 0) {
        throw GridMismatchError("strong_error: approx grid must subsample the reference grid");
    }
    const std::size_t stride = reference.steps() / coarse;
    double sup = 0.0;
    for (std::size_t k = 0; k <= coarse; ++k) {
        sup = std::max(sup, (reference.states[k * stride] - approx.states[k]).norm());
    }
    return sup;
}

std::string to_string(ConvergenceCase c) {
    switch (c) {
        case ConvergenceCase::regime1_ode: return "regime1_ode";
        case ConvergenceCase::regime2_ode: return "regime2_ode";
        case ConvergenceCase::regime2_sde: return "regime2_sde";
    }
    return "unknown";
}

ConvergenceResult convergence_study(const ConvergenceConfig& cfg,
                                    const std::vector<std::size_t>& depths, std::size_t n_paths,
                                    std::uint64_t seed) {
    if (depths.size() < 2) throw ValidationError("convergence_study: needs >= 2 depths");
    if (n_paths < 1) throw ValidationError("convergence_study: needs >= 1 path");
    for (std::size_t i = 0; i < depths.size(); ++i) {
        if ((depths[i] & (depths[i] - 1)) != 0) {
            throw ValidationError("convergence_study: depths must be dyadic");
        }
        if (i > 0 && depths[i] <= depths[i - 1]) {
            throw ValidationError("convergence_study: depths must be strictly increasing");
        }
    }
    const std::size_t deepest = depths.back();
    const bool sde = cfg.kind == ConvergenceCase::regime2_sde;
    if (sde) {
        if (cfg.oracle_refinement < 16) {
            throw ValidationError("convergence_study: SDE oracle needs >= 16x refinement");
        }
        if (cfg.alpha != 0.0) throw ValidationError("regime2_sde requires alpha = 0");
        if (cfg.beta < 1.0) throw ValidationError("regime2_sde requires beta >= 1");
    } else {
        if (std::abs(cfg.alpha + cfg.beta - 1.0) > 1e-12) {
            throw ValidationError("ODE cases require alpha + beta = 1");
        }
        if (cfg.oracle_steps % deepest != 0) {
            throw ValidationError("oracle grid must be divisible by every depth");
        }
    }

    ConvergenceResult result;
    result.case_name = to_string(cfg.kind);
    result.depths = depths;
    result.n_paths = n_paths;
    result.seed = seed;

    const bool deterministic = cfg.kind == ConvergenceCase::regime1_ode;
    const SdeSpec sde_spec{cfg.trend, cfg.ito, cfg.act.d2_at_zero, cfg.beta == 1.0};

    // Deterministic oracle for the ODE cases, computed once. The neural ODE
    // applies when beta = 0; any beta > 0 falls in the linear-limit case.
    Trajectory ode_oracle;
    if (!sde) {
        ode_oracle = (cfg.beta == 0.0) ? solve_neural_ode(cfg.trend, cfg.act, cfg.x, cfg.oracle_steps)
                                       : solve_linear_ode(cfg.trend, cfg.x, cfg.oracle_steps);
    }

    const std::size_t effective_paths = deterministic ? 1 : n_paths;
    std::vector<std::vector<double>> sq_errors(effective_paths);
    std::vector<char> exploded(effective_paths, 0);

    parallel_for(effective_paths, cfg.workers, [&](std::size_t p) {
        try {
            std::vector<double> per_depth;
            per_depth.reserve(depths.size());
            ItoPath fine;
            Trajectory oracle;
            if (cfg.kind == ConvergenceCase::regime2_sde) {
                fine = sample_ito_path(cfg.ito, deepest, cfg.oracle_refinement, seed, p);
                oracle = em_sde(sde_spec, cfg.x, fine, deepest * cfg.oracle_refinement);
            } else if (cfg.kind == ConvergenceCase::regime2_ode) {
                fine = sample_ito_path(cfg.ito, deepest, 1, seed, p);
            }
            for (std::size_t depth : depths) {
                WeightTensor w;
                if (deterministic) {
                    w = regime1_weights(cfg.trend, cfg.beta, depth, cfg.alpha);
                } else {
                    w = regime2_weights(cfg.trend, cfg.beta, depth, fine.with_coarse(depth),
                                        cfg.alpha);
                }
                const HiddenTrajectory h = forward_hidden(cfg.x, w, cfg.act);
                const double e = sde ? strong_error(oracle, h) : strong_error(ode_oracle, h);
                per_depth.push_back(e * e);
            }
            sq_errors[p] = std::move(per_depth);
        } catch (const ExplosionError&) {
            exploded[p] = 1;
        }
    });

    std::size_t n_exploded = 0;
    for (char e : exploded) n_exploded += e;
    result.exploded_paths = n_exploded;
    if (static_cast<double>(n_exploded) > 0.01 * static_cast<double>(effective_paths)) {
        throw NumericalError("convergence_study: " + std::to_string(n_exploded) + " of " +
                             std::to_string(effective_paths) + " paths exploded (> 1%)");
    }

    std::vector<double> log_l, log_rms;
    for (std::size_t di = 0; di < depths.size(); ++di) {
        std::vector<double> samples;
        samples.reserve(effective_paths);
        for (std::size_t p = 0; p < effective_paths; ++p) {
            if (!exploded[p]) samples.push_back(sq_errors[p][di]);
        }
        const MeanStderr ms = mean_stderr(samples);
        result.errors.push_back(ms.mean);
        result.stderrs.push_back(ms.stderr_);
        if (ms.mean <= 0.0) {
            throw NumericalError("convergence_study: zero error at depth " +
                                 std::to_string(depths[di]) + "; log-log fit undefined");
        }
        log_l.push_back(std::log(static_cast<double>(depths[di])));
        log_rms.push_back(0.5 * std::log(ms.mean));
    }
    result.slope = ols_fit(log_l, log_rms).slope;
    return result;
}

}  // namespace rsl
