#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rsl/forward.hpp"
#include "rsl/processes.hpp"

namespace rsl {

// Vector-valued path on the uniform grid t_k = k/steps.
struct Trajectory {
    std::vector<Eigen::VectorXd> states;  // steps + 1 entries

    std::size_t steps() const { return states.size() - 1; }
    double time(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(steps()); }
};

// dH/dt = sigma_d(Abar_t H + bbar_t), classical RK4 on the grid.
Trajectory solve_neural_ode(const LayerFunction& f, const Activation& act,
                            const Eigen::VectorXd& x, std::size_t steps);

// dH/dt = Abar_t H + bbar_t.
Trajectory solve_linear_ode(const LayerFunction& f, const Eigen::VectorXd& x, std::size_t steps);

// Diffusive-limit coefficients. The Ito drift U rides inside the sampled
// path increments, so the explicit drift used by the schemes is only the
// part the increments cannot carry: 1_{beta=1} (Abar h + bbar) plus the
// Ito correction (1/2) sigma''(0) Q(t, h).
struct SdeSpec {
    LayerFunction trend;
    ItoSpec ito;
    double d2_at_zero = 0.0;
    bool beta_is_one = true;

    Eigen::VectorXd drift(double t, const Eigen::VectorXd& h) const;
};

// Euler-Maruyama on the given grid, consuming the path's actual increments:
//   h_{k+1} = h_k + mu(t_k, h_k) dt + dW^A_k h_k + dW^b_k.
// The grid must subsample the path's fine grid so that discrete network and
// oracle share one realization.
Trajectory em_sde(const SdeSpec& spec, const Eigen::VectorXd& x, const ItoPath& path,
                  std::size_t steps);

// sup over the coarse grid of || reference(t_k) - cte(approx, t_k) ||; the
// per-path integrand of E[sup ||.||^2]. The coarse grid must be a subset of
// the reference grid.
double strong_error(const Trajectory& reference, const HiddenTrajectory& approx);

enum class ConvergenceCase { regime1_ode, regime2_ode, regime2_sde };

std::string to_string(ConvergenceCase c);

struct ConvergenceConfig {
    ConvergenceCase kind = ConvergenceCase::regime1_ode;
    LayerFunction trend;
    ItoSpec ito;  // used by the regime-2 cases
    Activation act;
    double alpha = 1.0;
    double beta = 0.0;
    Eigen::VectorXd x;
    std::size_t oracle_steps = std::size_t{1} << 14;  // ODE reference grid
    std::size_t oracle_refinement = 32;               // SDE oracle, per unit depth
    int workers = 1;
};

struct ConvergenceResult {
    std::string case_name;
    std::vector<std::size_t> depths;
    std::vector<double> errors;   // per-depth estimate of E[sup_t ||.||^2]
    std::vector<double> stderrs;  // standard error of that mean
    double slope = 0.0;           // OLS slope of log RMS error vs log depth
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t exploded_paths = 0;
};

// For each depth: build weights coupled to a shared fine path (regime-2),
// run the discrete network, measure the squared sup distance to the oracle
// (fine-grid RK4 for the ODE cases, fine-grid Euler-Maruyama on the same
// path for the SDE case), and average over paths. Paths that trip the
// explosion guard are skipped and counted; more than 1% of them is an error.
ConvergenceResult convergence_study(const ConvergenceConfig& cfg,
                                    const std::vector<std::size_t>& depths, std::size_t n_paths,
                                    std::uint64_t seed);

}  // namespace rsl
