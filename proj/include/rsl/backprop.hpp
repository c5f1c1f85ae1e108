#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rsl/forward.hpp"
#include "rsl/limits.hpp"

namespace rsl {

enum class JacobianDirection { backward_g, forward_J };

// Matrix-valued path on the uniform grid t_k = k/steps.
struct MatrixTrajectory {
    std::vector<Eigen::MatrixXd> mats;

    std::size_t steps() const { return mats.size() - 1; }
    double time(std::size_t k) const { return static_cast<double>(k) / static_cast<double>(steps()); }
};

// Discrete Jacobians along one forward pass. backward_g stores
// g_k = d h_L / d h_k with g_L = I; forward_J stores J_k = d h_k / d x with
// J_0 = I. The chain rule gives g_0 = g_k J_k for every k.
struct JacobianTrajectory {
    std::vector<Eigen::MatrixXd> mats;  // depth + 1 entries
    JacobianDirection direction = JacobianDirection::backward_g;

    std::size_t depth() const { return mats.size() - 1; }
};

// g_k = g_{k+1} (I + delta_k diag(sigma'_d(A_k h_k + b_k)) A_k), g_L = I.
JacobianTrajectory backward_jacobians(const WeightTensor& w, const HiddenTrajectory& hidden,
                                      const Activation& act);

// J_{k+1} = (I + delta_k diag(sigma'_d(A_k h_k + b_k)) A_k) J_k, J_0 = I.
JacobianTrajectory forward_jacobians(const WeightTensor& w, const HiddenTrajectory& hidden,
                                     const Activation& act);

enum class BackwardOdeKind { neural, linear };

// Backward RK4 from G_1 = I:
//   neural: dG/dt = -G diag(sigma'_d(Abar_t H_t + bbar_t)) Abar_t,
//   linear: dG/dt = -G Abar_t.
// H must be given on a grid refining the output grid by an even factor so
// the RK4 half-steps land on its grid (the linear kind ignores H).
MatrixTrajectory solve_backward_ode(BackwardOdeKind kind, const LayerFunction& f,
                                    const Activation& act, const Trajectory& H,
                                    std::size_t steps);

// nu(t,h) = Abar_t 1_{beta=1} + (1/2) sigma''(0) grad_h Q(t,h), where
// (grad_h Q)_{im} = sum_k h_k [ (Sigma^A)_{imik} + (Sigma^A)_{ikim} ].
Eigen::MatrixXd nu_field(const LayerFunction& f, const ItoSpec& ito, double d2_at_zero,
                         bool beta_is_one, double t, const Eigen::VectorXd& h);

// Euler-Maruyama for dJ = (nu(t,H_t) dt + dW^A_t) J, J_0 = I. H and the
// consumed path increments live on the same grid.
JacobianTrajectory em_jacobian_sde(const SdeSpec& spec, const Trajectory& H, const ItoPath& path,
                                   std::size_t steps);

// G_t = J_1 J_t^{-1}, the deep-network limit of the backpropagation
// Jacobians. LU with partial pivoting; a condition number beyond 1e12 at
// any grid point is reported as a singularity.
MatrixTrajectory g_limit_from_J(const JacobianTrajectory& J);

// Independent cross-check: Euler-Maruyama for K = J^{-1},
//   dK = K(-nu dt - dW^A + d[W^A]_t),   K_0 = I,
// with the quadratic-variation increment contracted as
// (d[W^A])_{ij} = sum_m (Sigma^A)_{im mj} dt.
JacobianTrajectory inverse_jacobian_sde(const SdeSpec& spec, const Trajectory& H,
                                        const ItoPath& path, std::size_t steps);

}  // namespace rsl
