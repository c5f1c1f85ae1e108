#include "rsl/backprop.hpp"

#include <cmath>
#include <limits>

#include "rsl/errors.hpp"

namespace rsl {

namespace {

// I + delta diag(sigma'_d(A h + b)) A, the one-layer transition matrix.
Eigen::MatrixXd layer_transition(const WeightTensor& w, const Eigen::VectorXd& h,
                                 const Activation& act, std::size_t k) {
    const Eigen::VectorXd z = w.a[k] * h + w.b[k];
    const double delta = w.step_size(k);
    Eigen::MatrixXd m = w.a[k];
    for (Eigen::Index i = 0; i < z.size(); ++i) m.row(i) *= delta * act.d1(z[i]);
    m += Eigen::MatrixXd::Identity(w.d, w.d);
    return m;
}

void check_pair(const WeightTensor& w, const HiddenTrajectory& hidden) {
    if (hidden.depth() != w.depth() || hidden.input.size() != w.d) {
        throw ValidationError("jacobians: trajectory does not match the weight tensor");
    }
}

}  // namespace

JacobianTrajectory backward_jacobians(const WeightTensor& w, const HiddenTrajectory& hidden,
                                      const Activation& act) {
    check_pair(w, hidden);
    const std::size_t depth = w.depth();
    JacobianTrajectory traj;
    traj.direction = JacobianDirection::backward_g;
    traj.mats.assign(depth + 1, Eigen::MatrixXd::Identity(w.d, w.d));
    for (std::size_t k = depth; k-- > 0;) {
        traj.mats[k] = traj.mats[k + 1] * layer_transition(w, hidden.states[k], act, k);
    }
    return traj;
}

JacobianTrajectory forward_jacobians(const WeightTensor& w, const HiddenTrajectory& hidden,
                                     const Activation& act) {
    check_pair(w, hidden);
    const std::size_t depth = w.depth();
    JacobianTrajectory traj;
    traj.direction = JacobianDirection::forward_J;
    traj.mats.assign(depth + 1, Eigen::MatrixXd::Identity(w.d, w.d));
    for (std::size_t k = 0; k < depth; ++k) {
        traj.mats[k + 1] = layer_transition(w, hidden.states[k], act, k) * traj.mats[k];
    }
    return traj;
}

MatrixTrajectory solve_backward_ode(BackwardOdeKind kind, const LayerFunction& f,
                                    const Activation& act, const Trajectory& H,
                                    std::size_t steps) {
    if (steps < 1) throw ValidationError("solve_backward_ode: grid needs at least one step");
    std::size_t h_stride = 0;
    if (kind == BackwardOdeKind::neural) {
        if (H.steps() % steps != 0 || (H.steps() / steps) % 2 != 0) {
            throw GridMismatchError(
                "solve_backward_ode: H must refine the output grid by an even factor");
        }
        h_stride = H.steps() / steps;
    }

    const int d = f.d;
    const double dt = 1.0 / static_cast<double>(steps);
    // Coefficient C(t) with dG/dt = -G C(t); time indexed in half-steps of
    // the output grid so RK4 stages read H exactly.
    auto coeff = [&](std::size_t half_index) -> Eigen::MatrixXd {
        const double t = 0.5 * dt * static_cast<double>(half_index);
        Eigen::MatrixXd a = f.a_of(t);
        if (kind == BackwardOdeKind::neural) {
            const Eigen::VectorXd& h = H.states[half_index * h_stride / 2];
            const Eigen::VectorXd z = a * h + f.b_of(t);
            for (Eigen::Index i = 0; i < z.size(); ++i) a.row(i) *= act.d1(z[i]);
        }
        return a;
    };

    MatrixTrajectory traj;
    traj.mats.assign(steps + 1, Eigen::MatrixXd::Identity(d, d));
    for (std::size_t k = steps; k-- > 0;) {
        // One RK4 step of dG/dt = -G C(t) from t_{k+1} down to t_k; with the
        // negative step the stage combinations flip sign.
        const Eigen::MatrixXd& g = traj.mats[k + 1];
        const Eigen::MatrixXd c_hi = coeff(2 * (k + 1));
        const Eigen::MatrixXd c_mid = coeff(2 * k + 1);
        const Eigen::MatrixXd c_lo = coeff(2 * k);
        const Eigen::MatrixXd m1 = g * c_hi;
        const Eigen::MatrixXd m2 = (g + 0.5 * dt * m1) * c_mid;
        const Eigen::MatrixXd m3 = (g + 0.5 * dt * m2) * c_mid;
        const Eigen::MatrixXd m4 = (g + dt * m3) * c_lo;
        traj.mats[k] = g + (dt / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        const double norm = traj.mats[k].norm();
        if (!(norm <= kExplosionThreshold)) throw ExplosionError(k, norm);
    }
    return traj;
}

Eigen::MatrixXd nu_field(const LayerFunction& f, const ItoSpec& ito, double d2_at_zero,
                         bool beta_is_one, double t, const Eigen::VectorXd& h) {
    const int d = ito.d;
    if (h.size() != d) throw ValidationError("nu_field: dimension mismatch");
    Eigen::MatrixXd nu = Eigen::MatrixXd::Zero(d, d);
    if (beta_is_one) nu += f.a_of(t);
    if (d2_at_zero != 0.0) {
        const auto [sigma_a, sigma_b] = covariance_tensors(ito, t);
        (void)sigma_b;
        for (int i = 0; i < d; ++i)
            for (int m = 0; m < d; ++m) {
                double g = 0.0;
                for (int k = 0; k < d; ++k) {
                    g += h[k] * (sigma_a(i, m, i, k) + sigma_a(i, k, i, m));
                }
                nu(i, m) += 0.5 * d2_at_zero * g;
            }
    }
    return nu;
}

namespace {

void check_jacobian_grids(const Trajectory& H, const ItoPath& path, std::size_t steps) {
    if (steps < 1) throw ValidationError("jacobian sde: grid needs at least one step");
    if (H.steps() != steps) {
        throw GridMismatchError("jacobian sde: H must be solved on the integration grid");
    }
    if (path.fine_steps() % steps != 0) {
        throw GridMismatchError("jacobian sde: grid does not subsample the fine path");
    }
}

void check_condition(const Eigen::MatrixXd& j, double t) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
    const double rcond = lu.rcond();
    if (!(rcond > 1.0 / kConditionLimit)) {
        throw SingularityError(t, rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
    }
}

}  // namespace

JacobianTrajectory em_jacobian_sde(const SdeSpec& spec, const Trajectory& H, const ItoPath& path,
                                   std::size_t steps) {
    check_jacobian_grids(H, path, steps);
    const int d = path.dim();
    const std::size_t stride = path.fine_steps() / steps;
    const double dt = 1.0 / static_cast<double>(steps);

    JacobianTrajectory traj;
    traj.direction = JacobianDirection::forward_J;
    traj.mats.assign(steps + 1, Eigen::MatrixXd::Identity(d, d));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Eigen::MatrixXd dwa = path.wa_fine((k + 1) * stride) - path.wa_fine(k * stride);
        const Eigen::MatrixXd nu =
            nu_field(spec.trend, spec.ito, spec.d2_at_zero, spec.beta_is_one, t, H.states[k]);
        traj.mats[k + 1] =
            (Eigen::MatrixXd::Identity(d, d) + nu * dt + dwa) * traj.mats[k];
        check_condition(traj.mats[k + 1], t + dt);
    }
    return traj;
}

MatrixTrajectory g_limit_from_J(const JacobianTrajectory& J) {
    const std::size_t steps = J.depth();
    const int d = static_cast<int>(J.mats.front().rows());
    MatrixTrajectory traj;
    traj.mats.reserve(steps + 1);
    const Eigen::MatrixXd& last = J.mats[steps];
    for (std::size_t k = 0; k <= steps; ++k) {
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J.mats[k]);
        const double rcond = lu.rcond();
        if (!(rcond > 1.0 / kConditionLimit)) {
            throw SingularityError(static_cast<double>(k) / static_cast<double>(steps),
                                   rcond > 0.0 ? 1.0 / rcond
                                               : std::numeric_limits<double>::infinity());
        }
        traj.mats.push_back(last * lu.inverse());
    }
    traj.mats[steps] = Eigen::MatrixXd::Identity(d, d);
    return traj;
}

JacobianTrajectory inverse_jacobian_sde(const SdeSpec& spec, const Trajectory& H,
                                        const ItoPath& path, std::size_t steps) {
    check_jacobian_grids(H, path, steps);
    const int d = path.dim();
    const std::size_t stride = path.fine_steps() / steps;
    const double dt = 1.0 / static_cast<double>(steps);

    JacobianTrajectory traj;
    traj.direction = JacobianDirection::forward_J;
    traj.mats.assign(steps + 1, Eigen::MatrixXd::Identity(d, d));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        const Eigen::MatrixXd dwa = path.wa_fine((k + 1) * stride) - path.wa_fine(k * stride);
        const Eigen::MatrixXd nu =
            nu_field(spec.trend, spec.ito, spec.d2_at_zero, spec.beta_is_one, t, H.states[k]);
        const auto [sigma_a, sigma_b] = covariance_tensors(spec.ito, t);
        (void)sigma_b;
        Eigen::MatrixXd qv(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double s = 0.0;
                for (int m = 0; m < d; ++m) s += sigma_a(i, m, m, j);
                qv(i, j) = s * dt;
            }
        traj.mats[k + 1] =
            traj.mats[k] * (Eigen::MatrixXd::Identity(d, d) - nu * dt - dwa + qv);
        check_condition(traj.mats[k + 1], t + dt);
    }
    return traj;
}

}  // namespace rsl
