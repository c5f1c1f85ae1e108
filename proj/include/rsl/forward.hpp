#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rsl/processes.hpp"
#include "rsl/tensor4.hpp"

namespace rsl {

// Scalar activation with derivatives up to third order. Smooth members
// satisfy f(0) = 0 and f'(0) = 1; the exact ReLU is flagged non-smooth and
// is excluded from the limit theorems.
struct Activation {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    std::function<double(double)> d3;
    double d2_at_zero = 0.0;
    double d3_bound = 0.0;
    bool smooth = true;
};

Activation tanh_activation();
Activation identity_activation();
Activation relu_activation();
// f(x) = x + (c/2) x^2 w(x) with a C^3 cutoff w (1 on [-1,1], 0 outside
// [-2,2]) so that f''(0) = c while f''' stays bounded.
Activation quad_bump_activation(double c);
// C^3 one-sided mollification of ReLU: exact ReLU outside [-2*eps, 0],
// a septic spline inside; f(0) = 0, f'(0) = 1, |f - ReLU| <= eps.
Activation smooth_relu_activation(double eps);

// Parses "tanh", "identity", "relu", "quad_bump:<c>", "smooth_relu:<eps>".
Activation make_activation(const std::string& kind);

struct HiddenTrajectory {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> states;  // depth + 1 entries, states[0] = input

    std::size_t depth() const { return states.size() - 1; }
};

// h_{k+1} = h_k + delta_k sigma_d(A_k h_k + b_k). Throws ExplosionError when
// a state norm crosses the explosion threshold.
HiddenTrajectory forward_hidden(const Eigen::VectorXd& x, const WeightTensor& w,
                                const Activation& act);

// Piecewise-constant right-continuous extension: states[k] on
// [k/L, (k+1)/L), states[L] at t = 1.
const Eigen::VectorXd& cte(const HiddenTrajectory& traj, double t);

// Q_i(x) = sum_{j,k} x_j x_k (Sigma^A)_{ijik} + (Sigma^b)_{ii}.
Eigen::VectorXd q_field(const Tensor4& sigma_a, const Eigen::MatrixXd& sigma_b,
                        const Eigen::VectorXd& x);

}  // namespace rsl
