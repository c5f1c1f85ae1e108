#include "rsl/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "rsl/errors.hpp"

namespace rsl {

namespace {

// Septic smoothstep: s(0)=0, s(1)=1, s'=s''=s'''=0 at both ends.
double sstep(double u) { return u * u * u * u * (35.0 + u * (-84.0 + u * (70.0 - 20.0 * u))); }
double sstep1(double u) {
    const double v = 1.0 - u;
    return 140.0 * u * u * u * v * v * v;
}
double sstep2(double u) {
    const double v = 1.0 - u;
    return 420.0 * u * u * v * v * (1.0 - 2.0 * u);
}
double sstep3(double u) {
    const double v = 1.0 - u;
    const double w = 1.0 - 2.0 * u;
    return 840.0 * u * v * (w * w - u * v);
}

// C^3 cutoff: 1 on [-1,1], 0 outside [-2,2].
struct Cutoff {
    double w, d1, d2, d3;
};

Cutoff cutoff(double x) {
    const double ax = std::abs(x);
    if (ax <= 1.0) return {1.0, 0.0, 0.0, 0.0};
    if (ax >= 2.0) return {0.0, 0.0, 0.0, 0.0};
    const double u = ax - 1.0;
    const double sign = (x >= 0.0) ? 1.0 : -1.0;
    // d/dx |x| = sign(x) chains through the derivatives.
    return {1.0 - sstep(u), -sign * sstep1(u), -sstep2(u), -sign * sstep3(u)};
}

double max_abs_on_grid(const std::function<double(double)>& f, double lo, double hi, int n) {
    double m = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + (hi - lo) * i / n;
        m = std::max(m, std::abs(f(x)));
    }
    return m;
}

}  // namespace

Activation tanh_activation() {
    Activation a;
    a.name = "tanh";
    a.f = [](double x) { return std::tanh(x); };
    a.d1 = [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    };
    a.d2 = [](double x) {
        const double t = std::tanh(x);
        return -2.0 * t * (1.0 - t * t);
    };
    a.d3 = [](double x) {
        const double t = std::tanh(x);
        return -2.0 * (1.0 - t * t) * (1.0 - 3.0 * t * t);
    };
    a.d2_at_zero = 0.0;
    a.d3_bound = 2.0;
    a.smooth = true;
    return a;
}

Activation identity_activation() {
    Activation a;
    a.name = "identity";
    a.f = [](double x) { return x; };
    a.d1 = [](double) { return 1.0; };
    a.d2 = [](double) { return 0.0; };
    a.d3 = [](double) { return 0.0; };
    a.d2_at_zero = 0.0;
    a.d3_bound = 0.0;
    a.smooth = true;
    return a;
}

Activation relu_activation() {
    Activation a;
    a.name = "relu";
    a.f = [](double x) { return x > 0.0 ? x : 0.0; };
    a.d1 = [](double x) { return x > 0.0 ? 1.0 : 0.0; };
    a.d2 = [](double) { return 0.0; };
    a.d3 = [](double) { return 0.0; };
    a.d2_at_zero = 0.0;
    a.d3_bound = 0.0;
    a.smooth = false;
    return a;
}

Activation quad_bump_activation(double c) {
    if (!std::isfinite(c)) throw ValidationError("quad_bump: curvature must be finite");
    Activation a;
    a.name = "quad_bump";
    // f = x + (c/2) g with g = x^2 w(x).
    a.f = [c](double x) {
        const Cutoff w = cutoff(x);
        return x + 0.5 * c * x * x * w.w;
    };
    a.d1 = [c](double x) {
        const Cutoff w = cutoff(x);
        return 1.0 + 0.5 * c * (2.0 * x * w.w + x * x * w.d1);
    };
    a.d2 = [c](double x) {
        const Cutoff w = cutoff(x);
        return 0.5 * c * (2.0 * w.w + 4.0 * x * w.d1 + x * x * w.d2);
    };
    a.d3 = [c](double x) {
        const Cutoff w = cutoff(x);
        return 0.5 * c * (6.0 * w.d1 + 6.0 * x * w.d2 + x * x * w.d3);
    };
    a.d2_at_zero = c;
    a.d3_bound = max_abs_on_grid(a.d3, -2.5, 2.5, 20000);
    a.smooth = true;
    return a;
}

Activation smooth_relu_activation(double eps) {
    if (!(eps > 0.0)) throw ValidationError("smooth_relu: eps must be positive");
    // Exact ReLU outside the band [-2 eps, 0]; inside, a septic spline q with
    // C^3 contact at both ends: q(u) = u^4 (-15 + 39 u - 34 u^2 + 10 u^3) on
    // the unit band, u = x/band + 1. Max deviation from ReLU is ~0.44 eps.
    const double band = 2.0 * eps;
    auto u_of = [band](double x) { return x / band + 1.0; };
    auto q0 = [](double u) { return u * u * u * u * (-15.0 + u * (39.0 + u * (-34.0 + 10.0 * u))); };
    auto q1 = [](double u) { return u * u * u * (-60.0 + u * (195.0 + u * (-204.0 + 70.0 * u))); };
    auto q2 = [](double u) { return u * u * (-180.0 + u * (780.0 + u * (-1020.0 + 420.0 * u))); };
    auto q3 = [](double u) { return u * (-360.0 + u * (2340.0 + u * (-4080.0 + 2100.0 * u))); };

    Activation a;
    a.name = "smooth_relu";
    a.f = [band, u_of, q0](double x) {
        if (x >= 0.0) return x;
        if (x <= -band) return 0.0;
        return band * q0(u_of(x));
    };
    a.d1 = [band, u_of, q1](double x) {
        if (x >= 0.0) return 1.0;
        if (x <= -band) return 0.0;
        return q1(u_of(x));
    };
    a.d2 = [band, u_of, q2](double x) {
        if (x >= 0.0 || x <= -band) return 0.0;
        return q2(u_of(x)) / band;
    };
    a.d3 = [band, u_of, q3](double x) {
        if (x >= 0.0 || x <= -band) return 0.0;
        return q3(u_of(x)) / (band * band);
    };
    a.d2_at_zero = 0.0;
    a.d3_bound = max_abs_on_grid(a.d3, -band, 0.0, 20000);
    a.smooth = true;
    return a;
}

Activation make_activation(const std::string& kind) {
    const auto colon = kind.find(':');
    const std::string head = kind.substr(0, colon);
    if (head == "tanh") return tanh_activation();
    if (head == "identity") return identity_activation();
    if (head == "relu") return relu_activation();
    if (head == "quad_bump" || head == "smooth_relu") {
        if (colon == std::string::npos) {
            throw ValidationError("activation '" + head + "' needs a parameter, e.g. '" + head +
                                  ":0.5'");
        }
        double value = 0.0;
        try {
            value = std::stod(kind.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("activation parameter in '" + kind + "' is not a number");
        }
        return head == "quad_bump" ? quad_bump_activation(value) : smooth_relu_activation(value);
    }
    throw ValidationError("unknown activation kind '" + kind + "'");
}

HiddenTrajectory forward_hidden(const Eigen::VectorXd& x, const WeightTensor& w,
                                const Activation& act) {
    if (x.size() != w.d) {
        throw ValidationError("forward_hidden: input dimension " + std::to_string(x.size()) +
                              " != weight dimension " + std::to_string(w.d));
    }
    const std::size_t depth = w.depth();
    HiddenTrajectory traj;
    traj.input = x;
    traj.states.reserve(depth + 1);
    traj.states.push_back(x);
    for (std::size_t k = 0; k < depth; ++k) {
        const Eigen::VectorXd z = w.a[k] * traj.states.back() + w.b[k];
        Eigen::VectorXd h = traj.states.back();
        const double delta = w.step_size(k);
        for (Eigen::Index i = 0; i < h.size(); ++i) h[i] += delta * act.f(z[i]);
        const double norm = h.norm();
        if (!(norm <= kExplosionThreshold)) {
            throw ExplosionError(k + 1, norm);
        }
        traj.states.push_back(std::move(h));
    }
    return traj;
}

const Eigen::VectorXd& cte(const HiddenTrajectory& traj, double t) {
    if (t < 0.0 || t > 1.0) throw ValidationError("cte: t must lie in [0,1]");
    const std::size_t depth = traj.depth();
    auto k = static_cast<std::size_t>(t * static_cast<double>(depth));
    if (k > depth) k = depth;
    return traj.states[k];
}

Eigen::VectorXd q_field(const Tensor4& sigma_a, const Eigen::MatrixXd& sigma_b,
                        const Eigen::VectorXd& x) {
    const int d = sigma_a.dim();
    if (sigma_b.rows() != d || x.size() != d) {
        throw ValidationError("q_field: dimension mismatch");
    }
    Eigen::VectorXd q(d);
    for (int i = 0; i < d; ++i) {
        double s = sigma_b(i, i);
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) s += x[j] * x[k] * sigma_a(i, j, i, k);
        q[i] = s;
    }
    return q;
}

}  // namespace rsl
