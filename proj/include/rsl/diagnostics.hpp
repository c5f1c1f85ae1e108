#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rsl/processes.hpp"
#include "rsl/tensor4.hpp"

namespace rsl {

// The four per-tensor quantities used to read off scaling behavior:
// max_k ||A_k||_F, || sum_k A_k ||_F, L^beta max_k ||A_{k+1} - A_k||_F and
// (sum_k ||A_k||_F^2)^{1/2}.
struct Table1Norms {
    double max_norm = 0.0;
    double cumsum_norm = 0.0;
    double scaled_increment_norm = 0.0;
    double rss = 0.0;
};

Table1Norms table1_norms(const WeightTensor& w, double beta);       // A part
Table1Norms table1_norms_bias(const WeightTensor& w, double beta);  // b part

struct BetaEstimate {
    std::optional<double> beta_hat;  // empty when the regression degenerates
    double r2 = 0.0;
};

// Log-log regression of the cumulative sum norm against depth; the growth
// rate is 1 - beta. Needs >= 3 depths spanning at least one decade. When
// every cumulative sum is negligible against the weight scale (the
// integral of Abar vanishes), the estimate is marked inconclusive instead
// of returning a number.
BetaEstimate estimate_beta(const std::vector<WeightTensor>& tensors);
BetaEstimate estimate_beta_bias(const std::vector<WeightTensor>& tensors);

// Slope of the beta-scaled increment norm in log-log; about -nu when the
// rescaled weights converge to a C^nu function, nonnegative when they do
// not. All-zero increments give -infinity.
double estimate_smoothness(const std::vector<WeightTensor>& tensors, double beta);
double estimate_smoothness_bias(const std::vector<WeightTensor>& tensors, double beta);

// Trend/noise split of one tensor: Abar-hat is a piecewise-constant binned
// mean of L^beta A_k; What is the cumulative residual, so
// A_k = L^{-beta} Abar-hat(k/L) + (What_{k+1} - What_k) holds exactly.
struct TrendNoise {
    double beta = 0.0;
    std::size_t bins = 0;
    std::vector<Eigen::MatrixXd> trend_a;  // bins entries
    std::vector<Eigen::VectorXd> trend_b;
    std::vector<Eigen::MatrixXd> noise_a;  // L+1 entries, noise_a[0] = 0
    std::vector<Eigen::VectorXd> noise_b;

    const Eigen::MatrixXd& trend_a_at(double t) const;
    const Eigen::VectorXd& trend_b_at(double t) const;

    // Bin holding layer k of a depth-L tensor. Integer arithmetic, so the
    // reconstruction identity is exact rather than an epsilon away from a
    // bin boundary.
    std::size_t bin_of_layer(std::size_t k, std::size_t depth) const {
        const std::size_t bin = (k * bins) / depth;
        return bin < bins ? bin : bins - 1;
    }
};

TrendNoise decompose_trend_noise(const WeightTensor& w, double beta, std::size_t bins);

// [What]_1 = sum_k (delta What_k) (x) (delta What_k).
Tensor4 quadratic_variation(const std::vector<Eigen::MatrixXd>& noise_path);
Eigen::MatrixXd quadratic_variation_bias(const std::vector<Eigen::VectorXd>& noise_path);

enum class Regime { Regime1, Regime2, Sparse, Inconclusive };

std::string to_string(Regime r);

// Classification thresholds are declared conventions (the source material
// classifies by inspection); override per run if needed.
struct ClassifierThresholds {
    double smoothness_cut = -0.25;  // slope at or below favors a continuous trend
    double qv_trend_ratio = 0.10;   // noise QV relative to trend energy
    double flatness_cut = 0.10;     // |slope| below this counts as flat
    double min_beta_regime2 = 0.5;
    double rss_slope_bound = 0.10;  // rss growth above this is unbounded
};

struct RegimeEvidence {
    std::vector<std::size_t> depths;
    std::vector<Table1Norms> norms;  // per depth, same order
    std::optional<double> beta_hat;
    double smoothness_slope = 0.0;
    double qv_norm = 0.0;       // Hilbert-Schmidt norm of [What]_1 at the deepest L
    double trend_energy = 0.0;  // squared norm of the reconstructed trend integral
};

Regime classify_regime(const RegimeEvidence& evidence, const ClassifierThresholds& th = {});

// ReLU is homogeneous of degree 1: fold |delta| into the weights and keep
// only its sign as the step. Requires a per-layer delta.
WeightTensor relu_fold(const WeightTensor& w);

// Replace A_k by L^{-beta} Abar-hat(k/L) (b likewise), stripping the noise.
WeightTensor denoise(const WeightTensor& w, const TrendNoise& trend, double beta);

// Full Steps 1-4 pipeline over a depth family.
struct ScalingReport {
    std::vector<std::size_t> depths;
    std::vector<Table1Norms> norms_a;
    std::vector<Table1Norms> norms_b;
    std::optional<double> beta_hat_a;
    std::optional<double> beta_hat_b;
    double regression_r2_a = 0.0;
    double regression_r2_b = 0.0;
    double smoothness_slope = 0.0;
    TrendNoise decomposition;  // at the deepest tensor
    Tensor4 qv_estimate;
    double qv_norm = 0.0;
    double trend_energy = 0.0;
    bool rss_bounded = false;
    Regime regime = Regime::Inconclusive;
};

struct DiagnosisOptions {
    std::size_t bins = 0;  // 0 = ceil(sqrt(L))
    ClassifierThresholds thresholds;
    bool fold_relu = false;  // fold |delta| before analysis
};

ScalingReport analyze_scaling(std::vector<WeightTensor> tensors, const DiagnosisOptions& options);

}  // namespace rsl
