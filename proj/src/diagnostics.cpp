#include "rsl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsl/errors.hpp"
#include "rsl/stats.hpp"

namespace rsl {

namespace {

template <typename Entry>
Table1Norms norms_of(const std::vector<Entry>& seq, double beta) {
    const std::size_t depth = seq.size();
    if (depth < 2) throw ValidationError("table1_norms: need depth >= 2");
    Table1Norms out;
    Entry cumsum = seq[0];
    double sumsq = seq[0].squaredNorm();
    out.max_norm = seq[0].norm();
    double max_incr = 0.0;
    for (std::size_t k = 1; k < depth; ++k) {
        cumsum += seq[k];
        sumsq += seq[k].squaredNorm();
        out.max_norm = std::max(out.max_norm, seq[k].norm());
        max_incr = std::max(max_incr, (seq[k] - seq[k - 1]).norm());
    }
    out.cumsum_norm = cumsum.norm();
    out.scaled_increment_norm = std::pow(static_cast<double>(depth), beta) * max_incr;
    out.rss = std::sqrt(sumsq);
    return out;
}

void check_family(const std::vector<WeightTensor>& tensors) {
    if (tensors.size() < 3) throw ValidationError("scaling estimates need >= 3 depths");
    for (std::size_t i = 1; i < tensors.size(); ++i) {
        if (tensors[i].depth() <= tensors[i - 1].depth()) {
            throw ValidationError("scaling estimates need strictly increasing depths");
        }
        if (tensors[i].d != tensors[0].d) {
            throw ValidationError("scaling estimates need a common dimension");
        }
    }
    const double ratio = static_cast<double>(tensors.back().depth()) /
                         static_cast<double>(tensors.front().depth());
    if (ratio < 10.0) {
        throw ValidationError("scaling estimates need depths spanning at least one decade");
    }
}

template <typename Get>
BetaEstimate beta_from(const std::vector<WeightTensor>& tensors, const Get& get) {
    check_family(tensors);
    double max_norm = 0.0;
    std::vector<double> depths, cumsums;
    for (const auto& w : tensors) {
        const Table1Norms n = get(w);
        depths.push_back(static_cast<double>(w.depth()));
        cumsums.push_back(n.cumsum_norm);
        max_norm = std::max(max_norm, n.max_norm);
    }
    // Degenerate family: the cumulative sums carry no signal relative to the
    // weight scale, so the growth-rate regression means nothing.
    bool degenerate = true;
    for (double c : cumsums)
        if (c > 1e-12 * max_norm) degenerate = false;
    if (degenerate || max_norm == 0.0) return {std::nullopt, 0.0};

    const LinearFit fit = ols_loglog(depths, cumsums);
    return {1.0 - fit.slope, fit.r2};
}

template <typename Get>
double smoothness_from(const std::vector<WeightTensor>& tensors, double beta, const Get& get) {
    check_family(tensors);
    std::vector<double> depths, incrs;
    for (const auto& w : tensors) {
        depths.push_back(static_cast<double>(w.depth()));
        incrs.push_back(get(w, beta).scaled_increment_norm);
    }
    bool all_zero = true;
    for (double v : incrs)
        if (v > 0.0) all_zero = false;
    if (all_zero) return -std::numeric_limits<double>::infinity();
    return ols_loglog(depths, incrs).slope;
}

}  // namespace

Table1Norms table1_norms(const WeightTensor& w, double beta) { return norms_of(w.a, beta); }

Table1Norms table1_norms_bias(const WeightTensor& w, double beta) { return norms_of(w.b, beta); }

BetaEstimate estimate_beta(const std::vector<WeightTensor>& tensors) {
    return beta_from(tensors, [](const WeightTensor& w) { return table1_norms(w, 0.0); });
}

BetaEstimate estimate_beta_bias(const std::vector<WeightTensor>& tensors) {
    return beta_from(tensors, [](const WeightTensor& w) { return table1_norms_bias(w, 0.0); });
}

double estimate_smoothness(const std::vector<WeightTensor>& tensors, double beta) {
    return smoothness_from(tensors, beta,
                           [](const WeightTensor& w, double b) { return table1_norms(w, b); });
}

double estimate_smoothness_bias(const std::vector<WeightTensor>& tensors, double beta) {
    return smoothness_from(tensors, beta,
                           [](const WeightTensor& w, double b) { return table1_norms_bias(w, b); });
}

const Eigen::MatrixXd& TrendNoise::trend_a_at(double t) const {
    if (t < 0.0 || t > 1.0) throw ValidationError("trend lookup: t must lie in [0,1]");
    auto bin = static_cast<std::size_t>(t * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    return trend_a[bin];
}

const Eigen::VectorXd& TrendNoise::trend_b_at(double t) const {
    if (t < 0.0 || t > 1.0) throw ValidationError("trend lookup: t must lie in [0,1]");
    auto bin = static_cast<std::size_t>(t * static_cast<double>(bins));
    if (bin >= bins) bin = bins - 1;
    return trend_b[bin];
}

TrendNoise decompose_trend_noise(const WeightTensor& w, double beta, std::size_t bins) {
    const std::size_t depth = w.depth();
    if (bins < 1 || bins > depth) {
        throw ValidationError("decompose_trend_noise: bins must lie in [1, depth]");
    }
    const double scale = std::pow(static_cast<double>(depth), beta);

    TrendNoise out;
    out.beta = beta;
    out.bins = bins;
    out.trend_a.assign(bins, Eigen::MatrixXd::Zero(w.d, w.d));
    out.trend_b.assign(bins, Eigen::VectorXd::Zero(w.d));
    std::vector<std::size_t> counts(bins, 0);
    for (std::size_t k = 0; k < depth; ++k) {
        const std::size_t bin = out.bin_of_layer(k, depth);
        out.trend_a[bin] += scale * w.a[k];
        out.trend_b[bin] += scale * w.b[k];
        ++counts[bin];
    }
    for (std::size_t j = 0; j < bins; ++j) {
        if (counts[j] == 0) continue;
        out.trend_a[j] /= static_cast<double>(counts[j]);
        out.trend_b[j] /= static_cast<double>(counts[j]);
    }

    out.noise_a.reserve(depth + 1);
    out.noise_b.reserve(depth + 1);
    out.noise_a.push_back(Eigen::MatrixXd::Zero(w.d, w.d));
    out.noise_b.push_back(Eigen::VectorXd::Zero(w.d));
    const double inv_scale = 1.0 / scale;
    for (std::size_t k = 0; k < depth; ++k) {
        const std::size_t bin = out.bin_of_layer(k, depth);
        out.noise_a.push_back(out.noise_a.back() + w.a[k] - inv_scale * out.trend_a[bin]);
        out.noise_b.push_back(out.noise_b.back() + w.b[k] - inv_scale * out.trend_b[bin]);
    }
    return out;
}

Tensor4 quadratic_variation(const std::vector<Eigen::MatrixXd>& noise_path) {
    if (noise_path.size() < 2) throw ValidationError("quadratic_variation: need >= 2 points");
    const int d = static_cast<int>(noise_path.front().rows());
    Tensor4 qv(d);
    for (std::size_t k = 0; k + 1 < noise_path.size(); ++k) {
        const Eigen::VectorXd dv = vec_rowmajor(noise_path[k + 1] - noise_path[k]);
        qv.flat() += dv * dv.transpose();
    }
    return qv;
}

Eigen::MatrixXd quadratic_variation_bias(const std::vector<Eigen::VectorXd>& noise_path) {
    if (noise_path.size() < 2) throw ValidationError("quadratic_variation: need >= 2 points");
    const auto d = noise_path.front().size();
    Eigen::MatrixXd qv = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k + 1 < noise_path.size(); ++k) {
        const Eigen::VectorXd dv = noise_path[k + 1] - noise_path[k];
        qv += dv * dv.transpose();
    }
    return qv;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Regime1: return "Regime1";
        case Regime::Regime2: return "Regime2";
        case Regime::Sparse: return "Sparse";
        case Regime::Inconclusive: return "Inconclusive";
    }
    return "Inconclusive";
}

Regime classify_regime(const RegimeEvidence& evidence, const ClassifierThresholds& th) {
    if (evidence.depths.size() < 3 || evidence.norms.size() != evidence.depths.size()) {
        throw ValidationError("classify_regime: evidence needs >= 3 depths");
    }
    std::vector<double> depths, cumsum, maxn, rss;
    for (std::size_t i = 0; i < evidence.depths.size(); ++i) {
        depths.push_back(static_cast<double>(evidence.depths[i]));
        cumsum.push_back(evidence.norms[i].cumsum_norm);
        maxn.push_back(evidence.norms[i].max_norm);
        rss.push_back(evidence.norms[i].rss);
    }
    auto slope_or = [&](const std::vector<double>& ys, double fallback) {
        for (double y : ys)
            if (y <= 0.0) return fallback;
        return ols_loglog(depths, ys).slope;
    };

    // Sparse signature: both the cumulative sum and the max norm stay flat.
    const double cumsum_slope = slope_or(cumsum, 0.0);
    const double maxnorm_slope = slope_or(maxn, 0.0);
    if (std::abs(cumsum_slope) < th.flatness_cut && std::abs(maxnorm_slope) < th.flatness_cut) {
        return Regime::Sparse;
    }

    const double qv_ratio = evidence.trend_energy > 0.0
                                ? evidence.qv_norm / evidence.trend_energy
                                : std::numeric_limits<double>::infinity();
    if (evidence.smoothness_slope <= th.smoothness_cut && qv_ratio < th.qv_trend_ratio) {
        return Regime::Regime1;
    }

    const double rss_slope = slope_or(rss, 0.0);
    const bool rss_bounded = rss_slope < th.rss_slope_bound;
    if (evidence.smoothness_slope > th.smoothness_cut && evidence.beta_hat.has_value() &&
        *evidence.beta_hat >= th.min_beta_regime2 && rss_bounded) {
        return Regime::Regime2;
    }
    return Regime::Inconclusive;
}

WeightTensor relu_fold(const WeightTensor& w) {
    if (!w.delta) throw ValidationError("relu_fold: tensor has no per-layer delta");
    WeightTensor out = w;
    for (std::size_t k = 0; k < w.depth(); ++k) {
        const double delta = (*w.delta)[k];
        const double mag = std::abs(delta);
        out.a[k] *= mag;
        out.b[k] *= mag;
        (*out.delta)[k] = delta == 0.0 ? 0.0 : (delta > 0.0 ? 1.0 : -1.0);
    }
    return out;
}

WeightTensor denoise(const WeightTensor& w, const TrendNoise& trend, double beta) {
    WeightTensor out = w;
    const std::size_t depth = w.depth();
    const double scale = std::pow(static_cast<double>(depth), -beta);
    for (std::size_t k = 0; k < depth; ++k) {
        const std::size_t bin = trend.bin_of_layer(k, depth);
        out.a[k] = scale * trend.trend_a[bin];
        out.b[k] = scale * trend.trend_b[bin];
    }
    return out;
}

ScalingReport analyze_scaling(std::vector<WeightTensor> tensors, const DiagnosisOptions& options) {
    if (options.fold_relu) {
        for (auto& w : tensors)
            if (w.delta) w = relu_fold(w);
    }
    check_family(tensors);

    ScalingReport report;
    for (const auto& w : tensors) report.depths.push_back(w.depth());

    const BetaEstimate beta_a = estimate_beta(tensors);
    const BetaEstimate beta_b = estimate_beta_bias(tensors);
    report.beta_hat_a = beta_a.beta_hat;
    report.beta_hat_b = beta_b.beta_hat;
    report.regression_r2_a = beta_a.r2;
    report.regression_r2_b = beta_b.r2;

    const double beta_for_scaling = beta_a.beta_hat.value_or(0.0);
    for (const auto& w : tensors) {
        report.norms_a.push_back(table1_norms(w, beta_for_scaling));
        report.norms_b.push_back(table1_norms_bias(w, beta_for_scaling));
    }
    report.smoothness_slope = beta_a.beta_hat
                                  ? estimate_smoothness(tensors, beta_for_scaling)
                                  : std::numeric_limits<double>::quiet_NaN();

    const WeightTensor& deepest = tensors.back();
    const std::size_t bins =
        options.bins > 0
            ? options.bins
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(deepest.depth()))));
    report.decomposition = decompose_trend_noise(deepest, beta_for_scaling, bins);
    report.qv_estimate = quadratic_variation(report.decomposition.noise_a);
    report.qv_norm = report.qv_estimate.norm();

    // Energy of the reconstructed trend integral at t = 1.
    Eigen::MatrixXd integral = Eigen::MatrixXd::Zero(deepest.d, deepest.d);
    const double inv_scale = std::pow(static_cast<double>(deepest.depth()), -beta_for_scaling);
    for (std::size_t k = 0; k < deepest.depth(); ++k) {
        integral +=
            inv_scale * report.decomposition.trend_a[report.decomposition.bin_of_layer(
                            k, deepest.depth())];
    }
    report.trend_energy = integral.squaredNorm();

    RegimeEvidence evidence;
    evidence.depths = report.depths;
    evidence.norms = report.norms_a;
    evidence.beta_hat = report.beta_hat_a;
    evidence.smoothness_slope = report.smoothness_slope;
    evidence.qv_norm = report.qv_norm;
    evidence.trend_energy = report.trend_energy;

    std::vector<double> depths_d, rss;
    for (std::size_t i = 0; i < report.depths.size(); ++i) {
        depths_d.push_back(static_cast<double>(report.depths[i]));
        rss.push_back(report.norms_a[i].rss);
    }
    bool rss_positive = true;
    for (double v : rss)
        if (v <= 0.0) rss_positive = false;
    report.rss_bounded =
        rss_positive && ols_loglog(depths_d, rss).slope < options.thresholds.rss_slope_bound;

    report.regime = beta_a.beta_hat ? classify_regime(evidence, options.thresholds)
                                    : Regime::Inconclusive;
    // Sanity band on the estimate; values outside it mean the family is not
    // in any modeled regime.
    if (report.beta_hat_a && (*report.beta_hat_a <= -0.5 || *report.beta_hat_a >= 1.5)) {
        report.regime = Regime::Inconclusive;
    }
    return report;
}

}  // namespace rsl
