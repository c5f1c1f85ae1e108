#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rsl/tensor4.hpp"

namespace rsl {

// Continuous layer functions (the trend pair Abar, bbar) with declared
// Holder regularity: ||a(t)-a(s)||^2 + ||b(t)-b(s)||^2 <= M |t-s|^kappa.
// The regularity constants are metadata declared by whoever builds the
// instance; they are spot-checked, not verified exhaustively.
struct LayerFunction {
    int d = 0;
    std::function<Eigen::MatrixXd(double)> a_of;
    std::function<Eigen::VectorXd(double)> b_of;
    double holder_kappa = 2.0;
    double holder_const = 0.0;

    static LayerFunction zero(int d);
    static LayerFunction constant(Eigen::MatrixXd a, Eigen::VectorXd b);
};

// Coefficients of the Ito pair (W^A, W^b):
//   dW^A = U^A dt + q^A dB^A,   dW^b = U^b dt + q^b dB^b,
// with B^A and B^b independent. q^A is rank-4; q^b is d x d.
struct ItoSpec {
    int d = 0;
    std::function<Eigen::MatrixXd(double)> ua_of;
    std::function<Eigen::VectorXd(double)> ub_of;
    std::function<Tensor4(double)> qa_of;
    std::function<Eigen::MatrixXd(double)> qb_of;
    double bound_c1 = 0.0;
    double holder_kappa = 2.0;
    double holder_const = 0.0;

    static ItoSpec zero(int d);
    // Constant isotropic diffusion, zero drift: entries of W^A are independent
    // Brownian motions with variance rate qa_scale^2 (likewise W^b).
    static ItoSpec brownian(int d, double qa_scale, double qb_scale);
};

// Quadratic-variation rates at time t:
//   (Sigma^A)_{i1 j1 i2 j2} = sum_{k,l} (q^A)_{i1 j1 k l} (q^A)_{i2 j2 k l},
//   Sigma^b = q^b (q^b)^T.
std::pair<Tensor4, Eigen::MatrixXd> covariance_tensors(const ItoSpec& spec, double t);

// Checks the declared bound C1 and the PSD/symmetry structure of the derived
// covariances on a sampled grid. Throws ValidationError on violation.
void validate_ito_spec(const ItoSpec& spec, int grid_points = 17);

// One realization of (W^A, W^b), sampled on a fine grid of
// coarse_steps * substeps intervals and exposed on both grids. Views onto
// coarser grids share the underlying storage, so every depth in a ladder
// reads the same noise.
class ItoPath {
  public:
    ItoPath() = default;

    int dim() const;
    std::size_t fine_steps() const;
    std::size_t coarse_steps() const { return coarse_steps_; }
    std::size_t substeps() const { return fine_steps() / coarse_steps_; }
    std::uint64_t seed() const;

    const Eigen::MatrixXd& wa_fine(std::size_t i) const;
    const Eigen::VectorXd& wb_fine(std::size_t i) const;

    // Values on the coarse grid t_k = k / coarse_steps, k = 0..coarse_steps.
    const Eigen::MatrixXd& wa(std::size_t k) const;
    const Eigen::VectorXd& wb(std::size_t k) const;

    // Same fine realization viewed on a different coarse grid.
    ItoPath with_coarse(std::size_t new_coarse_steps) const;

    static ItoPath zero(int d, std::size_t coarse_steps, std::size_t substeps = 1);

  private:
    friend ItoPath sample_ito_path(const ItoSpec&, std::size_t, std::size_t, std::uint64_t,
                                   std::uint64_t);

    struct Storage {
        int d = 0;
        std::uint64_t seed = 0;
        std::vector<Eigen::MatrixXd> wa;
        std::vector<Eigen::VectorXd> wb;
    };

    std::shared_ptr<const Storage> storage_;
    std::size_t coarse_steps_ = 0;
};

// Drift-plus-Gaussian stepping on the fine grid: the increment over
// [s, s+h] is U(s) h plus a centered Gaussian with covariance Sigma(s) h,
// realized as q(s) applied to i.i.d. N(0, h) coordinates. Draws are keyed
// by (seed, path_index, fine step), so batches parallelize deterministically.
ItoPath sample_ito_path(const ItoSpec& spec, std::size_t coarse_steps, std::size_t substeps,
                        std::uint64_t seed, std::uint64_t path_index = 0);

// Discrete network parameters. delta, when present, is the per-layer step
// size; otherwise layer k uses depth^{-alpha}.
struct WeightTensor {
    int d = 0;
    std::vector<Eigen::MatrixXd> a;
    std::vector<Eigen::VectorXd> b;
    std::optional<std::vector<double>> delta;
    double alpha = 0.0;

    std::size_t depth() const { return a.size(); }
    double step_size(std::size_t k) const;
};

// a[k] = L^{-beta} a_of(k/L); b likewise.
WeightTensor regime1_weights(const LayerFunction& f, double beta, std::size_t depth, double alpha);

// a[k] = L^{-beta} a_of(k/L) + (W^A_{(k+1)/L} - W^A_{k/L}); b likewise.
// The path must expose a coarse grid of exactly `depth` steps.
WeightTensor regime2_weights(const LayerFunction& f, double beta, std::size_t depth,
                             const ItoPath& path, double alpha);

// Independent Gaussian entries: A ~ N(0, 1/(L d^2)), b ~ N(0, 1/(L d)).
WeightTensor gaussian_init_weights(std::size_t depth, int d, std::uint64_t seed);

// wt-v1 weight directory: manifest.json plus flat little-endian f64 files
// a.bin (L*d*d), b.bin (L*d) and optional delta.bin (L), layer-major with
// row-major layers.
void save_weights(const WeightTensor& w, const std::filesystem::path& dir);
WeightTensor load_weights(const std::filesystem::path& dir);

}  // namespace rsl
