#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include <Eigen/Dense>

namespace rsl {

// Philox4x32-10 counter-based block cipher (Salmon et al.). One 64-bit key
// and a 128-bit counter produce four independent 32-bit words. Stateless,
// so any draw in a simulation can be regenerated from its coordinates.
struct Philox4x32 {
    using Block = std::array<std::uint32_t, 4>;

    static Block generate(std::uint64_t key, const Block& counter);
};

// Deterministic random stream addressed by (seed, stream, step). Streams
// with distinct coordinates are statistically independent; draws within a
// stream are indexed by an internal block counter. Monte Carlo code keys
// `stream` by path index and `step` by grid index, which makes results
// identical for any worker count.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t step = 0);

    double gaussian();
    double uniform();  // in [0, 1)
    std::uint64_t uniform_below(std::uint64_t n);

    Eigen::VectorXd gaussian_vector(Eigen::Index n);
    Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols);

  private:
    std::array<std::uint64_t, 2> next_u64_pair();

    std::uint64_t key_;
    Philox4x32::Block base_;
    std::uint32_t draw_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable 64-bit sub-seed for a named substream ("path", "init", "shuffle", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

}  // namespace rsl
