#include "rsl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rsl {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

inline Philox4x32::Block round_once(const Philox4x32::Block& c, std::uint32_t k0, std::uint32_t k1) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    return {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
}

}  // namespace

Philox4x32::Block Philox4x32::generate(std::uint64_t key, const Block& counter) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    Block c = counter;
    for (int r = 0; r < 9; ++r) {
        c = round_once(c, k0, k1);
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
    }
    return round_once(c, k0, k1);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t step)
    : key_(seed) {
    if (step > 0xFFFFFFFFull) {
        throw std::invalid_argument("RandomStream: step index exceeds 32 bits");
    }
    base_ = {static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
             static_cast<std::uint32_t>(step), 0u};
}

std::array<std::uint64_t, 2> RandomStream::next_u64_pair() {
    Philox4x32::Block ctr = base_;
    ctr[3] = draw_++;
    const auto out = Philox4x32::generate(key_, ctr);
    const std::uint64_t a = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    return {a, b};
}

double RandomStream::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const auto [a, b] = next_u64_pair();
    // u1 in (0,1] so the log is finite; u2 in [0,1).
    const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

double RandomStream::uniform() {
    const auto [a, b] = next_u64_pair();
    (void)b;
    return static_cast<double>(a >> 11) * 0x1.0p-53;
}

std::uint64_t RandomStream::uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
        const auto [a, b] = next_u64_pair();
        if (a < limit) return a % n;
        if (b < limit) return b % n;
    }
}

Eigen::VectorXd RandomStream::gaussian_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gaussian();
    return v;
}

Eigen::MatrixXd RandomStream::gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major fill so the draw order matches the wt-v1 layout.
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = gaussian();
    return m;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char ch : name) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    const auto out = Philox4x32::generate(
        seed, {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32), 0x5eed5eedu, 0u});
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace rsl
