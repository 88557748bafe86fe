#include "encscan/rng.hpp"

#include <cmath>
#include <numbers>

#include "encscan/common.hpp"

namespace encscan {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1E3787F9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t id) : master_seed(seed), stream_id(id) {
    base_ = mix64(seed + kGolden * mix64(id + kGolden));
}

uint64_t RngStream::next_u64() {
    ++counter;
    return mix64(base_ + counter * kGolden);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float RngStream::next_float() {
    return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
}

double RngStream::next_normal() {
    // Box-Muller, cosine branch only: two draws per normal, no cached state,
    // so the stream counter alone determines every value.
    uint64_t a = next_u64();
    uint64_t b = next_u64();
    double u1 = static_cast<double>((a >> 11) | 1ull) * 0x1.0p-53;  // (0, 1), never 0
    double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

uint64_t RngStream::next_below(uint64_t n) {
    if (n == 0) throw ContractError("next_below: n must be >= 1");
    // Modulo bias is < 2^-40 for the ranges used here (n well below 2^24).
    return next_u64() % n;
}

RngStream RngStream::derived(uint64_t child_tag) const {
    RngStream child;
    child.master_seed = master_seed;
    child.stream_id = mix64(stream_id + kGolden * mix64(child_tag + 0x5851F42D4C957F2Dull));
    child.base_ = mix64(child.master_seed + kGolden * mix64(child.stream_id + kGolden));
    return child;
}

uint64_t RngStream::tag(const char* name) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (const char* p = name; *p; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace encscan
