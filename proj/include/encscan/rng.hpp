#pragma once

#include <cstdint>

namespace encscan {

// Counter-based random stream. Draw i of stream (master_seed, stream_id) is a
// pure function of the triple, so:
//   * streams with different ids never share state,
//   * any consumer can be re-run in isolation and reproduce its draws,
//   * work parallelised over derived streams is independent of scheduling.
// The mixing function is the splitmix64 finalizer.
struct RngStream {
    uint64_t master_seed = 0;
    uint64_t stream_id = 0;
    uint64_t counter = 0;

    RngStream() = default;
    RngStream(uint64_t seed, uint64_t id);

    uint64_t next_u64();
    double next_double();                 // uniform [0, 1)
    float next_float();                   // uniform [0, 1)
    double next_normal();                 // standard normal, Box-Muller
    double next_normal(double sigma) { return sigma * next_normal(); }
    uint64_t next_below(uint64_t n);      // uniform [0, n), n >= 1

    // Independent child stream; the child's counter starts at zero.
    RngStream derived(uint64_t child_tag) const;

    // Hash a short label into a stream/derivation tag (FNV-1a).
    static uint64_t tag(const char* name);

  private:
    uint64_t base_ = 0;  // cached mix of (master_seed, stream_id)
};

}  // namespace encscan
