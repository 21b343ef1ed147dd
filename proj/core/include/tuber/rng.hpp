#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace tuber {

// Deterministic random source. All distributions are hand-rolled on top of
// mt19937_64 so that streams are reproducible across standard libraries and
// serializable into checkpoints.
class Rng {
public:
    explicit Rng(uint64_t seed = 0);

    uint64_t next_u64();

    // [0, 1)
    double uniform();
    double uniform(double lo, double hi);
    // inclusive bounds
    int64_t uniform_int(int64_t lo, int64_t hi);
    // standard normal, Box-Muller
    double normal();
    double normal(double mean, double stddev);

    std::string state() const;
    void set_state(const std::string& s);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64-style mix, used to derive per-sample seeds from (seed, index).
uint64_t mix_seed(uint64_t seed, uint64_t salt);

}  // namespace tuber
