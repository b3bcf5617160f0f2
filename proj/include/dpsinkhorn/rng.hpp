#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace dpsinkhorn {

// Counter-based deterministic PRNG.
//
// Each stream is a pure function of (key, counter): draw k of a stream with
// key K is splitmix64_mix(K + GOLDEN * (k+1)), i.e. the classic splitmix64
// sequence seeded at K. Because the state is just an integer counter, streams
// serialize to a single number (checkpoints store it) and any draw can be
// addressed directly, which lets parallel loops produce bitwise-identical
// noise regardless of partitioning.
//
// Streams are derived per purpose from a root seed, so toggling one consumer
// (e.g. disabling noise) never shifts another consumer's sequence.

// Finalizer from splitmix64 (Steele, Lea & Flood; same constants as the
// reference implementation).
inline uint64_t splitmix64_mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// Purpose identifiers for derived streams. Stable numbering: checkpoints
// persist counters keyed by these values.
enum class Stream : uint64_t {
    kSampling = 1,  // Poisson / subsample index draws
    kLatents = 2,   // generator latent inputs
    kLabels = 3,    // generated-batch label draws
    kNoise = 4,     // sanitizer Gaussian noise
    kInit = 5,      // parameter initialization
    kEval = 6,      // evaluation-side randomness (splits, probe batches)
};

class CounterRng {
public:
    CounterRng() : key_(0), counter_(0) {}
    explicit CounterRng(uint64_t key, uint64_t counter = 0) : key_(key), counter_(counter) {}

    // Derives the per-purpose stream of a root seed.
    static CounterRng derive(uint64_t root_seed, Stream stream) {
        return CounterRng(splitmix64_mix(root_seed ^ splitmix64_mix(static_cast<uint64_t>(stream) * kGolden)));
    }

    // Child stream at a given index (e.g. per-draw streams in evaluation).
    CounterRng child(uint64_t index) const {
        return CounterRng(splitmix64_mix(key_ ^ splitmix64_mix((index + 1) * kGolden)));
    }

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

    // Random-access draw: value of the stream at an absolute counter position.
    uint64_t u64_at(uint64_t counter) const { return splitmix64_mix(key_ + kGolden * (counter + 1)); }

    uint64_t next_u64() { return u64_at(counter_++); }

    // Uniform double in [0,1) with 53 random bits.
    static double to_unit(uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }
    double next_unit() { return to_unit(next_u64()); }

    // Uniform integer in {0..n-1} (multiplicative scaling of the 53-bit
    // uniform; bias is ~n/2^53, negligible for the class counts used here,
    // and each draw consumes exactly one counter step).
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(next_unit() * static_cast<double>(n));
    }

    // Standard Gaussian at an absolute counter position, consuming positions
    // ctr and ctr+1 (Box-Muller; the first uniform is shifted into (0,1] so
    // the log never sees zero). One Gaussian per counter pair: the sibling
    // Box-Muller output is discarded to keep draw addressing trivial.
    double gaussian_at(uint64_t ctr) const {
        double u1 = static_cast<double>((u64_at(ctr) >> 11) + 1) * 0x1.0p-53;  // (0,1]
        double u2 = to_unit(u64_at(ctr + 1));
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double next_gaussian() {
        double g = gaussian_at(counter_);
        counter_ += 2;
        return g;
    }

    // Fisher-Yates shuffle of {0..n-1}.
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

private:
    uint64_t key_;
    uint64_t counter_;
};

}  // namespace dpsinkhorn
