#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace consingan {

// Deterministic random stream. The mt19937_64 engine comes from the standard
// library; uniform/normal draws are generated explicitly (no distribution
// objects) so the stream state is fully captured by the engine state and
// serializes losslessly across checkpoint/resume.
class RngStream {
public:
    RngStream() : engine_(0) {}
    explicit RngStream(uint64_t seed) : engine_(mix(seed)) {}
    RngStream(uint64_t seed, uint64_t stream_id) : engine_(mix(mix(seed) + stream_id)) {}

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare value is discarded so one
    // draw always consumes exactly two engine outputs.
    double normal() {
        double u1 = 1.0 - uniform();  // (0,1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float normal_f() { return static_cast<float>(normal()); }

    uint64_t integer() { return engine_(); }

    // uniform integer in [0, n)
    uint64_t integer(uint64_t n) { return engine_() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

    // Independent derived stream, e.g. one per generated sample.
    RngStream derive(uint64_t salt) const {
        std::ostringstream os;
        os << engine_;
        uint64_t h = 0xcbf29ce484222325ull;
        for (char c : os.str()) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ull;
        return RngStream(h, salt);
    }

private:
    static uint64_t mix(uint64_t x) {  // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace consingan
