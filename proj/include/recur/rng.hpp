#pragma once

#include <cstdint>
#include <random>

namespace recur {

// Seed of the independent stream for (master seed, replicate, subject).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t subject);

// Stream id reserved for per-replicate draws that are not tied to a subject.
inline constexpr std::uint64_t kTrialStream = ~std::uint64_t{0};

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t master, std::uint64_t replicate, std::uint64_t subject)
        : eng_(stream_seed(master, replicate, subject)) {}

    // Uniform on [0, 1).
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
    double exponential(double rate) { return std::exponential_distribution<double>(rate)(eng_); }
    double gamma(double shape, double scale) { return std::gamma_distribution<double>(shape, scale)(eng_); }
    double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(eng_); }
    double chi_squared(double df) { return gamma(0.5 * df, 2.0); }
    // Non-central t as N(ncp, 1) / sqrt(chi2_df / df); works for non-integer df.
    double noncentral_t(double df, double ncp) {
        double z = normal(ncp, 1.0);
        return z / std::sqrt(chi_squared(df) / df);
    }
    // Index drawn from unnormalised non-negative weights.
    template <class It>
    int categorical(It first, It last) {
        double total = 0.0;
        for (It it = first; it != last; ++it) total += *it;
        double u = uniform() * total;
        double acc = 0.0;
        int k = 0, chosen = -1;
        for (It it = first; it != last; ++it, ++k) {
            if (*it <= 0.0) continue;
            chosen = k;
            acc += *it;
            if (u < acc) return k;
        }
        return chosen;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace recur
