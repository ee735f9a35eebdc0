#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sds {

/// Deterministic, splittable random stream. One instance per worker; child
/// streams derived from (seed, index) give reproducible parallel sampling.
/// The generator is fixed (xoshiro256++ seeded via splitmix64) so identical
/// seeds give identical draw sequences.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed);

    /// Independent child stream; deterministic in (parent seed, index).
    RandomSource split(std::uint64_t index) const;

    std::uint64_t next_u64();
    double uniform01();  // [0, 1)
    double normal();
    double gamma(double shape);  // Gamma(shape, 1); accurate for shape < 1

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t s_[4];
    std::uint64_t seed_;
};

/// Finite distribution over named outcomes.
struct Categorical {
    std::vector<std::string> outcomes;
    std::vector<double> probs;

    Categorical() = default;
    /// Throws Error unless probs are nonnegative and sum to 1 within 1e-12.
    Categorical(std::vector<std::string> outcomes, std::vector<double> probs);
    /// Normalizes arbitrary nonnegative weights (their sum must be positive).
    static Categorical from_weights(std::vector<std::string> outcomes, std::vector<double> weights);

    double prob_of(const std::string& outcome) const;
};

const std::string& sample_categorical(const Categorical& c, RandomSource& rng);
/// Index sampling over a plain probability vector (need not be normalized).
std::size_t sample_index(const std::vector<double>& probs, RandomSource& rng);
bool sample_bernoulli(double p, RandomSource& rng);
std::vector<double> sample_symmetric_dirichlet(double alpha, int k, RandomSource& rng);

/// Normalized elementwise product; nullopt when the supports are disjoint.
/// Inputs are weight vectors over the same index space and may be unnormalized.
std::optional<std::vector<double>> poe_weights(const std::vector<double>& a, const std::vector<double>& b);

/// Product of experts over two categoricals with the same outcome label set
/// (aligned by label). Nullopt on disjoint support; throws Error if the label
/// sets differ.
std::optional<Categorical> product_of_experts(const Categorical& a, const Categorical& b);

/// Log probability of one particular ordered scenario-draw sequence with the
/// given per-scenario counts, the scenario mix integrated out:
///   Gamma(S*alpha)/Gamma(S*alpha + K) * prod_s Gamma(alpha + n_s)/Gamma(alpha)
/// Scenarios with zero count may be omitted from `counts`.
double log_collapsed_seq_prob(const std::vector<int>& counts, double alpha, int num_scenarios);
double log_collapsed_seq_prob(const std::map<std::string, int>& counts, double alpha, int num_scenarios);

double log_factorial(int n);

}  // namespace sds
