#include "sds/prob.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sds/errors.hpp"

namespace sds {

namespace {

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

RandomSource::RandomSource(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
    // xoshiro state must not be all zero
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

RandomSource RandomSource::split(std::uint64_t index) const {
    std::uint64_t x = seed_ ^ (0xA0761D6478BD642Full * (index + 1));
    return RandomSource(splitmix64(x));
}

std::uint64_t RandomSource::next_u64() {
    const std::uint64_t result = rotl64(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl64(s_[3], 45);
    return result;
}

double RandomSource::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::normal() {
    // Marsaglia polar method; the spare value is discarded so the stream
    // state stays a pure function of the draws made.
    for (;;) {
        const double a = 2.0 * uniform01() - 1.0;
        const double b = 2.0 * uniform01() - 1.0;
        const double s = a * a + b * b;
        if (s > 0.0 && s < 1.0) {
            return a * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

double RandomSource::gamma(double shape) {
    if (!(shape > 0.0)) throw Error("gamma: shape must be positive");
    if (shape < 1.0) {
        // boost transform: Gamma(a) = Gamma(a + 1) * U^(1/a), exact for a < 1
        double u;
        do {
            u = uniform01();
        } while (u == 0.0);
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

Categorical::Categorical(std::vector<std::string> outcomes_in, std::vector<double> probs_in)
    : outcomes(std::move(outcomes_in)), probs(std::move(probs_in)) {
    if (outcomes.size() != probs.size()) {
        throw Error("categorical: outcome and probability lists differ in length");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw Error("categorical: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw Error("categorical: probabilities sum to " + std::to_string(sum));
    }
}

Categorical Categorical::from_weights(std::vector<std::string> outcomes, std::vector<double> weights) {
    if (outcomes.size() != weights.size()) {
        throw Error("categorical: outcome and weight lists differ in length");
    }
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw Error("categorical: negative weight");
        sum += w;
    }
    if (sum <= 0.0) throw Error("categorical: weights sum to zero");
    Categorical c;
    c.outcomes = std::move(outcomes);
    c.probs.reserve(weights.size());
    for (double w : weights) c.probs.push_back(w / sum);
    return c;
}

double Categorical::prob_of(const std::string& outcome) const {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i] == outcome) return probs[i];
    }
    return 0.0;
}

std::size_t sample_index(const std::vector<double>& probs, RandomSource& rng) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = rng.uniform01() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    bool seen_positive = false;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            last_positive = i;
            seen_positive = true;
            acc += probs[i];
            if (u < acc) return i;
        }
    }
    if (!seen_positive) throw Error("sample_index: no positive mass");
    return last_positive;  // floating residue lands on the last positive outcome
}

const std::string& sample_categorical(const Categorical& c, RandomSource& rng) {
    return c.outcomes[sample_index(c.probs, rng)];
}

bool sample_bernoulli(double p, RandomSource& rng) {
    if (p < 0.0 || p > 1.0) throw Error("bernoulli: probability out of range");
    if (p == 1.0) return true;
    if (p == 0.0) return false;
    return rng.uniform01() < p;
}

std::vector<double> sample_symmetric_dirichlet(double alpha, int k, RandomSource& rng) {
    if (!(alpha > 0.0)) throw Error("dirichlet: alpha must be positive");
    if (k < 1) throw Error("dirichlet: dimension must be at least 1");
    std::vector<double> draws(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (auto& g : draws) {
        g = rng.gamma(alpha);
        sum += g;
    }
    if (sum <= 0.0) {
        // all gamma draws underflowed (possible for very small alpha)
        draws.assign(static_cast<std::size_t>(k), 0.0);
        draws[static_cast<std::size_t>(rng.uniform01() * k) % k] = 1.0;
        return draws;
    }
    for (auto& g : draws) g /= sum;
    return draws;
}

std::optional<std::vector<double>> poe_weights(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("product of experts: length mismatch");
    std::vector<double> out(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] * b[i];
        total += out[i];
    }
    if (total <= 0.0) return std::nullopt;
    for (auto& w : out) w /= total;
    return out;
}

std::optional<Categorical> product_of_experts(const Categorical& a, const Categorical& b) {
    if (a.outcomes.size() != b.outcomes.size()) {
        throw Error("product of experts: outcome label sets differ");
    }
    std::map<std::string, double> b_by_label;
    for (std::size_t i = 0; i < b.outcomes.size(); ++i) {
        b_by_label[b.outcomes[i]] = b.probs[i];
    }
    std::vector<double> b_aligned(a.outcomes.size());
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        auto it = b_by_label.find(a.outcomes[i]);
        if (it == b_by_label.end()) {
            throw Error("product of experts: outcome label sets differ ('" + a.outcomes[i] + "')");
        }
        b_aligned[i] = it->second;
    }
    auto w = poe_weights(a.probs, b_aligned);
    if (!w) return std::nullopt;
    Categorical out;
    out.outcomes = a.outcomes;
    out.probs = std::move(*w);
    return out;
}

double log_collapsed_seq_prob(const std::vector<int>& counts, double alpha, int num_scenarios) {
    if (!(alpha > 0.0)) throw Error("collapsed sequence probability: alpha must be positive");
    if (num_scenarios < 1 || static_cast<std::size_t>(num_scenarios) < counts.size()) {
        throw Error("collapsed sequence probability: bad scenario count");
    }
    int total = 0;
    double lp = 0.0;
    for (int c : counts) {
        if (c < 0) throw Error("collapsed sequence probability: negative count");
        if (c == 0) continue;
        total += c;
        lp += std::lgamma(alpha + c) - std::lgamma(alpha);
    }
    return lp + std::lgamma(num_scenarios * alpha) - std::lgamma(num_scenarios * alpha + total);
}

double log_collapsed_seq_prob(const std::map<std::string, int>& counts, double alpha, int num_scenarios) {
    std::vector<int> flat;
    flat.reserve(counts.size());
    for (const auto& [name, c] : counts) flat.push_back(c);
    return log_collapsed_seq_prob(flat, alpha, num_scenarios);
}

double log_factorial(int n) {
    if (n < 0) throw Error("log_factorial: negative argument");
    return std::lgamma(static_cast<double>(n) + 1.0);
}

}  // namespace sds
