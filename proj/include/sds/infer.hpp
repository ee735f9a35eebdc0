#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sds/generate.hpp"

namespace sds {

struct PosteriorEntry {
    SituationDescription sd;
    double weight = 0.0;
    /// Injective utterance-to-SD referent mappings; per-referent queries
    /// marginalize over these with equal weight.
    std::vector<RefMap> embeddings;
};

struct RejectionStats {
    long long samples_requested = 0;
    long long accepted = 0;
    long long attempts = 0;
    long long poe_aborts = 0;
    std::uint64_t seed = 0;
    int workers = 1;
};

/// Weighted collection of canonical SDs conditioned on an utterance.
/// Weights are positive and sum to 1; every supported SD contains the
/// utterance. Exact-mode SDs carry only utterance-relevant conditions
/// (the rest are marginalized out).
struct Posterior {
    std::vector<PosteriorEntry> support;  // weight descending, ties by sd_text
    Edrs utterance;
    bool exact = false;
    RejectionStats stats;
    KnowledgeBase kb;
};

struct RejectionConfig {
    long long samples = 2000;
    std::uint64_t seed = 42;
    int workers = 1;
    long long max_attempts = 10'000'000;
};

/// Conditioned sampling with early per-predicate rejection: a sample aborts
/// as soon as its structure cannot host the utterance or a drawn condition
/// contradicts it. Identical in distribution to sample-then-check. Throws
/// StarvationError when the attempt budget runs out.
Posterior rejection_infer(const KnowledgeBase& kb, const Edrs& utterance, const RejectionConfig& cfg);
Posterior rejection_infer(const KnowledgeBase& kb, const Edrs& utterance, long long samples, std::uint64_t seed);

/// Exact conditional by collapsed enumeration over tree structures, scenario
/// assignments, fillers, and utterance-consistent condition resolutions;
/// unobserved predicates marginalize out. Guard: scenario-draw slots <= 8 and
/// concepts <= 32, else EnumerationBoundError.
Posterior exact_posterior(const KnowledgeBase& kb, const Edrs& utterance);

/// Marginal over the concept of the token an utterance referent maps to.
Categorical query_sense(const Posterior& p, const std::string& referent);

struct RoleMarginal {
    double realization = 0.0;  // marginal probability the role is realized
    Categorical fillers;       // filler concepts, conditional on realization
};
RoleMarginal query_role(const Posterior& p, const std::string& event_referent, const std::string& role);

/// Posterior probability that predicate(referent) holds positively.
double query_entailment(const Posterior& p, const std::string& referent, const std::string& predicate);

/// k highest-weight SDs, weight-descending, ties broken by canonical text.
std::vector<PosteriorEntry> top_k(const Posterior& p, std::size_t k);

}  // namespace sds
