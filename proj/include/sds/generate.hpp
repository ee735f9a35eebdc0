#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sds/edrs.hpp"
#include "sds/kb.hpp"
#include "sds/prob.hpp"

namespace sds {

/// Instantiated concept with its scenario tag and discourse referent.
struct ConceptToken {
    std::string scenario;
    std::string concept_name;
    std::string referent;
};

/// Realized role edge; fillers never have roles of their own.
struct RoleToken {
    std::string role;
    ConceptToken filler;
};

struct PredArgTree {
    ConceptToken root;
    std::vector<RoleToken> realized;      // role-name order
    std::vector<std::string> unrealized;  // role names
};

struct ConceptualGraph {
    std::vector<PredArgTree> trees;
};

/// Canonical pairing of a conceptual graph and the eDRS its tokens emitted.
/// The node-to-referent mapping lives inside the tokens.
struct SituationDescription {
    ConceptualGraph graph;
    Edrs drs;
};

enum class SampleStatus {
    kOk,
    kPoeInfeasible,  // a product-of-experts draw hit disjoint supports
    kRejected,       // an early-rejection hook aborted the sample
};

struct SampleResult {
    SampleStatus status = SampleStatus::kOk;
    SituationDescription sd;  // canonical; valid only when status == kOk
};

/// Early-rejection hooks for conditioned sampling. Both default to accepting.
/// graph_done sees the completed structure before any condition is drawn;
/// condition_drawn sees each emitted condition as soon as it is drawn.
/// Returning false aborts the sample (status kRejected).
struct SampleHooks {
    std::function<bool(const ConceptualGraph&)> graph_done;
    std::function<bool(const Condition&)> condition_drawn;
};

/// One full run of the generative story: theta ~ Dirichlet(alpha); n from the
/// tree-count distribution; per tree a scenario, root concept, role
/// realizations and product-of-experts fillers; then one condition per
/// (token, predicate) with sampled polarity. Result is canonicalized.
SampleResult sample_sd(const KnowledgeBase& kb, RandomSource& rng, const SampleHooks* hooks = nullptr);

/// Canonical representative of the SD's equivalence class: trees sorted by
/// their full signature (scenario, concept, emitted conditions, roles,
/// fillers), referents renamed r1, r2, ... in traversal order. Idempotent.
SituationDescription canonicalize(const SituationDescription& sd);

/// Deterministic signature strings; equal iff canonical forms are equal.
std::string graph_text(const ConceptualGraph& g);
std::string sd_text(const SituationDescription& sd);

/// Log probability of the canonical graph class: collapsed scenario-sequence
/// probability x p(n) x (orderings of the tree multiset) x per-tree concept,
/// role-realization, and product-of-experts filler factors. -inf for
/// impossible graphs (zero phi/chi/rho factor or infeasible product).
double score_graph(const KnowledgeBase& kb, const ConceptualGraph& g);

/// Log probability of the condition set given the graph: one pi or (1 - pi)
/// factor per (token, predicate). -inf if any condition's predicate is
/// outside its token's preds, or any predicate lacks exactly one polarity.
double score_conditions(const KnowledgeBase& kb, const SituationDescription& sd);

}  // namespace sds
