#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sds {

struct RoleDef {
    std::string name;
    double realize_prob = 1.0;                  // rho
    std::map<std::string, double> selpref;      // chi: filler concept -> probability
    std::map<std::string, double> emit_preds;   // binary predicate -> Bernoulli prob (pi)
};

struct ConceptDef {
    std::string name;
    std::map<std::string, double> emit_preds;   // unary predicate -> Bernoulli prob (pi)
    std::map<std::string, RoleDef> roles;       // empty for filler-only concepts
};

struct ScenarioDef {
    std::string name;
    std::map<std::string, double> concept_dist;  // phi
};

struct VerbEntry {
    std::string event_pred;
    std::string subj_pred;
    std::optional<std::string> obj_pred;  // absent: verb takes no object
};

struct Lexicon {
    std::map<std::string, std::string> nouns;  // word -> unary predicate
    std::map<std::string, VerbEntry> verbs;
};

struct Diagnostic {
    enum class Severity { kWarning, kError };
    Severity severity = Severity::kWarning;
    std::string message;
};

/// All generative parameters plus the lexicon. Immutable after finalize();
/// safe to share across threads.
struct KnowledgeBase {
    double alpha = 0.5;
    int max_trees = 1;
    /// Weights over tree counts 1..max_trees (index 0 is n=1). "uniform" in
    /// the file format loads as all-ones.
    std::vector<double> tree_count_weights;
    std::map<std::string, ScenarioDef> scenarios;
    std::map<std::string, ConceptDef> concepts;
    Lexicon lexicon;

    struct Index;
    /// Cross-checks every reference and probability and builds the sampling
    /// index. Throws KbError. load_kb calls this; call it yourself after
    /// building a KnowledgeBase programmatically.
    void finalize();
    const Index& idx() const;

private:
    std::shared_ptr<const Index> index_;
};

/// Integer-indexed view used by the samplers and scorers.
struct KnowledgeBase::Index {
    std::vector<std::string> scenario_names;  // sorted
    std::vector<std::string> concept_names;   // sorted
    std::map<std::string, int> scenario_id;
    std::map<std::string, int> concept_id;

    std::vector<std::vector<double>> phi;  // [scenario][concept]

    struct RoleInfo {
        std::string name;
        int parent = -1;  // concept id
        double realize_prob = 1.0;
        std::vector<double> chi;  // [concept]
        std::vector<std::pair<std::string, double>> preds;  // binary preds, name-sorted
    };
    std::vector<RoleInfo> roles;
    std::vector<std::vector<int>> concept_roles;  // concept -> role ids, name-sorted
    std::vector<std::vector<std::pair<std::string, double>>> concept_preds;  // unary preds, name-sorted

    /// poe[scenario][role]: normalized product of phi and chi over concepts;
    /// empty vector when the supports are disjoint (infeasible draw).
    std::vector<std::vector<std::vector<double>>> poe;

    std::vector<double> tree_count_probs;  // normalized, index 0 is n=1
    std::map<std::string, int> pred_arity;  // full predicate inventory
    std::map<std::string, std::set<std::string>> unary_emitters;  // pred -> concepts with pi > 0
    int max_roles_per_concept = 0;

    int num_scenarios() const { return static_cast<int>(scenario_names.size()); }
    int num_concepts() const { return static_cast<int>(concept_names.size()); }
};

/// Parse + finalize a KB from JSON text. Throws KbError with a message naming
/// the offending entity (parse error, dangling reference, duplicate name,
/// probability out of range, bad sum).
KnowledgeBase load_kb(const std::string& text);
KnowledgeBase load_kb_file(const std::string& path);

/// Canonical JSON rendering; load_kb(kb_to_json(kb)) is structurally equal.
std::string kb_to_json(const KnowledgeBase& kb);

/// Non-throwing checks on a finalized KB:
///  - product-of-experts feasibility per (scenario, role of a generable concept)
///  - distribution sums
///  - unreachable concepts
///  - lexicon entries pointing at predicates nothing emits
std::vector<Diagnostic> validate(const KnowledgeBase& kb);

/// All concepts c with predicate in preds(c) and pi_{c,pred} > 0.
std::set<std::string> emitters(const KnowledgeBase& kb, const std::string& predicate);

}  // namespace sds
