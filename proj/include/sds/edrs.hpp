#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sds {

struct KnowledgeBase;

/// Atomic or negated-atomic condition over discourse referents.
struct Condition {
    std::string pred;
    bool negated = false;
    std::vector<std::string> args;  // length 1 or 2

    auto operator<=>(const Condition&) const = default;
};

/// Existential-conjunctive DRS: discourse referents plus a set of atomic /
/// negated-atomic conditions. Immutable by convention once built; the
/// mutators below are for construction.
struct Edrs {
    std::vector<std::string> referents;   // declaration order, no duplicates
    std::vector<Condition> conditions;    // kept sorted, no duplicates

    void add_referent(const std::string& name);
    /// Validates arity (1 or 2) and that all args are declared; duplicate
    /// conditions merge (condition sets, not multisets).
    void add_condition(Condition c);
    bool has_referent(const std::string& name) const;
    bool has_condition(const Condition& c) const;
};

using RefMap = std::map<std::string, std::string>;

/// Text grammar:
///   edrs ::= "drs(" "[" ref ("," ref)* "]" "," "[" (cond ("," cond)*)? "]" ")"
///   cond ::= ["!"] NAME "(" ref ["," ref] ")"
/// Whitespace between tokens is insignificant. Declared-but-unused referents
/// are allowed. Throws ParseError (with position) on syntax errors, use of an
/// undeclared referent, or arity mismatch against prior uses.
Edrs parse_edrs(const std::string& text);

/// Plain rendering: referents in declaration order, conditions sorted.
std::string edrs_text(const Edrs& d);

/// Canonical rendering: referents renamed r1, r2, ... so that two eDRSs map
/// to the same text iff they are alpha-equivalent. Conditions come out sorted
/// by (predicate, polarity, args) and referent first occurrences in order.
std::string format_edrs(const Edrs& d);

/// True iff some bijective referent renaming maps a's referent and condition
/// sets exactly onto b's.
bool alpha_equivalent(const Edrs& a, const Edrs& b);

/// Injective mapping m from du's referents into d's with m(conditions(du))
/// a subset of d's conditions; first mapping found under deterministic
/// candidate ordering (declaration order on both sides), or nullopt.
std::optional<RefMap> contains(const Edrs& du, const Edrs& d);

/// Every injective embedding, in deterministic order.
std::vector<RefMap> all_embeddings(const Edrs& du, const Edrs& d);

/// Neo-Davidsonian eDRS for the fragment "a NOUN VERBED [a NOUN]" (also
/// "an", and auxiliary forms like "was holding" via the lexicon). Event
/// referent e, subject x, object y.
Edrs sentence_to_edrs(const std::string& sentence, const KnowledgeBase& kb);

}  // namespace sds
