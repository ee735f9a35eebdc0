#include "sds/edrs.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <tuple>

#include "sds/errors.hpp"
#include "sds/kb.hpp"

namespace sds {

namespace {

bool valid_referent_name(const std::string& name) {
    if (name.empty() || !std::islower(static_cast<unsigned char>(name[0]))) return false;
    return std::all_of(name.begin() + 1, name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

struct Scanner {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c) {
            throw ParseError(std::string("expected '") + c + "'", pos);
        }
        ++pos;
    }
    bool accept(char c) {
        skip_ws();
        if (pos < text.size() && text[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }
    std::string ident() {
        skip_ws();
        const std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
            ++pos;
        }
        if (pos == start) throw ParseError("expected an identifier", pos);
        return text.substr(start, pos - start);
    }
};

std::string render_condition(const Condition& c) {
    std::string out;
    if (c.negated) out += '!';
    out += c.pred;
    out += '(';
    for (std::size_t i = 0; i < c.args.size(); ++i) {
        if (i) out += ',';
        out += c.args[i];
    }
    out += ')';
    return out;
}

std::string render(const std::vector<std::string>& refs, const std::vector<Condition>& conds) {
    std::string out = "drs([";
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (i) out += ',';
        out += refs[i];
    }
    out += "],[";
    for (std::size_t i = 0; i < conds.size(); ++i) {
        if (i) out += ',';
        out += render_condition(conds[i]);
    }
    out += "])";
    return out;
}

}  // namespace

void Edrs::add_referent(const std::string& name) {
    if (!valid_referent_name(name)) throw Error("invalid referent name '" + name + "'");
    if (!has_referent(name)) referents.push_back(name);
}

void Edrs::add_condition(Condition c) {
    if (c.args.empty() || c.args.size() > 2) {
        throw Error("condition '" + c.pred + "' must have one or two arguments");
    }
    for (const auto& a : c.args) {
        if (!has_referent(a)) throw Error("undeclared referent " + a);
    }
    auto it = std::lower_bound(conditions.begin(), conditions.end(), c);
    if (it != conditions.end() && *it == c) return;  // sets, not multisets
    conditions.insert(it, std::move(c));
}

bool Edrs::has_referent(const std::string& name) const {
    return std::find(referents.begin(), referents.end(), name) != referents.end();
}

bool Edrs::has_condition(const Condition& c) const {
    return std::binary_search(conditions.begin(), conditions.end(), c);
}

Edrs parse_edrs(const std::string& text) {
    Scanner s{text};
    s.skip_ws();
    if (s.ident() != "drs") throw ParseError("expected 'drs'", 0);
    s.expect('(');
    s.expect('[');
    Edrs d;
    if (s.peek() != ']') {
        do {
            const std::size_t at = s.pos;
            const std::string name = s.ident();
            if (!valid_referent_name(name)) {
                throw ParseError("invalid referent name '" + name + "'", at);
            }
            if (!d.has_referent(name)) d.referents.push_back(name);
        } while (s.accept(','));
    }
    s.expect(']');
    s.expect(',');
    s.expect('[');
    std::map<std::string, std::size_t> arity_seen;
    if (s.peek() != ']') {
        do {
            Condition c;
            c.negated = s.accept('!');
            const std::size_t at = s.pos;
            c.pred = s.ident();
            s.expect('(');
            do {
                const std::size_t ref_at = s.pos;
                const std::string ref = s.ident();
                if (!d.has_referent(ref)) {
                    throw ParseError("undeclared referent " + ref, ref_at);
                }
                c.args.push_back(ref);
            } while (s.accept(','));
            s.expect(')');
            if (c.args.size() > 2) {
                throw ParseError("predicate '" + c.pred + "' used with more than two arguments", at);
            }
            auto [it, inserted] = arity_seen.emplace(c.pred, c.args.size());
            if (!inserted && it->second != c.args.size()) {
                throw ParseError("arity mismatch: predicate '" + c.pred + "' previously used with " +
                                     std::to_string(it->second) + " argument(s)",
                                 at);
            }
            d.add_condition(std::move(c));
        } while (s.accept(','));
    }
    s.expect(']');
    s.expect(')');
    if (!s.eof()) throw ParseError("trailing input after eDRS", s.pos);
    return d;
}

std::string edrs_text(const Edrs& d) {
    return render(d.referents, d.conditions);
}

namespace {

// Conditions with integer referent ids, for name-independent comparison.
struct IndexedCondition {
    std::string pred;
    bool negated;
    std::vector<int> args;
    auto operator<=>(const IndexedCondition&) const = default;
};

std::vector<IndexedCondition> indexed_sorted(const std::vector<Condition>& conds,
                                             const std::map<std::string, int>& ids) {
    std::vector<IndexedCondition> out;
    out.reserve(conds.size());
    for (const auto& c : conds) {
        IndexedCondition ic{c.pred, c.negated, {}};
        for (const auto& a : c.args) ic.args.push_back(ids.at(a));
        out.push_back(std::move(ic));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::string format_edrs(const Edrs& d) {
    // referents actually used in conditions, in declaration order
    std::vector<std::string> used;
    for (const auto& r : d.referents) {
        for (const auto& c : d.conditions) {
            if (std::find(c.args.begin(), c.args.end(), r) != c.args.end()) {
                used.push_back(r);
                break;
            }
        }
    }
    const std::size_t k = used.size();
    if (k > 9) throw Error("format_edrs: more than 9 used referents");

    // minimum over labelings of the sorted condition sequence; the winning
    // labeling has referent first occurrences in index order
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::optional<std::vector<IndexedCondition>> best;
    std::vector<int> best_perm;
    do {
        std::map<std::string, int> ids;
        for (std::size_t i = 0; i < k; ++i) ids[used[i]] = perm[i];
        auto cand = indexed_sorted(d.conditions, ids);
        if (!best || cand < *best) {
            best = std::move(cand);
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<std::string> refs;
    std::vector<Condition> conds;
    if (best) {
        for (std::size_t i = 0; i < k; ++i) refs.push_back("r" + std::to_string(i + 1));
        for (const auto& ic : *best) {
            Condition c{ic.pred, ic.negated, {}};
            for (int a : ic.args) c.args.push_back("r" + std::to_string(a + 1));
            conds.push_back(std::move(c));
        }
    }
    // unused referents go at the end; they are interchangeable
    for (std::size_t i = 0; i < d.referents.size() - k; ++i) {
        refs.push_back("r" + std::to_string(k + i + 1));
    }
    return render(refs, conds);
}

namespace {

// name-independent per-referent signature: sorted (pred, negated, position)
std::multiset<std::tuple<std::string, bool, int>> ref_signature(const Edrs& d, const std::string& r) {
    std::multiset<std::tuple<std::string, bool, int>> sig;
    for (const auto& c : d.conditions) {
        for (std::size_t i = 0; i < c.args.size(); ++i) {
            if (c.args[i] == r) sig.emplace(c.pred, c.negated, static_cast<int>(i));
        }
    }
    return sig;
}

bool alpha_backtrack(const Edrs& a, const Edrs& b, std::size_t i,
                     std::map<std::string, std::string>& m, std::vector<bool>& taken,
                     const std::vector<std::multiset<std::tuple<std::string, bool, int>>>& sig_a,
                     const std::vector<std::multiset<std::tuple<std::string, bool, int>>>& sig_b) {
    if (i == a.referents.size()) {
        for (const auto& c : a.conditions) {
            Condition mapped{c.pred, c.negated, {}};
            for (const auto& arg : c.args) mapped.args.push_back(m.at(arg));
            if (!b.has_condition(mapped)) return false;
        }
        return true;
    }
    for (std::size_t j = 0; j < b.referents.size(); ++j) {
        if (taken[j] || sig_a[i] != sig_b[j]) continue;
        taken[j] = true;
        m[a.referents[i]] = b.referents[j];
        if (alpha_backtrack(a, b, i + 1, m, taken, sig_a, sig_b)) return true;
        m.erase(a.referents[i]);
        taken[j] = false;
    }
    return false;
}

}  // namespace

bool alpha_equivalent(const Edrs& a, const Edrs& b) {
    if (a.referents.size() != b.referents.size()) return false;
    if (a.conditions.size() != b.conditions.size()) return false;
    std::vector<std::multiset<std::tuple<std::string, bool, int>>> sig_a, sig_b;
    for (const auto& r : a.referents) sig_a.push_back(ref_signature(a, r));
    for (const auto& r : b.referents) sig_b.push_back(ref_signature(b, r));
    std::map<std::string, std::string> m;
    std::vector<bool> taken(b.referents.size(), false);
    return alpha_backtrack(a, b, 0, m, taken, sig_a, sig_b);
}

namespace {

// Injective embedding search: du referents assigned in declaration order,
// candidates from d in declaration order; conditions checked as soon as all
// their arguments are mapped.
void embed_backtrack(const Edrs& du, const Edrs& d, std::size_t i, RefMap& m,
                     std::vector<bool>& taken, std::vector<RefMap>& out, std::size_t limit) {
    if (out.size() >= limit) return;
    if (i == du.referents.size()) {
        out.push_back(m);
        return;
    }
    const std::string& r = du.referents[i];
    for (std::size_t j = 0; j < d.referents.size(); ++j) {
        if (taken[j]) continue;
        m[r] = d.referents[j];
        bool ok = true;
        for (const auto& c : du.conditions) {
            bool involves = false, ready = true;
            Condition mapped{c.pred, c.negated, {}};
            for (const auto& arg : c.args) {
                auto it = m.find(arg);
                if (it == m.end()) {
                    ready = false;
                    break;
                }
                if (arg == r) involves = true;
                mapped.args.push_back(it->second);
            }
            if (ready && involves && !d.has_condition(mapped)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            taken[j] = true;
            embed_backtrack(du, d, i + 1, m, taken, out, limit);
            taken[j] = false;
        }
        m.erase(r);
        if (out.size() >= limit) return;
    }
}

}  // namespace

std::optional<RefMap> contains(const Edrs& du, const Edrs& d) {
    if (du.referents.size() > d.referents.size()) return std::nullopt;
    std::vector<RefMap> out;
    RefMap m;
    std::vector<bool> taken(d.referents.size(), false);
    embed_backtrack(du, d, 0, m, taken, out, 1);
    if (out.empty()) return std::nullopt;
    return out.front();
}

std::vector<RefMap> all_embeddings(const Edrs& du, const Edrs& d) {
    std::vector<RefMap> out;
    if (du.referents.size() > d.referents.size()) return out;
    RefMap m;
    std::vector<bool> taken(d.referents.size(), false);
    embed_backtrack(du, d, 0, m, taken, out, static_cast<std::size_t>(-1));
    return out;
}

namespace {

std::vector<std::string> tokenize_sentence(const std::string& sentence) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : sentence) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c) || c == '_' || c == '\'') {
            cur += static_cast<char>(std::tolower(c));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

bool is_determiner(const std::string& w) {
    return w == "a" || w == "an";
}

}  // namespace

Edrs sentence_to_edrs(const std::string& sentence, const KnowledgeBase& kb) {
    const auto words = tokenize_sentence(sentence);
    std::size_t i = 0;
    auto need = [&](const std::string& what) -> const std::string& {
        if (i >= words.size()) {
            throw ParseError("sentence outside the fragment: expected " + what);
        }
        return words[i];
    };

    if (!is_determiner(need("'a' or 'an'"))) {
        throw ParseError("sentence outside the fragment: expected 'a' or 'an', got '" + words[i] + "'");
    }
    ++i;
    const std::string& subj_word = need("a noun");
    auto noun_it = kb.lexicon.nouns.find(subj_word);
    if (noun_it == kb.lexicon.nouns.end()) throw ParseError("unknown word: " + subj_word);
    const std::string subj_pred = noun_it->second;
    ++i;

    std::string verb_word = need("a verb");
    ++i;
    if (verb_word == "was" || verb_word == "is") {
        verb_word = need("a verb after '" + std::string(verb_word == "was" ? "was" : "is") + "'");
        ++i;
    }
    auto verb_it = kb.lexicon.verbs.find(verb_word);
    if (verb_it == kb.lexicon.verbs.end()) throw ParseError("unknown word: " + verb_word);
    const VerbEntry& verb = verb_it->second;

    std::optional<std::string> obj_pred;
    if (i < words.size()) {
        if (!is_determiner(words[i])) {
            throw ParseError("sentence outside the fragment: expected 'a' or 'an', got '" + words[i] + "'");
        }
        ++i;
        const std::string& obj_word = need("a noun");
        auto obj_it = kb.lexicon.nouns.find(obj_word);
        if (obj_it == kb.lexicon.nouns.end()) throw ParseError("unknown word: " + obj_word);
        obj_pred = obj_it->second;
        ++i;
        if (i < words.size()) {
            throw ParseError("sentence outside the fragment: trailing words after the object");
        }
        if (!verb.obj_pred) {
            throw ParseError("verb '" + verb_word + "' does not take an object");
        }
    }

    Edrs d;
    d.add_referent("e");
    d.add_referent("x");
    d.add_condition({verb.event_pred, false, {"e"}});
    d.add_condition({subj_pred, false, {"x"}});
    d.add_condition({verb.subj_pred, false, {"e", "x"}});
    if (obj_pred) {
        d.add_referent("y");
        d.add_condition({*obj_pred, false, {"y"}});
        d.add_condition({*verb.obj_pred, false, {"e", "y"}});
    }
    return d;
}

}  // namespace sds
