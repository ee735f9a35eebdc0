#include "sds/generate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "sds/errors.hpp"

namespace sds {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string ref_name(std::size_t i) {
    return "r" + std::to_string(i + 1);
}

// conditions grouped by argument tuple, for signature building
struct CondIndex {
    std::map<std::vector<std::string>, std::vector<const Condition*>> by_args;

    explicit CondIndex(const Edrs& d) {
        for (const auto& c : d.conditions) by_args[c.args].push_back(&c);
    }
    const std::vector<const Condition*>* find(const std::vector<std::string>& args) const {
        auto it = by_args.find(args);
        return it == by_args.end() ? nullptr : &it->second;
    }
};

std::string conds_sig(const std::vector<const Condition*>* conds) {
    if (!conds) return "";
    std::string out;
    for (const auto* c : *conds) {
        out += c->pred;
        out += c->negated ? '-' : '+';
        out += ' ';
    }
    return out;
}

std::string token_sig(const ConceptToken& t, const CondIndex* conds) {
    std::string out = t.concept_name + "@" + t.scenario;
    if (conds) {
        out += "[";
        out += conds_sig(conds->find({t.referent}));
        out += "]";
    }
    return out;
}

// full tree signature; pass conds = nullptr for the graph-only variant
std::string tree_sig(const PredArgTree& tree, const CondIndex* conds) {
    std::string out = token_sig(tree.root, conds);
    std::vector<std::string> role_parts;
    for (const auto& rt : tree.realized) {
        std::string part = rt.role + "->" + token_sig(rt.filler, conds);
        if (conds) {
            part += "{";
            part += conds_sig(conds->find({tree.root.referent, rt.filler.referent}));
            part += "}";
        }
        role_parts.push_back(std::move(part));
    }
    std::sort(role_parts.begin(), role_parts.end());
    for (const auto& p : role_parts) out += "|" + p;
    std::vector<std::string> unreal = tree.unrealized;
    std::sort(unreal.begin(), unreal.end());
    for (const auto& u : unreal) out += "|~" + u;
    return out;
}

std::vector<std::string> graph_sigs(const ConceptualGraph& g, const CondIndex* conds) {
    std::vector<std::string> sigs;
    sigs.reserve(g.trees.size());
    for (const auto& t : g.trees) sigs.push_back(tree_sig(t, conds));
    return sigs;
}

double log_multiset_orderings(std::vector<std::string> sigs) {
    // log(n! / prod multiplicities!)
    std::sort(sigs.begin(), sigs.end());
    double lp = log_factorial(static_cast<int>(sigs.size()));
    std::size_t i = 0;
    while (i < sigs.size()) {
        std::size_t j = i;
        while (j < sigs.size() && sigs[j] == sigs[i]) ++j;
        lp -= log_factorial(static_cast<int>(j - i));
        i = j;
    }
    return lp;
}

}  // namespace

SituationDescription canonicalize(const SituationDescription& sd) {
    // every condition must belong to a token (its referent, or a realized
    // role's referent pair)
    std::map<std::string, const ConceptToken*> token_by_ref;
    std::map<std::vector<std::string>, bool> role_pairs;
    for (const auto& tree : sd.graph.trees) {
        token_by_ref[tree.root.referent] = &tree.root;
        for (const auto& rt : tree.realized) {
            token_by_ref[rt.filler.referent] = &rt.filler;
            role_pairs[{tree.root.referent, rt.filler.referent}] = true;
        }
    }
    for (const auto& r : sd.drs.referents) {
        if (!token_by_ref.count(r)) {
            throw Error("canonicalize: referent '" + r + "' belongs to no token");
        }
    }
    for (const auto& c : sd.drs.conditions) {
        if (c.args.size() == 1) {
            if (!token_by_ref.count(c.args[0])) {
                throw Error("canonicalize: condition '" + c.pred + "' is attached to no token");
            }
        } else if (!role_pairs.count(c.args)) {
            throw Error("canonicalize: condition '" + c.pred + "' matches no realized role pair");
        }
    }

    CondIndex conds(sd.drs);
    std::vector<std::size_t> order(sd.graph.trees.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::string> sigs = graph_sigs(sd.graph, &conds);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sigs[a] < sigs[b]; });

    SituationDescription out;
    RefMap rename;
    auto assign = [&rename](const std::string& old_name) {
        const std::string fresh = ref_name(rename.size());
        rename[old_name] = fresh;
        return fresh;
    };
    for (std::size_t oi : order) {
        PredArgTree tree = sd.graph.trees[oi];
        tree.root.referent = assign(tree.root.referent);
        std::stable_sort(tree.realized.begin(), tree.realized.end(),
                         [](const RoleToken& a, const RoleToken& b) { return a.role < b.role; });
        for (auto& rt : tree.realized) {
            rt.filler.referent = assign(rt.filler.referent);
        }
        std::sort(tree.unrealized.begin(), tree.unrealized.end());
        out.graph.trees.push_back(std::move(tree));
    }
    for (const auto& tree : out.graph.trees) {
        out.drs.add_referent(tree.root.referent);
        for (const auto& rt : tree.realized) out.drs.add_referent(rt.filler.referent);
    }
    for (const auto& c : sd.drs.conditions) {
        Condition mapped{c.pred, c.negated, {}};
        for (const auto& a : c.args) mapped.args.push_back(rename.at(a));
        out.drs.add_condition(std::move(mapped));
    }
    return out;
}

std::string graph_text(const ConceptualGraph& g) {
    auto sigs = graph_sigs(g, nullptr);
    std::sort(sigs.begin(), sigs.end());
    std::string out = "n=" + std::to_string(g.trees.size());
    for (const auto& s : sigs) out += ";" + s;
    return out;
}

std::string sd_text(const SituationDescription& sd) {
    CondIndex conds(sd.drs);
    auto sigs = graph_sigs(sd.graph, &conds);
    std::sort(sigs.begin(), sigs.end());
    std::string out = "n=" + std::to_string(sd.graph.trees.size());
    for (const auto& s : sigs) out += ";" + s;
    return out;
}

SampleResult sample_sd(const KnowledgeBase& kb, RandomSource& rng, const SampleHooks* hooks) {
    const auto& ix = kb.idx();
    const int S = ix.num_scenarios();

    const std::vector<double> theta = sample_symmetric_dirichlet(kb.alpha, S, rng);
    const int n = static_cast<int>(sample_index(ix.tree_count_probs, rng)) + 1;

    SampleResult res;
    ConceptualGraph& graph = res.sd.graph;
    std::size_t next_ref = 0;

    for (int t = 0; t < n; ++t) {
        const auto s = sample_index(theta, rng);
        const auto c = sample_index(ix.phi[s], rng);
        PredArgTree tree;
        tree.root = {ix.scenario_names[s], ix.concept_names[c], "x" + std::to_string(++next_ref)};
        for (int rid : ix.concept_roles[c]) {
            const auto& role = ix.roles[static_cast<std::size_t>(rid)];
            if (!sample_bernoulli(role.realize_prob, rng)) {
                tree.unrealized.push_back(role.name);
                continue;
            }
            const auto s2 = sample_index(theta, rng);
            const auto& poe = ix.poe[s2][static_cast<std::size_t>(rid)];
            if (poe.empty()) {
                res.status = SampleStatus::kPoeInfeasible;
                return res;
            }
            const auto f = sample_index(poe, rng);
            tree.realized.push_back(
                {role.name,
                 {ix.scenario_names[s2], ix.concept_names[f], "x" + std::to_string(++next_ref)}});
        }
        graph.trees.push_back(std::move(tree));
    }

    if (hooks && hooks->graph_done && !hooks->graph_done(graph)) {
        res.status = SampleStatus::kRejected;
        return res;
    }

    Edrs& drs = res.sd.drs;
    for (const auto& tree : graph.trees) {
        drs.add_referent(tree.root.referent);
        for (const auto& rt : tree.realized) drs.add_referent(rt.filler.referent);
    }
    auto emit = [&](const std::string& pred, double pi, std::vector<std::string> args) -> bool {
        Condition c{pred, !sample_bernoulli(pi, rng), std::move(args)};
        drs.add_condition(c);
        return !(hooks && hooks->condition_drawn && !hooks->condition_drawn(c));
    };
    for (const auto& tree : graph.trees) {
        const int root_c = ix.concept_id.at(tree.root.concept_name);
        for (const auto& [pred, pi] : ix.concept_preds[static_cast<std::size_t>(root_c)]) {
            if (!emit(pred, pi, {tree.root.referent})) {
                res.status = SampleStatus::kRejected;
                return res;
            }
        }
        for (const auto& rt : tree.realized) {
            const int fill_c = ix.concept_id.at(rt.filler.concept_name);
            for (const auto& [pred, pi] : ix.concept_preds[static_cast<std::size_t>(fill_c)]) {
                if (!emit(pred, pi, {rt.filler.referent})) {
                    res.status = SampleStatus::kRejected;
                    return res;
                }
            }
        }
    }
    for (const auto& tree : graph.trees) {
        for (const auto& rt : tree.realized) {
            int rid = -1;
            const int root_c = ix.concept_id.at(tree.root.concept_name);
            for (int cand : ix.concept_roles[static_cast<std::size_t>(root_c)]) {
                if (ix.roles[static_cast<std::size_t>(cand)].name == rt.role) rid = cand;
            }
            for (const auto& [pred, pi] : ix.roles[static_cast<std::size_t>(rid)].preds) {
                if (!emit(pred, pi, {tree.root.referent, rt.filler.referent})) {
                    res.status = SampleStatus::kRejected;
                    return res;
                }
            }
        }
    }

    res.sd = canonicalize(res.sd);
    res.status = SampleStatus::kOk;
    return res;
}

double score_graph(const KnowledgeBase& kb, const ConceptualGraph& g) {
    const auto& ix = kb.idx();
    const int n = static_cast<int>(g.trees.size());
    if (n < 1 || n > kb.max_trees) return kNegInf;

    double lp = std::log(ix.tree_count_probs[static_cast<std::size_t>(n - 1)]);
    std::map<std::string, int> scen_counts;

    for (const auto& tree : g.trees) {
        auto sid = ix.scenario_id.find(tree.root.scenario);
        auto cid = ix.concept_id.find(tree.root.concept_name);
        if (sid == ix.scenario_id.end()) throw KbError("score_graph: unknown scenario '" + tree.root.scenario + "'");
        if (cid == ix.concept_id.end()) throw KbError("score_graph: unknown concept '" + tree.root.concept_name + "'");
        ++scen_counts[tree.root.scenario];
        const double phi = ix.phi[static_cast<std::size_t>(sid->second)][static_cast<std::size_t>(cid->second)];
        if (phi <= 0.0) return kNegInf;
        lp += std::log(phi);

        // role partition must match roles(c) exactly
        std::map<std::string, const RoleToken*> realized;
        for (const auto& rt : tree.realized) {
            if (!realized.emplace(rt.role, &rt).second) {
                throw KbError("score_graph: role '" + rt.role + "' realized twice in one tree");
            }
        }
        std::set<std::string> unrealized(tree.unrealized.begin(), tree.unrealized.end());
        const auto& role_ids = ix.concept_roles[static_cast<std::size_t>(cid->second)];
        if (realized.size() + unrealized.size() != role_ids.size()) {
            throw KbError("score_graph: tree for '" + tree.root.concept_name + "' does not partition its roles");
        }
        for (int rid : role_ids) {
            const auto& role = ix.roles[static_cast<std::size_t>(rid)];
            auto rit = realized.find(role.name);
            if (rit != realized.end()) {
                if (role.realize_prob <= 0.0) return kNegInf;
                lp += std::log(role.realize_prob);
                const RoleToken& rt = *rit->second;
                auto fsid = ix.scenario_id.find(rt.filler.scenario);
                auto fcid = ix.concept_id.find(rt.filler.concept_name);
                if (fsid == ix.scenario_id.end()) throw KbError("score_graph: unknown scenario '" + rt.filler.scenario + "'");
                if (fcid == ix.concept_id.end()) throw KbError("score_graph: unknown concept '" + rt.filler.concept_name + "'");
                ++scen_counts[rt.filler.scenario];
                const auto& poe = ix.poe[static_cast<std::size_t>(fsid->second)][static_cast<std::size_t>(rid)];
                if (poe.empty()) return kNegInf;
                const double pf = poe[static_cast<std::size_t>(fcid->second)];
                if (pf <= 0.0) return kNegInf;
                lp += std::log(pf);
            } else if (unrealized.count(role.name)) {
                if (role.realize_prob >= 1.0) return kNegInf;
                lp += std::log1p(-role.realize_prob);
            } else {
                throw KbError("score_graph: tree for '" + tree.root.concept_name + "' misses role '" + role.name + "'");
            }
        }
    }

    lp += log_collapsed_seq_prob(scen_counts, kb.alpha, ix.num_scenarios());
    lp += log_multiset_orderings(graph_sigs(g, nullptr));
    return lp;
}

double score_conditions(const KnowledgeBase& kb, const SituationDescription& sd) {
    const auto& ix = kb.idx();
    CondIndex conds(sd.drs);
    std::set<const Condition*> claimed;
    double lp = 0.0;

    auto factor = [&](const std::vector<std::string>& args,
                      const std::vector<std::pair<std::string, double>>& preds) -> bool {
        const auto* here = conds.find(args);
        for (const auto& [pred, pi] : preds) {
            const Condition* found = nullptr;
            if (here) {
                for (const auto* c : *here) {
                    if (c->pred == pred) {
                        if (found) return false;  // both polarities present
                        found = c;
                    }
                }
            }
            if (!found) return false;  // every predicate must resolve one way
            claimed.insert(found);
            const double p = found->negated ? 1.0 - pi : pi;
            if (p <= 0.0) return false;
            lp += std::log(p);
        }
        return true;
    };

    for (const auto& tree : sd.graph.trees) {
        const int root_c = ix.concept_id.at(tree.root.concept_name);
        if (!factor({tree.root.referent}, ix.concept_preds[static_cast<std::size_t>(root_c)])) return kNegInf;
        for (const auto& rt : tree.realized) {
            const int fill_c = ix.concept_id.at(rt.filler.concept_name);
            if (!factor({rt.filler.referent}, ix.concept_preds[static_cast<std::size_t>(fill_c)])) return kNegInf;
            int rid = -1;
            for (int cand : ix.concept_roles[static_cast<std::size_t>(root_c)]) {
                if (ix.roles[static_cast<std::size_t>(cand)].name == rt.role) rid = cand;
            }
            if (rid < 0) return kNegInf;
            if (!factor({tree.root.referent, rt.filler.referent}, ix.roles[static_cast<std::size_t>(rid)].preds)) {
                return kNegInf;
            }
        }
    }
    // a condition whose predicate is outside its token's preds has probability zero
    for (const auto& c : sd.drs.conditions) {
        if (!claimed.count(&c)) return kNegInf;
    }

    // assignment multiplicity: ways to distribute the condition sets over
    // graph-identical trees, prod(m_graph!) / prod(m_full!)
    CondIndex full(sd.drs);
    lp += log_multiset_orderings(graph_sigs(sd.graph, &full));
    lp -= log_multiset_orderings(graph_sigs(sd.graph, nullptr));
    return lp;
}

}  // namespace sds
