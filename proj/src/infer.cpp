#include "sds/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "sds/errors.hpp"

namespace sds {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// utterance needs: the conditions each utterance referent (or referent pair)
// imposes on whatever token it maps to
// ---------------------------------------------------------------------------

struct UtteranceNeeds {
    std::vector<std::string> refs;  // utterance referents, declaration order
    std::map<std::string, int> ref_id;
    // per referent: (predicate, negated)
    std::vector<std::vector<std::pair<std::string, bool>>> unary;
    // per ordered referent pair: (predicate, negated)
    std::map<std::pair<int, int>, std::vector<std::pair<std::string, bool>>> binary;

    explicit UtteranceNeeds(const Edrs& u) {
        refs = u.referents;
        for (std::size_t i = 0; i < refs.size(); ++i) ref_id[refs[i]] = static_cast<int>(i);
        unary.resize(refs.size());
        for (const auto& c : u.conditions) {
            if (c.args.size() == 1) {
                unary[static_cast<std::size_t>(ref_id.at(c.args[0]))].emplace_back(c.pred, c.negated);
            } else {
                binary[{ref_id.at(c.args[0]), ref_id.at(c.args[1])}].emplace_back(c.pred, c.negated);
            }
        }
    }
};

// flattened token view of a conceptual graph
struct TokenView {
    struct Tok {
        std::string referent;
        int concept_cid = -1;
    };
    struct Pair {
        int parent_tok = -1;
        int filler_tok = -1;
        int role_id = -1;
    };
    std::vector<Tok> tokens;
    std::vector<Pair> pairs;
    std::map<std::string, int> tok_by_ref;

    TokenView(const ConceptualGraph& g, const KnowledgeBase::Index& ix) {
        for (const auto& tree : g.trees) {
            const int root_tok = add(tree.root, ix);
            const int root_c = ix.concept_id.at(tree.root.concept_name);
            for (const auto& rt : tree.realized) {
                const int filler_tok = add(rt.filler, ix);
                int rid = -1;
                for (int cand : ix.concept_roles[static_cast<std::size_t>(root_c)]) {
                    if (ix.roles[static_cast<std::size_t>(cand)].name == rt.role) rid = cand;
                }
                pairs.push_back({root_tok, filler_tok, rid});
            }
        }
    }

private:
    int add(const ConceptToken& t, const KnowledgeBase::Index& ix) {
        const int id = static_cast<int>(tokens.size());
        tokens.push_back({t.referent, ix.concept_id.at(t.concept_name)});
        tok_by_ref[t.referent] = id;
        return id;
    }
};

// can this token's concept emit every needed (pred, polarity)?
bool token_viable(const KnowledgeBase::Index& ix, int concept_cid,
                  const std::vector<std::pair<std::string, bool>>& needs) {
    for (const auto& [pred, negated] : needs) {
        bool ok = false;
        for (const auto& [p, pi] : ix.concept_preds[static_cast<std::size_t>(concept_cid)]) {
            if (p == pred) {
                ok = negated ? pi < 1.0 : pi > 0.0;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

bool pair_viable(const KnowledgeBase::Index& ix, int role_id,
                 const std::vector<std::pair<std::string, bool>>& needs) {
    if (role_id < 0) return false;
    for (const auto& [pred, negated] : needs) {
        bool ok = false;
        for (const auto& [p, pi] : ix.roles[static_cast<std::size_t>(role_id)].preds) {
            if (p == pred) {
                ok = negated ? pi < 1.0 : pi > 0.0;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

// all injective utterance-ref -> token assignments whose needs the structure
// could still emit (polarity draws pending)
std::vector<std::vector<int>> viable_assignments(const UtteranceNeeds& needs, const TokenView& view,
                                                 const KnowledgeBase::Index& ix) {
    const std::size_t n = needs.refs.size();
    std::vector<std::vector<int>> out;
    std::vector<int> cur(n, -1);
    std::vector<bool> taken(view.tokens.size(), false);

    std::map<std::pair<int, int>, int> pair_role;  // (parent_tok, filler_tok) -> role id
    for (const auto& p : view.pairs) pair_role[{p.parent_tok, p.filler_tok}] = p.role_id;

    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == n) {
            out.push_back(cur);
            return;
        }
        for (std::size_t t = 0; t < view.tokens.size(); ++t) {
            if (taken[t]) continue;
            if (!token_viable(ix, view.tokens[t].concept_cid, needs.unary[i])) continue;
            cur[i] = static_cast<int>(t);
            bool ok = true;
            for (const auto& [pr, plist] : needs.binary) {
                const auto [a, b] = pr;
                if (a != static_cast<int>(i) && b != static_cast<int>(i)) continue;
                if (cur[static_cast<std::size_t>(a)] < 0 || cur[static_cast<std::size_t>(b)] < 0) continue;
                auto it = pair_role.find({cur[static_cast<std::size_t>(a)], cur[static_cast<std::size_t>(b)]});
                if (it == pair_role.end() || !pair_viable(ix, it->second, plist)) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                taken[t] = true;
                rec(i + 1);
                taken[t] = false;
            }
            cur[i] = -1;
        }
    };
    rec(0);
    return out;
}

// ---------------------------------------------------------------------------
// rejection sampling with early per-predicate rejection
// ---------------------------------------------------------------------------

struct WorkerTally {
    std::map<std::string, std::pair<SituationDescription, long long>> accepted;
    long long attempts = 0;
    long long poe_aborts = 0;
    long long accepted_count = 0;
};

void run_worker(const KnowledgeBase& kb, const Edrs& utterance, const UtteranceNeeds& needs,
                RandomSource rng, long long quota, long long attempt_budget, WorkerTally& tally) {
    const auto& ix = kb.idx();

    std::vector<std::vector<int>> live;  // viable assignments, filtered per drawn condition
    const TokenView* view_ptr = nullptr;
    std::optional<TokenView> view;

    SampleHooks hooks;
    hooks.graph_done = [&](const ConceptualGraph& g) {
        view.emplace(g, ix);
        view_ptr = &*view;
        live = viable_assignments(needs, *view_ptr, ix);
        return !live.empty();
    };
    hooks.condition_drawn = [&](const Condition& c) {
        // kill assignments for which this draw contradicts a needed polarity
        for (std::size_t k = 0; k < live.size();) {
            const auto& m = live[k];
            bool dead = false;
            if (c.args.size() == 1) {
                const int tok = view_ptr->tok_by_ref.at(c.args[0]);
                for (std::size_t i = 0; i < needs.refs.size() && !dead; ++i) {
                    if (m[i] != tok) continue;
                    for (const auto& [pred, neg] : needs.unary[i]) {
                        if (pred == c.pred && neg != c.negated) {
                            dead = true;
                            break;
                        }
                    }
                }
            } else {
                const int ta = view_ptr->tok_by_ref.at(c.args[0]);
                const int tb = view_ptr->tok_by_ref.at(c.args[1]);
                for (const auto& [pr, plist] : needs.binary) {
                    if (dead) break;
                    if (m[static_cast<std::size_t>(pr.first)] != ta ||
                        m[static_cast<std::size_t>(pr.second)] != tb) {
                        continue;
                    }
                    for (const auto& [pred, neg] : plist) {
                        if (pred == c.pred && neg != c.negated) {
                            dead = true;
                            break;
                        }
                    }
                }
            }
            if (dead) {
                live[k] = std::move(live.back());
                live.pop_back();
            } else {
                ++k;
            }
        }
        return !live.empty();
    };

    while (tally.accepted_count < quota && tally.attempts < attempt_budget) {
        ++tally.attempts;
        auto res = sample_sd(kb, rng, &hooks);
        if (res.status == SampleStatus::kPoeInfeasible) {
            ++tally.poe_aborts;
            continue;
        }
        if (res.status == SampleStatus::kRejected) continue;
        ++tally.accepted_count;
        auto key = sd_text(res.sd);
        auto it = tally.accepted.find(key);
        if (it == tally.accepted.end()) {
            tally.accepted.emplace(std::move(key), std::make_pair(std::move(res.sd), 1LL));
        } else {
            ++it->second.second;
        }
    }
}

void sort_support(std::vector<PosteriorEntry>& support) {
    std::vector<std::pair<std::string, std::size_t>> keys;
    keys.reserve(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) keys.emplace_back(sd_text(support[i].sd), i);
    std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
        const double wa = support[a.second].weight, wb = support[b.second].weight;
        if (wa != wb) return wa > wb;
        return a.first < b.first;
    });
    std::vector<PosteriorEntry> sorted;
    sorted.reserve(support.size());
    for (const auto& [key, i] : keys) sorted.push_back(std::move(support[i]));
    support = std::move(sorted);
}

}  // namespace

Posterior rejection_infer(const KnowledgeBase& kb, const Edrs& utterance, const RejectionConfig& cfg) {
    if (cfg.samples < 1) throw InferError("rejection sampling needs at least one sample");
    if (cfg.workers < 1) throw InferError("worker count must be at least 1");
    const UtteranceNeeds needs(utterance);
    RandomSource base(cfg.seed);

    const int W = cfg.workers;
    std::vector<WorkerTally> tallies(static_cast<std::size_t>(W));
    std::vector<long long> quotas(static_cast<std::size_t>(W), cfg.samples / W);
    for (long long r = 0; r < cfg.samples % W; ++r) ++quotas[static_cast<std::size_t>(r)];
    const long long budget_each = (cfg.max_attempts + W - 1) / W;

    if (W == 1) {
        run_worker(kb, utterance, needs, base.split(0), quotas[0], budget_each, tallies[0]);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(W));
        for (int w = 0; w < W; ++w) {
            threads.emplace_back([&, w] {
                run_worker(kb, utterance, needs, base.split(static_cast<std::uint64_t>(w)),
                           quotas[static_cast<std::size_t>(w)], budget_each,
                           tallies[static_cast<std::size_t>(w)]);
            });
        }
        for (auto& t : threads) t.join();
    }

    // merge in worker-index order
    std::map<std::string, std::pair<SituationDescription, long long>> merged;
    RejectionStats stats;
    stats.samples_requested = cfg.samples;
    stats.seed = cfg.seed;
    stats.workers = W;
    for (auto& tally : tallies) {
        stats.attempts += tally.attempts;
        stats.poe_aborts += tally.poe_aborts;
        stats.accepted += tally.accepted_count;
        for (auto& [key, sc] : tally.accepted) {
            auto it = merged.find(key);
            if (it == merged.end()) {
                merged.emplace(key, std::move(sc));
            } else {
                it->second.second += sc.second;
            }
        }
    }
    if (stats.accepted < cfg.samples) {
        throw StarvationError(stats.attempts, stats.accepted, cfg.samples);
    }

    Posterior post;
    post.utterance = utterance;
    post.exact = false;
    post.stats = stats;
    post.kb = kb;
    for (auto& [key, sc] : merged) {
        PosteriorEntry e;
        e.sd = std::move(sc.first);
        e.weight = static_cast<double>(sc.second) / static_cast<double>(stats.accepted);
        e.embeddings = all_embeddings(utterance, e.sd.drs);
        post.support.push_back(std::move(e));
    }
    sort_support(post.support);
    return post;
}

Posterior rejection_infer(const KnowledgeBase& kb, const Edrs& utterance, long long samples,
                          std::uint64_t seed) {
    RejectionConfig cfg;
    cfg.samples = samples;
    cfg.seed = seed;
    return rejection_infer(kb, utterance, cfg);
}

// ---------------------------------------------------------------------------
// exact collapsed enumeration
// ---------------------------------------------------------------------------

namespace {

// one per-tree structure choice with its log factor and scenario draw counts
struct TreeChoice {
    PredArgTree tree;          // referents filled in later
    double log_factor = 0.0;   // phi, rho/(1-rho), poe factors
    std::vector<int> scenario_draws;  // scenario ids drawn for this tree
};

std::vector<TreeChoice> enumerate_tree_choices(const KnowledgeBase& kb) {
    const auto& ix = kb.idx();
    std::vector<TreeChoice> out;

    for (int s0 = 0; s0 < ix.num_scenarios(); ++s0) {
        for (int c = 0; c < ix.num_concepts(); ++c) {
            const double phi = ix.phi[static_cast<std::size_t>(s0)][static_cast<std::size_t>(c)];
            if (phi <= 0.0) continue;
            TreeChoice base;
            base.tree.root = {ix.scenario_names[static_cast<std::size_t>(s0)],
                              ix.concept_names[static_cast<std::size_t>(c)], ""};
            base.log_factor = std::log(phi);
            base.scenario_draws = {s0};

            std::vector<TreeChoice> partial{base};
            for (int rid : ix.concept_roles[static_cast<std::size_t>(c)]) {
                const auto& role = ix.roles[static_cast<std::size_t>(rid)];
                std::vector<TreeChoice> next;
                for (const auto& p : partial) {
                    if (role.realize_prob < 1.0) {
                        TreeChoice skip = p;
                        skip.tree.unrealized.push_back(role.name);
                        skip.log_factor += std::log1p(-role.realize_prob);
                        next.push_back(std::move(skip));
                    }
                    if (role.realize_prob > 0.0) {
                        for (int s1 = 0; s1 < ix.num_scenarios(); ++s1) {
                            const auto& poe = ix.poe[static_cast<std::size_t>(s1)][static_cast<std::size_t>(rid)];
                            if (poe.empty()) continue;
                            for (int f = 0; f < ix.num_concepts(); ++f) {
                                const double pf = poe[static_cast<std::size_t>(f)];
                                if (pf <= 0.0) continue;
                                TreeChoice ext = p;
                                ext.tree.realized.push_back(
                                    {role.name,
                                     {ix.scenario_names[static_cast<std::size_t>(s1)],
                                      ix.concept_names[static_cast<std::size_t>(f)], ""}});
                                ext.log_factor += std::log(role.realize_prob) + std::log(pf);
                                ext.scenario_draws.push_back(s1);
                                next.push_back(std::move(ext));
                            }
                        }
                    }
                }
                partial = std::move(next);
            }
            for (auto& p : partial) out.push_back(std::move(p));
        }
    }
    return out;
}

void assign_referents(ConceptualGraph& g) {
    std::size_t next = 0;
    for (auto& tree : g.trees) {
        tree.root.referent = "x" + std::to_string(++next);
        for (auto& rt : tree.realized) rt.filler.referent = "x" + std::to_string(++next);
    }
}

// log-sum-exp accumulator
struct LogSum {
    double max_seen = kNegInf;
    double sum = 0.0;
    void add(double lp) {
        if (lp == kNegInf) return;
        if (lp > max_seen) {
            sum = sum * std::exp(max_seen - lp) + 1.0;
            max_seen = lp;
        } else {
            sum += std::exp(lp - max_seen);
        }
    }
    double value() const { return max_seen == kNegInf ? kNegInf : max_seen + std::log(sum); }
};

}  // namespace

Posterior exact_posterior(const KnowledgeBase& kb, const Edrs& utterance) {
    const auto& ix = kb.idx();
    const int slots = kb.max_trees * (1 + ix.max_roles_per_concept);
    if (slots > 8) {
        throw EnumerationBoundError("exact enumeration refused: " + std::to_string(slots) +
                                    " scenario-draw slots exceed the bound of 8");
    }
    if (ix.num_concepts() > 32) {
        throw EnumerationBoundError("exact enumeration refused: " + std::to_string(ix.num_concepts()) +
                                    " concepts exceed the bound of 32");
    }

    const UtteranceNeeds needs(utterance);
    const auto choices = enumerate_tree_choices(kb);

    // pass 1: aggregate ordered tree tuples into canonical graphs
    struct GraphAgg {
        ConceptualGraph graph;  // canonical
        LogSum mass;
    };
    std::map<std::string, GraphAgg> graphs;

    std::vector<const TreeChoice*> pick;
    for (int n = 1; n <= kb.max_trees; ++n) {
        const double pn = ix.tree_count_probs[static_cast<std::size_t>(n - 1)];
        if (pn <= 0.0) continue;
        std::function<void(int, double, std::vector<int>&)> rec = [&](int depth, double lf,
                                                                      std::vector<int>& scen_counts) {
            if (depth == n) {
                ConceptualGraph g;
                for (const auto* tc : pick) g.trees.push_back(tc->tree);
                assign_referents(g);
                SituationDescription shell{std::move(g), {}};
                for (const auto& tree : shell.graph.trees) {
                    shell.drs.add_referent(tree.root.referent);
                    for (const auto& rt : tree.realized) shell.drs.add_referent(rt.filler.referent);
                }
                auto canon = canonicalize(shell);
                const double lp =
                    std::log(pn) + lf + log_collapsed_seq_prob(scen_counts, kb.alpha, ix.num_scenarios());
                auto key = graph_text(canon.graph);
                auto [it, inserted] = graphs.try_emplace(std::move(key));
                if (inserted) it->second.graph = std::move(canon.graph);
                it->second.mass.add(lp);
                return;
            }
            for (const auto& tc : choices) {
                pick.push_back(&tc);
                for (int s : tc.scenario_draws) ++scen_counts[static_cast<std::size_t>(s)];
                rec(depth + 1, lf + tc.log_factor, scen_counts);
                for (int s : tc.scenario_draws) --scen_counts[static_cast<std::size_t>(s)];
                pick.pop_back();
            }
        };
        std::vector<int> scen_counts(static_cast<std::size_t>(ix.num_scenarios()), 0);
        rec(0, 0.0, scen_counts);
    }

    // pass 2: per canonical graph, resolve the utterance-relevant conditions
    struct SdAgg {
        SituationDescription sd;
        LogSum mass;
    };
    std::map<std::string, SdAgg> support;
    LogSum total;

    for (auto& [gkey, agg] : graphs) {
        const TokenView view(agg.graph, ix);
        const auto assignments = viable_assignments(needs, view, ix);
        if (assignments.empty()) continue;

        // entity = concept token (kind 0) or role pair (kind 1)
        struct Entity {
            int kind;
            int index;
            std::string pred;
            auto operator<=>(const Entity&) const = default;
        };
        std::map<std::pair<int, int>, int> pair_index;
        for (std::size_t p = 0; p < view.pairs.size(); ++p) {
            pair_index[{view.pairs[p].parent_tok, view.pairs[p].filler_tok}] = static_cast<int>(p);
        }

        // needed resolutions per assignment, and the union set R
        std::set<Entity> relevant;
        struct Need {
            Entity entity;
            bool negated;
        };
        std::vector<std::vector<Need>> needs_per_assignment;
        for (const auto& m : assignments) {
            std::vector<Need> ns;
            for (std::size_t i = 0; i < needs.refs.size(); ++i) {
                for (const auto& [pred, neg] : needs.unary[i]) {
                    Entity e{0, m[i], pred};
                    relevant.insert(e);
                    ns.push_back({e, neg});
                }
            }
            for (const auto& [pr, plist] : needs.binary) {
                const int pi = pair_index.at({m[static_cast<std::size_t>(pr.first)],
                                              m[static_cast<std::size_t>(pr.second)]});
                for (const auto& [pred, neg] : plist) {
                    Entity e{1, pi, pred};
                    relevant.insert(e);
                    ns.push_back({e, neg});
                }
            }
            needs_per_assignment.push_back(std::move(ns));
        }

        const std::vector<Entity> rel(relevant.begin(), relevant.end());
        auto pi_of = [&](const Entity& e) -> double {
            if (e.kind == 0) {
                for (const auto& [p, pi] : ix.concept_preds[static_cast<std::size_t>(
                         view.tokens[static_cast<std::size_t>(e.index)].concept_cid)]) {
                    if (p == e.pred) return pi;
                }
            } else {
                const int rid = view.pairs[static_cast<std::size_t>(e.index)].role_id;
                for (const auto& [p, pi] : ix.roles[static_cast<std::size_t>(rid)].preds) {
                    if (p == e.pred) return pi;
                }
            }
            throw InferError("internal: relevant predicate not found");
        };

        // enumerate polarity assignments over R
        std::vector<bool> polarity(rel.size(), true);
        std::function<void(std::size_t, double)> resolve = [&](std::size_t i, double lf) {
            if (i == rel.size()) {
                bool viable = false;
                for (const auto& ns : needs_per_assignment) {
                    bool all = true;
                    for (const auto& need : ns) {
                        const std::size_t at = static_cast<std::size_t>(
                            std::lower_bound(rel.begin(), rel.end(), need.entity) - rel.begin());
                        if (polarity[at] != !need.negated) {
                            all = false;
                            break;
                        }
                    }
                    if (all) {
                        viable = true;
                        break;
                    }
                }
                if (!viable) return;

                SituationDescription sd;
                sd.graph = agg.graph;
                for (const auto& tree : sd.graph.trees) {
                    sd.drs.add_referent(tree.root.referent);
                    for (const auto& rt : tree.realized) sd.drs.add_referent(rt.filler.referent);
                }
                for (std::size_t k = 0; k < rel.size(); ++k) {
                    const auto& e = rel[k];
                    Condition c;
                    c.pred = e.pred;
                    c.negated = !polarity[k];
                    if (e.kind == 0) {
                        c.args = {view.tokens[static_cast<std::size_t>(e.index)].referent};
                    } else {
                        const auto& pr = view.pairs[static_cast<std::size_t>(e.index)];
                        c.args = {view.tokens[static_cast<std::size_t>(pr.parent_tok)].referent,
                                  view.tokens[static_cast<std::size_t>(pr.filler_tok)].referent};
                    }
                    sd.drs.add_condition(std::move(c));
                }
                sd = canonicalize(sd);
                const double lp = agg.mass.value() + lf;
                total.add(lp);
                auto key = sd_text(sd);
                auto [it, inserted] = support.try_emplace(std::move(key));
                if (inserted) it->second.sd = std::move(sd);
                it->second.mass.add(lp);
                return;
            }
            const double pi = pi_of(rel[i]);
            if (pi > 0.0) {
                polarity[i] = true;
                resolve(i + 1, lf + std::log(pi));
            }
            if (pi < 1.0) {
                polarity[i] = false;
                resolve(i + 1, lf + std::log1p(-pi));
            }
        };
        resolve(0, 0.0);
    }

    if (support.empty() || total.value() == kNegInf) {
        throw InferError("utterance has zero probability under this knowledge base");
    }

    Posterior post;
    post.utterance = utterance;
    post.exact = true;
    post.kb = kb;
    const double log_total = total.value();
    for (auto& [key, agg] : support) {
        PosteriorEntry e;
        e.sd = std::move(agg.sd);
        e.weight = std::exp(agg.mass.value() - log_total);
        e.embeddings = all_embeddings(utterance, e.sd.drs);
        post.support.push_back(std::move(e));
    }
    sort_support(post.support);
    return post;
}

// ---------------------------------------------------------------------------
// posterior queries
// ---------------------------------------------------------------------------

namespace {

const ConceptToken* token_at(const SituationDescription& sd, const std::string& referent,
                             const PredArgTree** tree_out = nullptr) {
    for (const auto& tree : sd.graph.trees) {
        if (tree.root.referent == referent) {
            if (tree_out) *tree_out = &tree;
            return &tree.root;
        }
        for (const auto& rt : tree.realized) {
            if (rt.filler.referent == referent) {
                if (tree_out) *tree_out = nullptr;
                return &rt.filler;
            }
        }
    }
    return nullptr;
}

void require_utterance_referent(const Posterior& p, const std::string& referent) {
    if (!p.utterance.has_referent(referent)) {
        throw InferError("unknown referent '" + referent + "' (not in the utterance)");
    }
}

}  // namespace

Categorical query_sense(const Posterior& p, const std::string& referent) {
    require_utterance_referent(p, referent);
    std::map<std::string, double> acc;
    for (const auto& e : p.support) {
        if (e.embeddings.empty()) continue;
        const double per = e.weight / static_cast<double>(e.embeddings.size());
        for (const auto& m : e.embeddings) {
            const auto* tok = token_at(e.sd, m.at(referent));
            if (!tok) throw InferError("internal: embedded referent lost");
            acc[tok->concept_name] += per;
        }
    }
    std::vector<std::string> labels;
    std::vector<double> weights;
    for (const auto& [c, w] : acc) {
        labels.push_back(c);
        weights.push_back(w);
    }
    return Categorical::from_weights(std::move(labels), std::move(weights));
}

RoleMarginal query_role(const Posterior& p, const std::string& event_referent, const std::string& role) {
    require_utterance_referent(p, event_referent);
    bool role_known = false;
    for (const auto& [cname, c] : p.kb.concepts) role_known = role_known || c.roles.count(role) > 0;
    if (!role_known) throw InferError("unknown role '" + role + "'");

    double realized_mass = 0.0;
    double total_mass = 0.0;
    std::map<std::string, double> fillers;
    for (const auto& e : p.support) {
        if (e.embeddings.empty()) continue;
        const double per = e.weight / static_cast<double>(e.embeddings.size());
        for (const auto& m : e.embeddings) {
            total_mass += per;
            const PredArgTree* tree = nullptr;
            token_at(e.sd, m.at(event_referent), &tree);
            if (!tree) continue;  // mapped to a filler: the role cannot be realized there
            for (const auto& rt : tree->realized) {
                if (rt.role == role) {
                    realized_mass += per;
                    fillers[rt.filler.concept_name] += per;
                    break;
                }
            }
        }
    }
    RoleMarginal out;
    out.realization = total_mass > 0.0 ? realized_mass / total_mass : 0.0;
    if (!fillers.empty()) {
        std::vector<std::string> labels;
        std::vector<double> weights;
        for (const auto& [c, w] : fillers) {
            labels.push_back(c);
            weights.push_back(w);
        }
        out.fillers = Categorical::from_weights(std::move(labels), std::move(weights));
    }
    return out;
}

double query_entailment(const Posterior& p, const std::string& referent, const std::string& predicate) {
    require_utterance_referent(p, referent);
    const auto& ix = p.kb.idx();
    double acc = 0.0;
    for (const auto& e : p.support) {
        if (e.embeddings.empty()) continue;
        const double per = e.weight / static_cast<double>(e.embeddings.size());
        for (const auto& m : e.embeddings) {
            const std::string& ref = m.at(referent);
            if (e.sd.drs.has_condition({predicate, false, {ref}})) {
                acc += per;
            } else if (e.sd.drs.has_condition({predicate, true, {ref}})) {
                // resolved negative: contributes nothing
            } else {
                // unresolved: marginal probability is the token concept's pi
                const auto* tok = token_at(e.sd, ref);
                if (!tok) continue;
                const int cid = ix.concept_id.at(tok->concept_name);
                for (const auto& [pred, pi] : ix.concept_preds[static_cast<std::size_t>(cid)]) {
                    if (pred == predicate) {
                        acc += per * pi;
                        break;
                    }
                }
            }
        }
    }
    return acc;
}

std::vector<PosteriorEntry> top_k(const Posterior& p, std::size_t k) {
    std::vector<PosteriorEntry> out;
    for (const auto& e : p.support) {
        if (out.size() >= k) break;
        out.push_back(e);
    }
    return out;
}

}  // namespace sds
