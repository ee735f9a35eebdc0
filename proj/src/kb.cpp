#include "sds/kb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sds/errors.hpp"
#include "sds/prob.hpp"

namespace sds {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_sum(double s) {
    std::ostringstream os;
    os << s;
    return os.str();
}

void check_prob_range(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw KbError(what + " is out of range: " + fmt_sum(p));
    }
}

void check_sums_to_one(const std::map<std::string, double>& dist, const std::string& what) {
    double sum = 0.0;
    for (const auto& [k, v] : dist) {
        if (v < 0.0) throw KbError(what + ": negative probability for '" + k + "'");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw KbError(what + " sums to " + fmt_sum(sum));
    }
}

}  // namespace

void KnowledgeBase::finalize() {
    if (!(alpha > 0.0)) throw KbError("alpha must be positive");
    if (max_trees < 1) throw KbError("max_trees must be at least 1");
    if (scenarios.empty()) throw KbError("knowledge base declares no scenario");
    if (concepts.empty()) throw KbError("knowledge base declares no concept");
    if (tree_count_weights.empty()) {
        tree_count_weights.assign(static_cast<std::size_t>(max_trees), 1.0);
    }
    if (tree_count_weights.size() != static_cast<std::size_t>(max_trees)) {
        throw KbError("tree_count_dist must list one weight per size 1.." + std::to_string(max_trees));
    }

    auto ix = std::make_shared<Index>();
    for (const auto& [name, c] : concepts) ix->concept_names.push_back(name);
    for (const auto& [name, s] : scenarios) ix->scenario_names.push_back(name);
    for (std::size_t i = 0; i < ix->concept_names.size(); ++i) ix->concept_id[ix->concept_names[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < ix->scenario_names.size(); ++i) ix->scenario_id[ix->scenario_names[i]] = static_cast<int>(i);
    const int C = ix->num_concepts();

    double wsum = 0.0;
    for (double w : tree_count_weights) {
        if (w < 0.0) throw KbError("tree_count_dist: negative weight");
        wsum += w;
    }
    if (wsum <= 0.0) throw KbError("tree_count_dist: weights sum to zero");
    for (double w : tree_count_weights) ix->tree_count_probs.push_back(w / wsum);

    // predicate inventory: a name may not be both unary and binary
    auto claim_pred = [&](const std::string& pred, int arity, const std::string& where) {
        auto [it, inserted] = ix->pred_arity.emplace(pred, arity);
        if (!inserted && it->second != arity) {
            throw KbError("predicate '" + pred + "' used with conflicting arities (" + where + ")");
        }
    };

    ix->concept_preds.resize(static_cast<std::size_t>(C));
    ix->concept_roles.resize(static_cast<std::size_t>(C));
    for (const auto& [cname, c] : concepts) {
        const int cid = ix->concept_id.at(cname);
        for (const auto& [pred, pi] : c.emit_preds) {
            check_prob_range(pi, "concept '" + cname + "': probability of predicate '" + pred + "'");
            claim_pred(pred, 1, "concept '" + cname + "'");
            ix->concept_preds[static_cast<std::size_t>(cid)].emplace_back(pred, pi);
            if (pi > 0.0) ix->unary_emitters[pred].insert(cname);
        }
        for (const auto& [rname, role] : c.roles) {
            check_prob_range(role.realize_prob, "role '" + rname + "' of concept '" + cname + "': realize");
            check_sums_to_one(role.selpref, "selectional preference of role '" + rname + "' of concept '" + cname + "'");
            Index::RoleInfo info;
            info.name = rname;
            info.parent = cid;
            info.realize_prob = role.realize_prob;
            info.chi.assign(static_cast<std::size_t>(C), 0.0);
            for (const auto& [filler, p] : role.selpref) {
                auto fit = ix->concept_id.find(filler);
                if (fit == ix->concept_id.end()) {
                    throw KbError("selectional preference of role '" + rname + "' of concept '" + cname +
                                  "' references undeclared concept '" + filler + "'");
                }
                if (p > 0.0 && !concepts.at(filler).roles.empty()) {
                    throw KbError("role '" + rname + "' of concept '" + cname + "' admits filler '" + filler +
                                  "' which has roles of its own; filler concepts must have none");
                }
                info.chi[static_cast<std::size_t>(fit->second)] = p;
            }
            std::map<std::string, double> rpreds = role.emit_preds;
            if (rpreds.empty()) rpreds[rname] = 1.0;  // a role emits its own name by default
            for (const auto& [pred, pi] : rpreds) {
                check_prob_range(pi, "role '" + rname + "' of concept '" + cname + "': probability of predicate '" + pred + "'");
                claim_pred(pred, 2, "role '" + rname + "' of concept '" + cname + "'");
                info.preds.emplace_back(pred, pi);
            }
            ix->concept_roles[static_cast<std::size_t>(cid)].push_back(static_cast<int>(ix->roles.size()));
            ix->roles.push_back(std::move(info));
        }
        ix->max_roles_per_concept = std::max(ix->max_roles_per_concept,
                                             static_cast<int>(c.roles.size()));
    }

    ix->phi.assign(ix->scenario_names.size(), std::vector<double>(static_cast<std::size_t>(C), 0.0));
    for (const auto& [sname, s] : scenarios) {
        check_sums_to_one(s.concept_dist, "scenario '" + sname + "' distribution");
        const int sid = ix->scenario_id.at(sname);
        for (const auto& [cname, p] : s.concept_dist) {
            auto cit = ix->concept_id.find(cname);
            if (cit == ix->concept_id.end()) {
                throw KbError("scenario '" + sname + "' references undeclared concept '" + cname + "'");
            }
            ix->phi[static_cast<std::size_t>(sid)][static_cast<std::size_t>(cit->second)] = p;
        }
    }

    // product-of-experts tables per (scenario, role)
    ix->poe.assign(ix->scenario_names.size(), std::vector<std::vector<double>>(ix->roles.size()));
    for (std::size_t s = 0; s < ix->scenario_names.size(); ++s) {
        for (std::size_t r = 0; r < ix->roles.size(); ++r) {
            auto w = poe_weights(ix->phi[s], ix->roles[r].chi);
            if (w) ix->poe[s][r] = std::move(*w);
        }
    }

    for (const auto& [word, pred] : lexicon.nouns) {
        claim_pred(pred, 1, "lexicon noun '" + word + "'");
    }
    for (const auto& [word, verb] : lexicon.verbs) {
        claim_pred(verb.event_pred, 1, "lexicon verb '" + word + "'");
        claim_pred(verb.subj_pred, 2, "lexicon verb '" + word + "'");
        if (verb.obj_pred) claim_pred(*verb.obj_pred, 2, "lexicon verb '" + word + "'");
    }

    index_ = std::move(ix);
}

const KnowledgeBase::Index& KnowledgeBase::idx() const {
    if (!index_) throw KbError("knowledge base has not been finalized");
    return *index_;
}

namespace {

double get_prob(const json& j, const std::string& what) {
    if (!j.is_number()) throw KbError(what + " must be a number");
    return j.get<double>();
}

}  // namespace

KnowledgeBase load_kb(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw KbError(std::string("knowledge base parse error: ") + e.what());
    }
    if (!j.is_object()) throw KbError("knowledge base must be a JSON object");

    KnowledgeBase kb;
    kb.alpha = get_prob(j.value("alpha", json(0.5)), "alpha");
    kb.max_trees = j.value("max_trees", 1);

    if (j.contains("tree_count_dist")) {
        const auto& t = j["tree_count_dist"];
        if (t.is_string()) {
            if (t.get<std::string>() != "uniform") {
                throw KbError("tree_count_dist: unknown distribution '" + t.get<std::string>() + "'");
            }
            kb.tree_count_weights.assign(static_cast<std::size_t>(std::max(kb.max_trees, 1)), 1.0);
        } else if (t.is_array()) {
            for (const auto& w : t) kb.tree_count_weights.push_back(get_prob(w, "tree_count_dist weight"));
        } else {
            throw KbError("tree_count_dist must be \"uniform\" or a weight list");
        }
    }

    if (!j.contains("concepts") || !j["concepts"].is_object()) {
        throw KbError("knowledge base must declare a 'concepts' object");
    }
    for (const auto& [cname, cj] : j["concepts"].items()) {
        ConceptDef c;
        c.name = cname;
        if (cj.contains("preds")) {
            for (const auto& [pred, pi] : cj["preds"].items()) {
                c.emit_preds[pred] = get_prob(pi, "concept '" + cname + "' predicate '" + pred + "'");
            }
        }
        if (cj.contains("roles")) {
            for (const auto& [rname, rj] : cj["roles"].items()) {
                RoleDef role;
                role.name = rname;
                role.realize_prob = get_prob(rj.value("realize", json(1.0)), "role '" + rname + "' realize");
                if (rj.contains("selpref")) {
                    for (const auto& [filler, p] : rj["selpref"].items()) {
                        role.selpref[filler] = get_prob(p, "selpref of role '" + rname + "'");
                    }
                }
                if (rj.contains("preds")) {
                    for (const auto& [pred, pi] : rj["preds"].items()) {
                        role.emit_preds[pred] = get_prob(pi, "role '" + rname + "' predicate '" + pred + "'");
                    }
                }
                c.roles[rname] = std::move(role);
            }
        }
        kb.concepts[cname] = std::move(c);
    }

    if (!j.contains("scenarios") || !j["scenarios"].is_object()) {
        throw KbError("knowledge base must declare a 'scenarios' object");
    }
    for (const auto& [sname, sj] : j["scenarios"].items()) {
        ScenarioDef s;
        s.name = sname;
        for (const auto& [cname, p] : sj.items()) {
            s.concept_dist[cname] = get_prob(p, "scenario '" + sname + "' entry '" + cname + "'");
        }
        kb.scenarios[sname] = std::move(s);
    }

    if (j.contains("lexicon")) {
        const auto& lj = j["lexicon"];
        if (lj.contains("nouns")) {
            for (const auto& [word, pred] : lj["nouns"].items()) {
                kb.lexicon.nouns[word] = pred.get<std::string>();
            }
        }
        if (lj.contains("verbs")) {
            for (const auto& [word, vj] : lj["verbs"].items()) {
                VerbEntry v;
                v.event_pred = vj.at("pred").get<std::string>();
                v.subj_pred = vj.at("subj").get<std::string>();
                if (vj.contains("obj") && !vj["obj"].is_null()) {
                    v.obj_pred = vj["obj"].get<std::string>();
                }
                kb.lexicon.verbs[word] = std::move(v);
            }
        }
    }

    kb.finalize();
    return kb;
}

KnowledgeBase load_kb_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot read knowledge base file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_kb(buf.str());
}

std::string kb_to_json(const KnowledgeBase& kb) {
    json j;
    j["alpha"] = kb.alpha;
    j["max_trees"] = kb.max_trees;
    bool uniform = true;
    for (double w : kb.tree_count_weights) uniform = uniform && w == kb.tree_count_weights.front();
    if (uniform) {
        j["tree_count_dist"] = "uniform";
    } else {
        j["tree_count_dist"] = kb.tree_count_weights;
    }
    j["scenarios"] = json::object();
    for (const auto& [sname, s] : kb.scenarios) {
        json sj = json::object();
        for (const auto& [cname, p] : s.concept_dist) sj[cname] = p;
        j["scenarios"][sname] = std::move(sj);
    }
    j["concepts"] = json::object();
    for (const auto& [cname, c] : kb.concepts) {
        json cj = json::object();
        cj["preds"] = json::object();
        for (const auto& [pred, pi] : c.emit_preds) cj["preds"][pred] = pi;
        if (!c.roles.empty()) {
            cj["roles"] = json::object();
            for (const auto& [rname, role] : c.roles) {
                json rj = json::object();
                rj["realize"] = role.realize_prob;
                rj["selpref"] = json::object();
                for (const auto& [filler, p] : role.selpref) rj["selpref"][filler] = p;
                if (!role.emit_preds.empty()) {
                    rj["preds"] = json::object();
                    for (const auto& [pred, pi] : role.emit_preds) rj["preds"][pred] = pi;
                }
                cj["roles"][rname] = std::move(rj);
            }
        }
        j["concepts"][cname] = std::move(cj);
    }
    j["lexicon"] = json::object();
    j["lexicon"]["nouns"] = json::object();
    for (const auto& [word, pred] : kb.lexicon.nouns) j["lexicon"]["nouns"][word] = pred;
    j["lexicon"]["verbs"] = json::object();
    for (const auto& [word, verb] : kb.lexicon.verbs) {
        json vj = json::object();
        vj["pred"] = verb.event_pred;
        vj["subj"] = verb.subj_pred;
        if (verb.obj_pred) vj["obj"] = *verb.obj_pred;
        j["lexicon"]["verbs"][word] = std::move(vj);
    }
    return j.dump(2) + "\n";
}

std::vector<Diagnostic> validate(const KnowledgeBase& kb) {
    std::vector<Diagnostic> out;
    const auto& ix = kb.idx();
    auto warn = [&](std::string msg) { out.push_back({Diagnostic::Severity::kWarning, std::move(msg)}); };
    auto error = [&](std::string msg) { out.push_back({Diagnostic::Severity::kError, std::move(msg)}); };

    for (const auto& [sname, s] : kb.scenarios) {
        double sum = 0.0;
        for (const auto& [c, p] : s.concept_dist) sum += p;
        if (std::abs(sum - 1.0) > 1e-9) {
            error("scenario '" + sname + "' distribution sums to " + fmt_sum(sum));
        }
    }
    for (const auto& [cname, c] : kb.concepts) {
        for (const auto& [rname, role] : c.roles) {
            double sum = 0.0;
            for (const auto& [f, p] : role.selpref) sum += p;
            if (std::abs(sum - 1.0) > 1e-9) {
                error("selectional preference of role '" + rname + "' of concept '" + cname +
                      "' sums to " + fmt_sum(sum));
            }
        }
    }

    // product-of-experts feasibility: every scenario that can generate a
    // concept with roles must also offer at least one filler per role
    for (std::size_t s = 0; s < ix.scenario_names.size(); ++s) {
        for (int rid = 0; rid < static_cast<int>(ix.roles.size()); ++rid) {
            const auto& role = ix.roles[static_cast<std::size_t>(rid)];
            if (ix.phi[s][static_cast<std::size_t>(role.parent)] <= 0.0) continue;
            if (ix.poe[s][static_cast<std::size_t>(rid)].empty()) {
                warn("scenario '" + ix.scenario_names[s] + "': role '" + role.name + "' of concept '" +
                     ix.concept_names[static_cast<std::size_t>(role.parent)] +
                     "' has no generable filler (product of experts infeasible)");
            }
        }
    }

    for (int c = 0; c < ix.num_concepts(); ++c) {
        bool reachable = false;
        for (std::size_t s = 0; s < ix.scenario_names.size() && !reachable; ++s) {
            reachable = ix.phi[s][static_cast<std::size_t>(c)] > 0.0;
        }
        if (!reachable) {
            warn("unreachable concept '" + ix.concept_names[static_cast<std::size_t>(c)] +
                 "': no scenario generates it");
        }
    }

    for (const auto& [word, pred] : kb.lexicon.nouns) {
        if (emitters(kb, pred).empty()) {
            warn("lexicon noun '" + word + "' maps to predicate '" + pred + "' that no concept emits");
        }
    }
    for (const auto& [word, verb] : kb.lexicon.verbs) {
        if (emitters(kb, verb.event_pred).empty()) {
            warn("lexicon verb '" + word + "' maps to predicate '" + verb.event_pred +
                 "' that no concept emits");
        }
    }
    return out;
}

std::set<std::string> emitters(const KnowledgeBase& kb, const std::string& predicate) {
    const auto& ix = kb.idx();
    auto it = ix.unary_emitters.find(predicate);
    if (it == ix.unary_emitters.end()) return {};
    return it->second;
}

}  // namespace sds
