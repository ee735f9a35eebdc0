#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "sds/errors.hpp"
#include "sds/infer.hpp"
#include "test_support.hpp"

using namespace sds;

namespace {

double four_sigma(double v, long long n) {
    return 4.0 * std::sqrt(std::max(v * (1.0 - v), 0.0) / static_cast<double>(n)) + 1e-9;
}

void check_zero_mass_guarantee(const Posterior& p) {
    double total = 0.0;
    for (const auto& e : p.support) {
        CHECK(e.weight > 0.0);
        total += e.weight;
        CHECK(contains(p.utterance, e.sd.drs).has_value());
        CHECK_FALSE(e.embeddings.empty());
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("the sleeping bat is disambiguated to the animal") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep.kb.json"));
    const Edrs utt = sentence_to_edrs("a bat was sleeping", kb);

    const Posterior ex = exact_posterior(kb, utt);
    CHECK(ex.support.size() == 1);
    CHECK(query_sense(ex, "x").prob_of("bat_animal") == doctest::Approx(1.0));
    CHECK(query_sense(ex, "e").prob_of("sleep") == doctest::Approx(1.0));
    check_zero_mass_guarantee(ex);

    const Posterior rj = rejection_infer(kb, utt, 500, 42);
    CHECK(rj.support.size() == 1);
    CHECK(query_sense(rj, "x").prob_of("bat_animal") == doctest::Approx(1.0));
    CHECK(rj.stats.accepted == 500);
    CHECK(rj.stats.attempts >= 500);
    check_zero_mass_guarantee(rj);
}

TEST_CASE("exact posterior equals conditioning-as-filtering") {
    SUBCASE("sleeping bat: identical supports and weights") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("sleep.kb.json"));
        const Edrs utt = sentence_to_edrs("a bat was sleeping", kb);
        const auto brute = test::oracle_posterior(kb, utt);
        const Posterior ex = exact_posterior(kb, utt);
        REQUIRE(brute.size() == ex.support.size());
        std::map<std::string, double> brute_w;
        for (const auto& s : brute) brute_w[sd_text(s.sd)] = s.weight;
        for (const auto& e : ex.support) {
            REQUIRE(brute_w.count(sd_text(e.sd)) == 1);
            CHECK(e.weight == doctest::Approx(brute_w.at(sd_text(e.sd))).epsilon(1e-9));
        }
    }
    SUBCASE("feature entailments: identical query answers") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("sleep_features.kb.json"));
        const Edrs utt = sentence_to_edrs("a bat was sleeping", kb);
        const auto brute = test::oracle_posterior(kb, utt);
        const Posterior ex = exact_posterior(kb, utt);

        // entailment marginals against the fully resolved brute force
        for (const auto& pred : {"flies", "is_black", "animal", "bat"}) {
            double brute_p = 0.0;
            for (const auto& s : brute) {
                for (const auto& m : all_embeddings(utt, s.sd.drs)) {
                    if (s.sd.drs.has_condition({pred, false, {m.at("x")}})) {
                        brute_p += s.weight / static_cast<double>(all_embeddings(utt, s.sd.drs).size());
                    }
                }
            }
            CHECK(query_entailment(ex, "x", pred) == doctest::Approx(brute_p).epsilon(1e-9));
        }
    }
    SUBCASE("two-tree KB with imagined content") {
        const KnowledgeBase kb = load_kb(test::kMiniKbJson);
        Edrs utt;
        utt.add_referent("v");
        utt.add_condition({"obj", false, {"v"}});
        const auto brute = test::oracle_posterior(kb, utt);
        const Posterior ex = exact_posterior(kb, utt);

        // sense marginal for v, embeddings weighted equally, both routes
        std::map<std::string, double> brute_sense;
        for (const auto& s : brute) {
            const auto embs = all_embeddings(utt, s.sd.drs);
            for (const auto& m : embs) {
                const std::string& ref = m.at("v");
                for (const auto& tree : s.sd.graph.trees) {
                    if (tree.root.referent == ref) brute_sense[tree.root.concept_name] += s.weight / embs.size();
                    for (const auto& rt : tree.realized) {
                        if (rt.filler.referent == ref) {
                            brute_sense[rt.filler.concept_name] += s.weight / embs.size();
                        }
                    }
                }
            }
        }
        const auto sense = query_sense(ex, "v");
        double total = 0.0;
        for (const auto& [cname, w] : brute_sense) {
            CHECK(sense.prob_of(cname) == doctest::Approx(w).epsilon(1e-9));
            total += w;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        check_zero_mass_guarantee(ex);
    }
}

TEST_CASE("player holding a bat: frozen exact values") {
    SUBCASE("one scenario splits the senses evenly") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_1scen.kb.json"));
        const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);
        const Posterior ex = exact_posterior(kb, utt);
        CHECK(query_sense(ex, "y").prob_of("bat_stick") == doctest::Approx(0.5).epsilon(1e-9));
    }
    SUBCASE("two scenarios at alpha one half give exactly three quarters") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
        const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);
        const Posterior ex = exact_posterior(kb, utt);
        CHECK(query_sense(ex, "y").prob_of("bat_stick") == doctest::Approx(0.75).epsilon(1e-9));
    }
    SUBCASE("two scenarios at alpha one tenth give eleven twelfths") {
        KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
        kb.alpha = 0.1;
        kb.finalize();
        const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);
        const Posterior ex = exact_posterior(kb, utt);
        CHECK(query_sense(ex, "y").prob_of("bat_stick") == doctest::Approx(11.0 / 12.0).epsilon(1e-9));
    }
    SUBCASE("rejection at 2000 samples sits within four sigma of exact") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
        const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);
        const Posterior rj = rejection_infer(kb, utt, 2000, 42);
        const double v = query_sense(rj, "y").prob_of("bat_stick");
        CHECK(std::abs(v - 0.75) <= four_sigma(0.75, 2000));
        check_zero_mass_guarantee(rj);
    }
}

TEST_CASE("astronomer pun: frozen exact values") {
    KnowledgeBase kb = load_kb_file(test::kb_path("astronomer.kb.json"));
    const Edrs utt = sentence_to_edrs("an astronomer married a star", kb);
    const Posterior half = exact_posterior(kb, utt);
    CHECK(query_sense(half, "y").prob_of("star_sun") ==
          doctest::Approx(26.0 / 131.0).epsilon(1e-9));

    kb.alpha = 0.1;
    kb.finalize();
    const Posterior tenth = exact_posterior(kb, utt);
    CHECK(query_sense(tenth, "y").prob_of("star_sun") == doctest::Approx(6.0 / 13.0).epsilon(1e-9));

    // the agent stays an astronomer in both readings
    CHECK(query_sense(half, "x").prob_of("astronomer") == doctest::Approx(1.0));
}

TEST_CASE("leave clusters: frozen exact values under the shipped construction") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("leave.kb.json"));
    const struct {
        const char* noun;
        const char* sense;
        double expected;
    } rows[] = {
        {"room", "leave5", 216.0 / 251.0},
        {"house", "leave1", 115.0 / 199.0},
        {"country", "leave1", 1.0},
        {"job", "leave2", 168.0 / 443.0},
        {"friend", "leave2", 2296.0 / 2571.0},
    };
    for (const auto& row : rows) {
        const Edrs utt = sentence_to_edrs(std::string("a woman left a ") + row.noun, kb);
        const Posterior ex = exact_posterior(kb, utt);
        CHECK(query_sense(ex, "e").prob_of(row.sense) == doctest::Approx(row.expected).epsilon(1e-9));
    }
}

TEST_CASE("vampire eating: imagination marginals") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("vampire_eat.kb.json"));
    const Edrs utt = sentence_to_edrs("a vampire was eating", kb);
    const Posterior ex = exact_posterior(kb, utt);

    SUBCASE("theme is always imagined, with the selectional distribution") {
        const auto rm = query_role(ex, "e", "Theme");
        CHECK(rm.realization == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("blood_orange") == doctest::Approx(0.33).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("steak") == doctest::Approx(0.33).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("salad") == doctest::Approx(0.33).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("vampire") == doctest::Approx(0.005).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("bat_animal") == doctest::Approx(0.005).epsilon(1e-9));
    }
    SUBCASE("location realization matches rho exactly") {
        const auto rm = query_role(ex, "e", "Location");
        CHECK(rm.realization == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("castle") == doctest::Approx(0.45).epsilon(1e-9));
        CHECK(rm.fillers.prob_of("beach") == doctest::Approx(0.45).epsilon(1e-9));
    }
    SUBCASE("the blood-orange-at-the-beach reading carries its exact weight") {
        bool found = false;
        for (const auto& e : top_k(ex, ex.support.size())) {
            REQUIRE(e.sd.graph.trees.size() == 1);
            const auto& tree = e.sd.graph.trees.front();
            std::map<std::string, std::string> fills;
            for (const auto& rt : tree.realized) fills[rt.role] = rt.filler.concept_name;
            if (fills == std::map<std::string, std::string>{{"Agent", "vampire"},
                                                            {"Theme", "blood_orange"},
                                                            {"Location", "beach"}}) {
                found = true;
                CHECK(e.weight == doctest::Approx(0.0297).epsilon(1e-9));
            }
        }
        CHECK(found);
    }
    SUBCASE("rejection agrees within four sigma") {
        const Posterior rj = rejection_infer(kb, utt, 2000, 7);
        const auto rm = query_role(rj, "e", "Location");
        CHECK(std::abs(rm.realization - 0.2) <= four_sigma(0.2, 2000));
        const auto th = query_role(rj, "e", "Theme");
        CHECK(std::abs(th.fillers.prob_of("blood_orange") - 0.33) <= four_sigma(0.33, 2000));
    }
}

TEST_CASE("entailment queries") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep_features.kb.json"));
    const Edrs utt = sentence_to_edrs("a bat was sleeping", kb);

    const Posterior ex = exact_posterior(kb, utt);
    CHECK(query_entailment(ex, "x", "flies") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(query_entailment(ex, "x", "is_black") == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(query_entailment(ex, "x", "bat") == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(query_entailment(ex, "x", "wings") == 0.0);  // outside every concept's predicates

    const Posterior rj = rejection_infer(kb, utt, 2000, 11);
    CHECK(query_entailment(rj, "x", "flies") == doctest::Approx(1.0));
    CHECK(std::abs(query_entailment(rj, "x", "is_black") - 0.75) <= four_sigma(0.75, 2000));

    CHECK_THROWS_AS(query_entailment(ex, "zz", "flies"), InferError);
    CHECK_THROWS_AS(query_sense(ex, "zz"), InferError);
    CHECK_THROWS_AS(query_role(ex, "e", "NotARole"), InferError);
}

TEST_CASE("top_k ordering and bounds") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("vampire_eat.kb.json"));
    const Edrs utt = sentence_to_edrs("a vampire was eating", kb);
    const Posterior ex = exact_posterior(kb, utt);

    const auto top = top_k(ex, 5);
    REQUIRE(top.size() == 5);
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].weight >= top[i].weight);

    const auto all = top_k(ex, 100000);
    CHECK(all.size() == ex.support.size());

    // the most likely reading omits the optional location
    CHECK(top[0].sd.graph.trees.front().realized.size() == 2);
    CHECK(top[0].weight == doctest::Approx(0.33 * 0.8).epsilon(1e-9));
}

TEST_CASE("early rejection is distributionally equivalent to sample-then-check") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep_features.kb.json"));
    const Edrs utt = sentence_to_edrs("a bat was sleeping", kb);
    const Posterior ex = exact_posterior(kb, utt);

    // naive route: unconditioned samples filtered by containment
    std::map<std::string, double> naive;
    RandomSource rng(55);
    int accepted = 0;
    const int want = 2000;
    while (accepted < want) {
        auto r = sample_sd(kb, rng);
        if (r.status != SampleStatus::kOk) continue;
        if (!contains(utt, r.sd.drs)) continue;
        ++accepted;
        naive[sd_text(r.sd)] += 1.0 / want;
    }

    // early-rejection route
    const Posterior early = rejection_infer(kb, utt, want, 55);

    // both must match the exact posterior within four sigma, class by class;
    // exact-mode classes are coarser (unobserved predicates marginalized), so
    // compare on entailment and sense marginals plus total variation bounds
    auto check_against_exact = [&](double observed, double exact_v) {
        CHECK(std::abs(observed - exact_v) <= four_sigma(exact_v, want));
    };
    double naive_black = 0.0;
    {
        RandomSource rng2(55);
        int acc = 0;
        while (acc < want) {
            auto r = sample_sd(kb, rng2);
            if (r.status != SampleStatus::kOk) continue;
            auto m = contains(utt, r.sd.drs);
            if (!m) continue;
            ++acc;
            if (r.sd.drs.has_condition({"is_black", false, {m->at("x")}})) naive_black += 1.0 / want;
        }
    }
    check_against_exact(naive_black, 0.75);
    check_against_exact(query_entailment(early, "x", "is_black"), 0.75);
    check_against_exact(query_sense(early, "x").prob_of("bat_animal"), 1.0);
}

TEST_CASE("monotonicity: adding utterance conditions never widens the structure set") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep_features.kb.json"));
    const Edrs base = sentence_to_edrs("a bat was sleeping", kb);
    Edrs more = base;
    more.add_condition({"is_black", false, {"x"}});

    auto graph_set = [&](const Edrs& utt) {
        std::set<std::string> out;
        for (const auto& e : exact_posterior(kb, utt).support) out.insert(graph_text(e.sd.graph));
        return out;
    };
    const auto gs_base = graph_set(base);
    const auto gs_more = graph_set(more);
    for (const auto& g : gs_more) CHECK(gs_base.count(g) == 1);

    // a contradictory addition empties the posterior
    Edrs impossible = base;
    impossible.add_condition({"armadillo", false, {"x"}});
    CHECK_THROWS_AS(exact_posterior(kb, impossible), InferError);
}

TEST_CASE("multiple embeddings marginalize with equal weight") {
    // two-tree KB where an utterance referent can match either tree
    const KnowledgeBase kb = load_kb(test::kMiniKbJson);
    Edrs utt;
    utt.add_referent("v");
    utt.add_condition({"obj", false, {"v"}});

    const Posterior ex = exact_posterior(kb, utt);
    check_zero_mass_guarantee(ex);
    bool saw_multi_embedding = false;
    for (const auto& e : ex.support) saw_multi_embedding = saw_multi_embedding || e.embeddings.size() > 1;
    CHECK(saw_multi_embedding);

    const Posterior rj = rejection_infer(kb, utt, 2000, 99);
    const double ex_sense = query_sense(ex, "v").prob_of("obj");
    const double rj_sense = query_sense(rj, "v").prob_of("obj");
    CHECK(ex_sense == doctest::Approx(1.0));  // only obj emits "obj"
    CHECK(rj_sense == doctest::Approx(1.0));

    // entailment on the shiny predicate differs between embeddings
    const double ex_shiny = query_entailment(ex, "v", "shiny");
    const double rj_shiny = query_entailment(rj, "v", "shiny");
    CHECK(std::abs(rj_shiny - ex_shiny) <= four_sigma(ex_shiny, 2000));
}

TEST_CASE("acceptance starvation carries the attempt count") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep.kb.json"));
    Edrs utt;
    utt.add_referent("x");
    utt.add_condition({"push", false, {"x"}});
    utt.add_referent("e");
    utt.add_condition({"sleep", false, {"e"}});
    utt.add_condition({"Theme", false, {"e", "x"}});  // pushes never fill the sleeping theme

    RejectionConfig cfg;
    cfg.samples = 10;
    cfg.max_attempts = 200;
    try {
        rejection_infer(kb, utt, cfg);
        FAIL("expected starvation");
    } catch (const StarvationError& e) {
        CHECK(e.attempts == 200);
        CHECK(e.accepted == 0);
        CHECK(e.requested == 10);
    }
}

TEST_CASE("deterministic parallel workers") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
    const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);

    RejectionConfig cfg;
    cfg.samples = 400;
    cfg.seed = 13;
    cfg.workers = 3;
    const Posterior a = rejection_infer(kb, utt, cfg);
    const Posterior b = rejection_infer(kb, utt, cfg);
    REQUIRE(a.support.size() == b.support.size());
    for (std::size_t i = 0; i < a.support.size(); ++i) {
        CHECK(sd_text(a.support[i].sd) == sd_text(b.support[i].sd));
        CHECK(a.support[i].weight == b.support[i].weight);
    }
    CHECK(a.stats.attempts == b.stats.attempts);
    CHECK(a.stats.accepted == 400);
}

TEST_CASE("enumeration guard refuses oversized knowledge bases") {
    SUBCASE("too many scenario-draw slots") {
        const char* big = R"({
          "max_trees": 9,
          "scenarios": { "s": { "c": 1.0 } },
          "concepts": { "c": { "preds": { "c": 1.0 } } },
          "lexicon": { "nouns": {}, "verbs": {} }
        })";
        const KnowledgeBase kb = load_kb(big);
        Edrs utt;
        utt.add_referent("x");
        utt.add_condition({"c", false, {"x"}});
        CHECK_THROWS_AS(exact_posterior(kb, utt), EnumerationBoundError);
    }
    SUBCASE("too many concepts") {
        KnowledgeBase kb;
        ScenarioDef s;
        s.name = "s";
        for (int i = 0; i < 33; ++i) {
            const std::string name = "c" + std::to_string(i);
            ConceptDef c;
            c.name = name;
            c.emit_preds[name] = 1.0;
            kb.concepts[name] = std::move(c);
            s.concept_dist[name] = 1.0 / 33.0;
        }
        kb.scenarios["s"] = std::move(s);
        kb.finalize();
        Edrs utt;
        utt.add_referent("x");
        utt.add_condition({"c0", false, {"x"}});
        CHECK_THROWS_AS(exact_posterior(kb, utt), EnumerationBoundError);
    }
}
