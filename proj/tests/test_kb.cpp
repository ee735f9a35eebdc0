#include <doctest.h>

#include <fstream>
#include <sstream>

#include "sds/errors.hpp"
#include "sds/kb.hpp"
#include "test_support.hpp"

using namespace sds;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const char* kBundled[] = {
    "sleep.kb.json",         "sleep_features.kb.json", "player_bat_1scen.kb.json",
    "player_bat_2scen.kb.json", "leave.kb.json",       "vampire_eat.kb.json",
    "astronomer.kb.json",
};

}  // namespace

TEST_CASE("load_kb on the bundled sleeping-bat knowledge base") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("sleep.kb.json"));
    CHECK(kb.concepts.size() == 8);
    CHECK(kb.scenarios.size() == 1);
    CHECK(kb.alpha == 0.5);
    CHECK(kb.max_trees == 1);
    CHECK(kb.concepts.at("sleep").roles.at("Theme").realize_prob == 1.0);
    CHECK(kb.concepts.at("sleep").roles.at("Theme").selpref.at("bat_animal") == 0.25);
}

TEST_CASE("load_kb error reporting") {
    SUBCASE("scenario distribution off by a tenth") {
        const char* text = R"({
          "scenarios": { "baseball": { "hold": 0.5, "player": 0.4 } },
          "concepts": { "hold": { "preds": { "hold": 1.0 } },
                        "player": { "preds": { "player": 1.0 } } }
        })";
        CHECK_THROWS_WITH_AS(load_kb(text),
                             doctest::Contains("scenario 'baseball' distribution sums to 0.9"),
                             KbError);
    }
    SUBCASE("dangling selectional-preference reference") {
        const char* text = R"({
          "scenarios": { "s": { "hold": 1.0 } },
          "concepts": { "hold": { "preds": { "hold": 1.0 },
            "roles": { "Theme": { "realize": 1.0, "selpref": { "unicorn": 1.0 } } } } }
        })";
        CHECK_THROWS_WITH_AS(load_kb(text), doctest::Contains("undeclared concept 'unicorn'"),
                             KbError);
    }
    SUBCASE("probability out of range") {
        const char* text = R"({
          "scenarios": { "s": { "c": 1.0 } },
          "concepts": { "c": { "preds": { "c": 1.5 } } }
        })";
        CHECK_THROWS_WITH_AS(load_kb(text), doctest::Contains("out of range"), KbError);
    }
    SUBCASE("a predicate cannot be both unary and binary") {
        const char* text = R"({
          "scenarios": { "s": { "ev": 0.5, "f": 0.5 } },
          "concepts": {
            "ev": { "preds": { "p": 1.0 },
                    "roles": { "R": { "realize": 1.0, "selpref": { "f": 1.0 },
                                      "preds": { "p": 1.0 } } } },
            "f": { "preds": { "f": 1.0 } } }
        })";
        CHECK_THROWS_WITH_AS(load_kb(text), doctest::Contains("conflicting arities"), KbError);
    }
    SUBCASE("filler concepts may not have roles of their own") {
        const char* text = R"({
          "scenarios": { "s": { "a": 0.5, "b": 0.5 } },
          "concepts": {
            "a": { "preds": { "a": 1.0 },
                   "roles": { "R": { "realize": 1.0, "selpref": { "b": 1.0 } } } },
            "b": { "preds": { "b": 1.0 },
                   "roles": { "Q": { "realize": 1.0, "selpref": { "a": 1.0 } } } } }
        })";
        CHECK_THROWS_WITH_AS(load_kb(text), doctest::Contains("roles of its own"), KbError);
    }
    SUBCASE("malformed JSON") {
        CHECK_THROWS_AS(load_kb("{ not json"), KbError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_kb_file("/nonexistent/x.kb.json"), FileError);
    }
    SUBCASE("alpha must be positive") {
        const char* text = R"({ "alpha": 0.0,
          "scenarios": { "s": { "c": 1.0 } },
          "concepts": { "c": { "preds": { "c": 1.0 } } } })";
        CHECK_THROWS_WITH_AS(load_kb(text), doctest::Contains("alpha"), KbError);
    }
}

TEST_CASE("kb json round trip") {
    for (const char* file : kBundled) {
        const std::string text = slurp(test::kb_path(file));
        const KnowledgeBase kb = load_kb(text);
        const std::string dumped = kb_to_json(kb);
        const KnowledgeBase again = load_kb(dumped);
        CHECK(kb_to_json(again) == dumped);
        CHECK(again.concepts.size() == kb.concepts.size());
        CHECK(again.scenarios.size() == kb.scenarios.size());
        CHECK(again.alpha == kb.alpha);
    }
}

TEST_CASE("emitters") {
    const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
    CHECK(emitters(kb, "bat") == std::set<std::string>{"bat_animal", "bat_stick"});
    CHECK(emitters(kb, "player") == std::set<std::string>{"player"});
    CHECK(emitters(kb, "unicorn").empty());

    // membership mirrors pi > 0 across every bundled KB
    for (const char* file : kBundled) {
        const KnowledgeBase k = load_kb_file(test::kb_path(file));
        for (const auto& [cname, c] : k.concepts) {
            for (const auto& [pred, pi] : c.emit_preds) {
                CHECK(emitters(k, pred).count(cname) == (pi > 0.0 ? 1u : 0u));
            }
        }
    }
}

TEST_CASE("validate") {
    SUBCASE("the two-scenario holding KB is clean") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("player_bat_2scen.kb.json"));
        CHECK(validate(kb).empty());
    }
    SUBCASE("no bundled KB has validation errors") {
        for (const char* file : kBundled) {
            const KnowledgeBase kb = load_kb_file(test::kb_path(file));
            for (const auto& d : validate(kb)) {
                CHECK(d.severity == Diagnostic::Severity::kWarning);
            }
        }
    }
    SUBCASE("scenario that cannot fill a generable role draws a warning") {
        // the scenario generates sleep but none of its Theme fillers
        const char* text = R"({
          "scenarios": { "s": { "sleep": 0.5, "stone": 0.5 } },
          "concepts": {
            "sleep": { "preds": { "sleep": 1.0 },
              "roles": { "Theme": { "realize": 1.0, "selpref": { "cat": 1.0 } } } },
            "stone": { "preds": { "stone": 1.0 } },
            "cat": { "preds": { "cat": 1.0 } } }
        })";
        const KnowledgeBase kb = load_kb(text);
        const auto diags = validate(kb);
        bool poe_warning = false, unreachable_warning = false;
        for (const auto& d : diags) {
            poe_warning = poe_warning || d.message.find("product of experts infeasible") != std::string::npos;
            unreachable_warning = unreachable_warning || d.message.find("unreachable concept 'cat'") != std::string::npos;
        }
        CHECK(poe_warning);
        CHECK(unreachable_warning);
    }
    SUBCASE("unreachable concept warning names the concept") {
        std::string text = slurp(test::kb_path("sleep.kb.json"));
        // drop dodo from the scenario and spread its mass onto sleep
        auto kb = load_kb(text);
        kb.scenarios.at("everyday").concept_dist.erase("dodo");
        kb.scenarios.at("everyday").concept_dist.at("sleep") = 0.25;
        kb.finalize();
        bool found = false;
        for (const auto& d : validate(kb)) {
            found = found || d.message.find("unreachable concept 'dodo'") != std::string::npos;
        }
        CHECK(found);
    }
    SUBCASE("the leave KB warns where agents are ungenerable, as constructed") {
        const KnowledgeBase kb = load_kb_file(test::kb_path("leave.kb.json"));
        int poe_warnings = 0;
        for (const auto& d : validate(kb)) {
            CHECK(d.severity == Diagnostic::Severity::kWarning);
            poe_warnings += d.message.find("product of experts infeasible") != std::string::npos;
        }
        CHECK(poe_warnings == 2);  // Agent of leave1 in s-leave1, Agent of leave5 in s-leave5
    }
}

TEST_CASE("tree count distribution forms") {
    SUBCASE("uniform keyword") {
        const char* text = R"({ "max_trees": 3, "tree_count_dist": "uniform",
          "scenarios": { "s": { "c": 1.0 } },
          "concepts": { "c": { "preds": { "c": 1.0 } } } })";
        const KnowledgeBase kb = load_kb(text);
        REQUIRE(kb.idx().tree_count_probs.size() == 3);
        CHECK(kb.idx().tree_count_probs[0] == doctest::Approx(1.0 / 3));
    }
    SUBCASE("explicit weights") {
        const KnowledgeBase kb = load_kb(test::kMiniKbJson);
        REQUIRE(kb.idx().tree_count_probs.size() == 2);
        CHECK(kb.idx().tree_count_probs[0] == doctest::Approx(0.4));
        CHECK(kb.idx().tree_count_probs[1] == doctest::Approx(0.6));
    }
    SUBCASE("length mismatch is an error") {
        const char* text = R"({ "max_trees": 2, "tree_count_dist": [1.0],
          "scenarios": { "s": { "c": 1.0 } },
          "concepts": { "c": { "preds": { "c": 1.0 } } } })";
        CHECK_THROWS_AS(load_kb(text), KbError);
    }
}
