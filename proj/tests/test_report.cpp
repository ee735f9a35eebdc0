#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sds/errors.hpp"
#include "sds/report.hpp"
#include "test_support.hpp"

using namespace sds;

namespace {

RunConfig sleep_config() {
    RunConfig cfg;
    cfg.kb_path = test::kb_path("sleep_features.kb.json");
    cfg.sentence = "a bat was sleeping";
    cfg.samples = 300;
    cfg.seed = 42;
    cfg.queries = {parse_query_spec("sense:x"), parse_query_spec("entail:x,is_black"),
                   parse_query_spec("topk:3")};
    return cfg;
}

}  // namespace

TEST_CASE("query spec parsing") {
    auto q = parse_query_spec("sense:y");
    CHECK(q.kind == QuerySpec::Kind::kSense);
    CHECK(q.referent == "y");

    q = parse_query_spec("role:e,Location");
    CHECK(q.kind == QuerySpec::Kind::kRole);
    CHECK(q.referent == "e");
    CHECK(q.arg == "Location");

    q = parse_query_spec("entail:x,flies");
    CHECK(q.kind == QuerySpec::Kind::kEntail);

    q = parse_query_spec("topk:7");
    CHECK(q.k == 7);

    CHECK_THROWS_AS(parse_query_spec("sense"), Error);
    CHECK_THROWS_AS(parse_query_spec("role:e"), Error);
    CHECK_THROWS_AS(parse_query_spec("topk:x"), Error);
    CHECK_THROWS_AS(parse_query_spec("nonsense:x"), Error);
}

TEST_CASE("interpret output is byte-identical across runs") {
    const RunConfig cfg = sleep_config();
    CHECK(run_interpret(cfg) == run_interpret(cfg));

    RunConfig workers = cfg;
    workers.workers = 2;
    CHECK(run_interpret(workers) == run_interpret(workers));

    RunConfig exact = cfg;
    exact.exact = true;
    CHECK(run_interpret(exact) == run_interpret(exact));
}

TEST_CASE("interpret reports acceptance statistics and answers") {
    auto parsed = nlohmann::json::parse(run_interpret(sleep_config()));
    CHECK(parsed["mode"] == "rejection");
    CHECK(parsed["acceptance"]["accepted"] == 300);
    CHECK(parsed["acceptance"]["attempts"].get<long long>() >= 300);
    CHECK(parsed["utterance"]["drs"] == "drs([e,x],[Theme(e,x),bat(x),sleep(e)])");
    CHECK(parsed["queries"][0]["marginal"]["bat_animal"].get<double>() == doctest::Approx(1.0));
    const double black = parsed["queries"][1]["probability"].get<double>();
    CHECK(black == doctest::Approx(0.75).epsilon(0.15));
    CHECK(parsed["queries"][2]["results"].size() <= 3);

    RunConfig tsv = sleep_config();
    tsv.format = "tsv";
    const std::string text = run_interpret(tsv);
    CHECK(text.find("sense:x\tbat_animal\t") != std::string::npos);
}

TEST_CASE("interpret error paths") {
    RunConfig cfg = sleep_config();
    cfg.sentence = "a zorp was sleeping";
    CHECK_THROWS_WITH_AS(run_interpret(cfg), doctest::Contains("unknown word: zorp"), ParseError);

    RunConfig both = sleep_config();
    both.drs_text = "drs([x],[])";
    CHECK_THROWS_AS(run_interpret(both), Error);

    RunConfig alpha = sleep_config();
    alpha.alpha_override = 0.1;
    CHECK(nlohmann::json::parse(run_interpret(alpha))["alpha"].get<double>() == doctest::Approx(0.1));
}

TEST_CASE("validate command exit codes") {
    std::ostringstream out;
    CHECK(run_validate(test::kb_path("sleep.kb.json"), out) == 0);
    CHECK(out.str().find("ok") != std::string::npos);

    // a KB with a bad sum fails with a diagnostic line
    const std::string bad_path = "/tmp/sds_bad_kb.json";
    {
        std::ofstream f(bad_path);
        f << R"({ "scenarios": { "baseball": { "hold": 0.9 } },
                  "concepts": { "hold": { "preds": { "hold": 1.0 } } } })";
    }
    std::ostringstream out2;
    CHECK(run_validate(bad_path, out2) == 1);
    CHECK(out2.str().find("sums to 0.9") != std::string::npos);

    CHECK_THROWS_AS(run_validate("/nonexistent/kb.json", out), FileError);
}

TEST_CASE("golden interpret outputs") {
    // regression fixtures: structure must match exactly, numbers to 1e-9
    const struct {
        const char* golden;
        RunConfig cfg;
    } cases[] = {
        {"golden/interpret_sleep_rejection.json",
         [] {
             RunConfig c;
             c.kb_path = test::kb_path("sleep_features.kb.json");
             c.sentence = "a bat was sleeping";
             c.samples = 300;
             c.seed = 42;
             c.queries = {parse_query_spec("sense:x"), parse_query_spec("entail:x,is_black")};
             return c;
         }()},
        {"golden/interpret_player_bat_exact.json",
         [] {
             RunConfig c;
             c.kb_path = test::kb_path("player_bat_2scen.kb.json");
             c.sentence = "a player was holding a bat";
             c.exact = true;
             c.queries = {parse_query_spec("sense:y")};
             return c;
         }()},
    };
    for (const auto& tc : cases) {
        std::ifstream f(std::string(SDS_TEST_DIR) + "/" + tc.golden);
        REQUIRE_MESSAGE(f.good(), tc.golden);
        nlohmann::json expected = nlohmann::json::parse(f);
        // the stored kb path is machine-specific; compare against the current one
        nlohmann::json actual = nlohmann::json::parse(run_interpret(tc.cfg));
        expected["kb"] = actual["kb"];

        std::function<void(const nlohmann::json&, const nlohmann::json&, std::string)> compare =
            [&](const nlohmann::json& a, const nlohmann::json& b, std::string at) {
                REQUIRE_MESSAGE(a.type() == b.type(), at);
                if (a.is_object()) {
                    REQUIRE_MESSAGE(a.size() == b.size(), at);
                    for (const auto& [k, v] : a.items()) {
                        const std::string here = at + "/" + k;
                        REQUIRE_MESSAGE(b.contains(k), here);
                        compare(v, b[k], here);
                    }
                } else if (a.is_array()) {
                    REQUIRE_MESSAGE(a.size() == b.size(), at);
                    for (std::size_t i = 0; i < a.size(); ++i) {
                        compare(a[i], b[i], at + "[" + std::to_string(i) + "]");
                    }
                } else if (a.is_number_float()) {
                    CHECK_MESSAGE(std::abs(a.get<double>() - b.get<double>()) <= 1e-9, at);
                } else {
                    CHECK_MESSAGE(a == b, at);
                }
            };
        compare(expected, actual, tc.golden);
    }
}

TEST_CASE("reproduce tables pass their tolerances") {
    for (const auto& id : reproduce_table_ids()) {
        const TableResult t = reproduce_table(id, SDS_KB_DIR, 42);
        INFO(render_table(t));
        CHECK(t.pass);
    }
    CHECK_THROWS_AS(reproduce_table("no_such_table", SDS_KB_DIR, 42), Error);
}
