#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sds/errors.hpp"
#include "sds/report.hpp"

#ifndef SDS_KB_DIR
#define SDS_KB_DIR "kbs"
#endif

namespace {

int dispatch(int argc, char** argv) {
    CLI::App app{"situation description engine: probabilistic utterance interpretation"};
    app.require_subcommand(1);

    // validate
    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "check a knowledge base file");
    validate_cmd->add_option("kb", validate_path, "knowledge base JSON file")->required();

    // interpret
    sds::RunConfig cfg;
    std::string mode = "rejection";
    std::vector<std::string> query_texts;
    auto* interpret_cmd = app.add_subcommand("interpret", "condition the model on an utterance");
    interpret_cmd->add_option("--kb", cfg.kb_path, "knowledge base JSON file")->required();
    interpret_cmd->add_option("--drs", cfg.drs_text, "utterance as eDRS text");
    interpret_cmd->add_option("--sentence", cfg.sentence, "utterance as a fragment sentence");
    interpret_cmd->add_option("--mode", mode, "rejection | exact")->default_val("rejection");
    interpret_cmd->add_option("--samples", cfg.samples, "accepted samples to collect")->default_val(2000);
    interpret_cmd->add_option("--seed", cfg.seed, "random seed")->default_val(42);
    interpret_cmd->add_option("--workers", cfg.workers, "parallel sampling streams")->default_val(1);
    double alpha_override = 0.0;
    auto* alpha_opt = interpret_cmd->add_option("--alpha-override", alpha_override,
                                                "replace the KB's Dirichlet concentration");
    interpret_cmd->add_option("--query", query_texts,
                              "query: sense:REF | role:REF,ROLE | entail:REF,PRED | topk:K");
    interpret_cmd->add_option("--format", cfg.format, "json | tsv")->default_val("json");
    interpret_cmd->add_option("--top", cfg.top, "situation descriptions listed")->default_val(5);
    interpret_cmd->add_option("--max-attempts", cfg.max_attempts, "rejection attempt budget")
        ->default_val(10'000'000);

    // reproduce
    std::string table_id;
    std::string kb_dir = SDS_KB_DIR;
    std::uint64_t rep_seed = 42;
    auto* reproduce_cmd = app.add_subcommand("reproduce", "re-derive a published results table");
    reproduce_cmd->add_option("table", table_id, "player_bat | leave | vampire_eating | astronomer")
        ->required();
    reproduce_cmd->add_option("--kb-dir", kb_dir, "directory holding the bundled KB files");
    reproduce_cmd->add_option("--seed", rep_seed, "random seed")->default_val(42);

    // sample
    std::string sample_kb;
    int sample_n = 5;
    std::uint64_t sample_seed = 42;
    auto* sample_cmd = app.add_subcommand("sample", "unconditioned situation descriptions");
    sample_cmd->add_option("--kb", sample_kb, "knowledge base JSON file")->required();
    sample_cmd->add_option("--n", sample_n, "number of samples")->default_val(5);
    sample_cmd->add_option("--seed", sample_seed, "random seed")->default_val(42);

    CLI11_PARSE(app, argc, argv);

    if (validate_cmd->parsed()) {
        return sds::run_validate(validate_path, std::cout);
    }
    if (interpret_cmd->parsed()) {
        cfg.exact = mode == "exact";
        if (!cfg.exact && mode != "rejection") {
            std::cerr << "error: unknown mode '" << mode << "'\n";
            return 1;
        }
        if (alpha_opt->count() > 0) cfg.alpha_override = alpha_override;
        for (const auto& q : query_texts) cfg.queries.push_back(sds::parse_query_spec(q));
        std::cout << sds::run_interpret(cfg);
        return 0;
    }
    if (reproduce_cmd->parsed()) {
        const auto result = sds::reproduce_table(table_id, kb_dir, rep_seed);
        std::cout << sds::render_table(result);
        return result.pass ? 0 : 1;
    }
    if (sample_cmd->parsed()) {
        sds::run_sample(sample_kb, sample_n, sample_seed, std::cout);
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const sds::StarvationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const sds::FileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sds::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
