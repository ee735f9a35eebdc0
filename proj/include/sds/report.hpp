#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sds/infer.hpp"

namespace sds {

struct QuerySpec {
    enum class Kind { kSense, kRole, kEntail, kTopK };
    Kind kind = Kind::kSense;
    std::string referent;
    std::string arg;  // role name (role) or predicate (entail)
    int k = 5;        // topk
};

/// Parses "sense:x", "role:e,Location", "entail:x,flies", "topk:5".
QuerySpec parse_query_spec(const std::string& text);

struct RunConfig {
    std::string kb_path;
    std::string drs_text;   // exactly one of drs_text / sentence is set
    std::string sentence;
    bool exact = false;
    long long samples = 2000;
    std::uint64_t seed = 42;
    int workers = 1;
    std::optional<double> alpha_override;
    std::vector<QuerySpec> queries;
    std::string format = "json";  // "json" | "tsv"
    long long max_attempts = 10'000'000;
    int top = 5;  // SDs listed in the report
};

/// Full interpret pipeline: load KB, build the utterance, run inference,
/// answer queries, render. Deterministic: identical config gives
/// byte-identical output. Throws on any failure.
std::string run_interpret(const RunConfig& cfg);

/// Prints diagnostics; returns 0 when there are no errors (warnings allowed),
/// 1 otherwise. Throws only if the file cannot be read.
int run_validate(const std::string& kb_path, std::ostream& out);

/// Prints n unconditioned samples from the generative story.
void run_sample(const std::string& kb_path, int n, std::uint64_t seed, std::ostream& out);

struct CellResult {
    std::string row;
    std::string col;
    double published = 0.0;
    double exact_value = 0.0;
    double sampled = 0.0;
    double published_tolerance = 0.0;   // |published - exact| bound
    double sample_tolerance = 0.0;  // |sampled - exact| bound
    bool pass = false;
};

struct TableResult {
    std::string id;
    bool pass = false;
    std::vector<CellResult> cells;
};

/// Table ids: player_bat, leave, vampire_eating, astronomer. Runs both the
/// exact oracle and rejection sampling for every cell and checks tolerances.
TableResult reproduce_table(const std::string& table_id, const std::string& kb_dir, std::uint64_t seed);

std::string render_table(const TableResult& t);

const std::vector<std::string>& reproduce_table_ids();

}  // namespace sds
