#include "sds/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "sds/errors.hpp"

namespace sds {

namespace {

using json = nlohmann::ordered_json;

std::string query_to_text(const QuerySpec& q) {
    switch (q.kind) {
        case QuerySpec::Kind::kSense:
            return "sense:" + q.referent;
        case QuerySpec::Kind::kRole:
            return "role:" + q.referent + "," + q.arg;
        case QuerySpec::Kind::kEntail:
            return "entail:" + q.referent + "," + q.arg;
        case QuerySpec::Kind::kTopK:
            return "topk:" + std::to_string(q.k);
    }
    return "";
}

json sd_to_json(const PosteriorEntry& e) {
    json out;
    out["weight"] = e.weight;
    out["graph"] = graph_text(e.sd.graph);
    out["drs"] = edrs_text(e.sd.drs);
    return out;
}

json categorical_to_json(const Categorical& c) {
    json out = json::object();
    for (std::size_t i = 0; i < c.outcomes.size(); ++i) out[c.outcomes[i]] = c.probs[i];
    return out;
}

}  // namespace

QuerySpec parse_query_spec(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw Error("bad query '" + text + "': expected KIND:ARG");
    }
    const std::string kind = text.substr(0, colon);
    const std::string rest = text.substr(colon + 1);
    QuerySpec q;
    if (kind == "sense") {
        q.kind = QuerySpec::Kind::kSense;
        q.referent = rest;
        if (q.referent.empty()) throw Error("bad query '" + text + "': missing referent");
    } else if (kind == "role" || kind == "entail") {
        q.kind = kind == "role" ? QuerySpec::Kind::kRole : QuerySpec::Kind::kEntail;
        auto sep = rest.find(',');
        if (sep == std::string::npos) sep = rest.find(':');
        if (sep == std::string::npos) {
            throw Error("bad query '" + text + "': expected " + kind + ":REF," +
                        (kind == "role" ? "ROLE" : "PRED"));
        }
        q.referent = rest.substr(0, sep);
        q.arg = rest.substr(sep + 1);
        if (q.referent.empty() || q.arg.empty()) throw Error("bad query '" + text + "'");
    } else if (kind == "topk") {
        q.kind = QuerySpec::Kind::kTopK;
        try {
            q.k = std::stoi(rest);
        } catch (const std::exception&) {
            throw Error("bad query '" + text + "': expected topk:K");
        }
        if (q.k < 1) throw Error("bad query '" + text + "': k must be at least 1");
    } else {
        throw Error("bad query '" + text + "': unknown kind '" + kind + "'");
    }
    return q;
}

std::string run_interpret(const RunConfig& cfg) {
    if (cfg.drs_text.empty() == cfg.sentence.empty()) {
        throw Error("interpret needs exactly one utterance source (--drs or --sentence)");
    }
    KnowledgeBase kb = load_kb_file(cfg.kb_path);
    if (cfg.alpha_override) {
        kb.alpha = *cfg.alpha_override;
        kb.finalize();
    }
    const Edrs utterance =
        cfg.sentence.empty() ? parse_edrs(cfg.drs_text) : sentence_to_edrs(cfg.sentence, kb);

    Posterior post;
    if (cfg.exact) {
        post = exact_posterior(kb, utterance);
    } else {
        RejectionConfig rc;
        rc.samples = cfg.samples;
        rc.seed = cfg.seed;
        rc.workers = cfg.workers;
        rc.max_attempts = cfg.max_attempts;
        post = rejection_infer(kb, utterance, rc);
    }

    json out;
    out["kb"] = cfg.kb_path;
    out["alpha"] = kb.alpha;
    out["utterance"] = json::object();
    out["utterance"]["source"] = cfg.sentence.empty() ? "drs" : "sentence";
    out["utterance"]["text"] = cfg.sentence.empty() ? cfg.drs_text : cfg.sentence;
    out["utterance"]["drs"] = edrs_text(utterance);
    out["mode"] = cfg.exact ? "exact" : "rejection";
    if (!cfg.exact) {
        out["seed"] = cfg.seed;
        out["samples_requested"] = cfg.samples;
        out["workers"] = cfg.workers;
        out["acceptance"] = json::object();
        out["acceptance"]["attempts"] = post.stats.attempts;
        out["acceptance"]["accepted"] = post.stats.accepted;
        out["acceptance"]["poe_aborts"] = post.stats.poe_aborts;
    }

    out["queries"] = json::array();
    for (const auto& q : cfg.queries) {
        json qj;
        qj["query"] = query_to_text(q);
        switch (q.kind) {
            case QuerySpec::Kind::kSense: {
                qj["marginal"] = categorical_to_json(query_sense(post, q.referent));
                break;
            }
            case QuerySpec::Kind::kRole: {
                const auto rm = query_role(post, q.referent, q.arg);
                qj["realization"] = rm.realization;
                qj["fillers"] = categorical_to_json(rm.fillers);
                break;
            }
            case QuerySpec::Kind::kEntail: {
                qj["probability"] = query_entailment(post, q.referent, q.arg);
                break;
            }
            case QuerySpec::Kind::kTopK: {
                qj["results"] = json::array();
                for (const auto& e : top_k(post, static_cast<std::size_t>(q.k))) {
                    qj["results"].push_back(sd_to_json(e));
                }
                break;
            }
        }
        out["queries"].push_back(std::move(qj));
    }

    out["support_size"] = post.support.size();
    out["top"] = json::array();
    for (const auto& e : top_k(post, static_cast<std::size_t>(cfg.top))) {
        out["top"].push_back(sd_to_json(e));
    }

    if (cfg.format == "json") return out.dump(2) + "\n";
    if (cfg.format != "tsv") throw Error("unknown output format '" + cfg.format + "'");

    // tsv: one line per fact
    std::ostringstream os;
    os << "mode\t" << out["mode"].get<std::string>() << "\n";
    os << "utterance\t" << out["utterance"]["drs"].get<std::string>() << "\n";
    if (!cfg.exact) {
        os << "accepted\t" << post.stats.accepted << "\t" << post.stats.attempts << " attempts\n";
    }
    for (const auto& qj : out["queries"]) {
        const std::string name = qj["query"].get<std::string>();
        if (qj.contains("marginal")) {
            for (const auto& [label, v] : qj["marginal"].items()) {
                os << name << "\t" << label << "\t" << v.dump() << "\n";
            }
        } else if (qj.contains("realization")) {
            os << name << "\trealization\t" << qj["realization"].dump() << "\n";
            for (const auto& [label, v] : qj["fillers"].items()) {
                os << name << "\t" << label << "\t" << v.dump() << "\n";
            }
        } else if (qj.contains("probability")) {
            os << name << "\t" << qj["probability"].dump() << "\n";
        } else {
            int rank = 0;
            for (const auto& r : qj["results"]) {
                os << name << "\t" << ++rank << "\t" << r["weight"].dump() << "\t"
                   << r["graph"].get<std::string>() << "\t" << r["drs"].get<std::string>() << "\n";
            }
        }
    }
    int rank = 0;
    for (const auto& r : out["top"]) {
        os << "top\t" << ++rank << "\t" << r["weight"].dump() << "\t" << r["graph"].get<std::string>()
           << "\t" << r["drs"].get<std::string>() << "\n";
    }
    return os.str();
}

int run_validate(const std::string& kb_path, std::ostream& out) {
    KnowledgeBase kb;
    try {
        kb = load_kb_file(kb_path);
    } catch (const FileError&) {
        throw;
    } catch (const Error& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    }
    const auto diags = validate(kb);
    bool errors = false;
    for (const auto& d : diags) {
        const bool err = d.severity == Diagnostic::Severity::kError;
        errors = errors || err;
        out << (err ? "error: " : "warning: ") << d.message << "\n";
    }
    out << kb_path << ": " << kb.concepts.size() << " concepts, " << kb.scenarios.size()
        << " scenarios, " << (errors ? "INVALID" : "ok") << "\n";
    return errors ? 1 : 0;
}

void run_sample(const std::string& kb_path, int n, std::uint64_t seed, std::ostream& out) {
    const KnowledgeBase kb = load_kb_file(kb_path);
    RandomSource rng(seed);
    int produced = 0;
    long long aborts = 0;
    while (produced < n) {
        auto res = sample_sd(kb, rng);
        if (res.status != SampleStatus::kOk) {
            ++aborts;
            if (aborts > 1'000'000) throw InferError("sampling aborts exceeded 1e6; knowledge base is infeasible");
            continue;
        }
        ++produced;
        out << "[" << produced << "] " << graph_text(res.sd.graph) << "\n    "
            << edrs_text(res.sd.drs) << "\n";
    }
    if (aborts > 0) out << "(" << aborts << " infeasible draws aborted)\n";
}

// ---------------------------------------------------------------------------
// published tables
// ---------------------------------------------------------------------------

namespace {

constexpr long long kTableSamples = 2000;

double four_sigma(double v, long long n) {
    return 4.0 * std::sqrt(std::max(v * (1.0 - v), 0.0) / static_cast<double>(n));
}

struct TableBuilder {
    TableResult result;
    void add(const std::string& row, const std::string& col, double published, double exact_v,
             double sampled, double tol_published, double tol_sample) {
        CellResult c;
        c.row = row;
        c.col = col;
        c.published = published;
        c.exact_value = exact_v;
        c.sampled = sampled;
        c.published_tolerance = tol_published;
        c.sample_tolerance = std::max(tol_sample, 1e-9);
        c.pass = std::abs(published - exact_v) <= tol_published && std::abs(sampled - exact_v) <= c.sample_tolerance;
        result.cells.push_back(std::move(c));
    }
    TableResult finish(const std::string& id) {
        result.id = id;
        result.pass = std::all_of(result.cells.begin(), result.cells.end(),
                                  [](const CellResult& c) { return c.pass; });
        return std::move(result);
    }
};

double sense_prob(const Posterior& p, const std::string& ref, const std::string& concept_label) {
    return query_sense(p, ref).prob_of(concept_label);
}

// the vampire-eating SD with the given fillers; weight 0 when absent
double sd_weight(const Posterior& p, const std::map<std::string, std::string>& role_fillers) {
    for (const auto& e : p.support) {
        if (e.sd.graph.trees.size() != 1) continue;
        const auto& tree = e.sd.graph.trees.front();
        if (tree.realized.size() != role_fillers.size()) continue;
        bool match = true;
        for (const auto& rt : tree.realized) {
            auto it = role_fillers.find(rt.role);
            if (it == role_fillers.end() || it->second != rt.filler.concept_name) {
                match = false;
                break;
            }
        }
        if (match) return e.weight;
    }
    return 0.0;
}

}  // namespace

const std::vector<std::string>& reproduce_table_ids() {
    static const std::vector<std::string> ids = {"player_bat", "leave", "vampire_eating", "astronomer"};
    return ids;
}

TableResult reproduce_table(const std::string& table_id, const std::string& kb_dir, std::uint64_t seed) {
    TableBuilder tb;
    auto path = [&](const char* f) { return kb_dir + "/" + f; };

    if (table_id == "player_bat") {
        struct Row {
            const char* name;
            const char* file;
            double alpha;
            double published_stick;
            bool fixed_tol;  // criterion pins 0.03 around the exact value
        };
        const Row rows[] = {
            {"one scenario", "player_bat_1scen.kb.json", 0.5, 0.501, true},
            {"two scenarios, alpha=0.5", "player_bat_2scen.kb.json", 0.5, 0.752, false},
            {"two scenarios, alpha=0.1", "player_bat_2scen.kb.json", 0.1, 0.926, false},
        };
        for (const auto& row : rows) {
            KnowledgeBase kb = load_kb_file(path(row.file));
            kb.alpha = row.alpha;
            kb.finalize();
            const Edrs utt = sentence_to_edrs("a player was holding a bat", kb);
            const Posterior ex = exact_posterior(kb, utt);
            const Posterior rj = rejection_infer(kb, utt, kTableSamples, seed);
            for (const auto& [col, published] :
                 std::vector<std::pair<std::string, double>>{{"bat_stick", row.published_stick},
                                                             {"bat_animal", 1.0 - row.published_stick}}) {
                const double v = sense_prob(ex, "y", col);
                const double s = sense_prob(rj, "y", col);
                tb.add(row.name, col, published, v, s, 0.03,
                       row.fixed_tol ? 0.03 : four_sigma(v, kTableSamples));
            }
        }
        return tb.finish(table_id);
    }

    if (table_id == "astronomer") {
        struct Row {
            const char* name;
            double alpha;
            double published_sun;
        };
        const Row rows[] = {{"alpha=0.5", 0.5, 0.200}, {"alpha=0.1", 0.1, 0.471}};
        for (const auto& row : rows) {
            KnowledgeBase kb = load_kb_file(path("astronomer.kb.json"));
            kb.alpha = row.alpha;
            kb.finalize();
            const Edrs utt = sentence_to_edrs("an astronomer married a star", kb);
            const Posterior ex = exact_posterior(kb, utt);
            const Posterior rj = rejection_infer(kb, utt, kTableSamples, seed);
            for (const auto& [col, published] :
                 std::vector<std::pair<std::string, double>>{{"star_sun", row.published_sun},
                                                             {"star_person", 1.0 - row.published_sun}}) {
                const double v = sense_prob(ex, "y", col);
                const double s = sense_prob(rj, "y", col);
                tb.add(row.name, col, published, v, s, 0.03, four_sigma(v, kTableSamples));
            }
        }
        return tb.finish(table_id);
    }

    if (table_id == "vampire_eating") {
        KnowledgeBase kb = load_kb_file(path("vampire_eat.kb.json"));
        const Edrs utt = sentence_to_edrs("a vampire was eating", kb);
        const Posterior ex = exact_posterior(kb, utt);
        const Posterior rj = rejection_infer(kb, utt, kTableSamples, seed);

        const struct {
            const char* role;
            double published_realization;
        } roles[] = {{"Theme", 1.0}, {"Location", 0.21}};
        const std::vector<std::pair<std::string, std::pair<double, double>>> fillers = {
            // concept -> (published Theme cell, published Location cell); cells are P(filler and realized)
            {"vampire", {0.004, 0.004}},
            {"bat_animal", {0.004, 0.004}},
            {"blood_orange", {0.337, 0.003}},
            {"steak", {0.319, 0.003}},
            {"salad", {0.338, 0.003}},
            {"castle", {0.0, 0.1}},
            {"beach", {0.0, 0.094}},
        };
        for (int ri = 0; ri < 2; ++ri) {
            const auto rm_ex = query_role(ex, "e", roles[ri].role);
            const auto rm_rj = query_role(rj, "e", roles[ri].role);
            tb.add("prob. of realization", roles[ri].role, roles[ri].published_realization,
                   rm_ex.realization, rm_rj.realization, 0.02,
                   four_sigma(rm_ex.realization, kTableSamples));
            for (const auto& [concept_label, cells] : fillers) {
                const double published = ri == 0 ? cells.first : cells.second;
                const double v = rm_ex.realization * rm_ex.fillers.prob_of(concept_label);
                const double s = rm_rj.realization * rm_rj.fillers.prob_of(concept_label);
                tb.add(concept_label, roles[ri].role, published, v, s, 0.02, four_sigma(v, kTableSamples));
            }
        }
        // the vampire-eats-a-blood-orange-at-a-beach reading
        const std::map<std::string, std::string> target = {
            {"Agent", "vampire"}, {"Theme", "blood_orange"}, {"Location", "beach"}};
        const double v = sd_weight(ex, target);
        const double s = sd_weight(rj, target);
        tb.add("vampire eating a blood orange at a beach", "weight", 0.031, v, s, 0.01,
               four_sigma(v, kTableSamples));
        return tb.finish(table_id);
    }

    if (table_id == "leave") {
        const struct {
            const char* noun;
            double published[4];  // leave1, leave2, leave5, leave8
        } rows[] = {
            {"room", {0.145, 0.0, 0.856, 0.0}},
            {"house", {0.599, 0.0, 0.401, 0.0}},
            {"country", {1.0, 0.0, 0.0, 0.0}},
            {"job", {0.0, 0.382, 0.0, 0.618}},
            {"friend", {0.0, 0.883, 0.0, 0.117}},
        };
        const char* senses[] = {"leave1", "leave2", "leave5", "leave8"};
        KnowledgeBase kb = load_kb_file(path("leave.kb.json"));
        for (const auto& row : rows) {
            const Edrs utt = sentence_to_edrs(std::string("a woman left a ") + row.noun, kb);
            const Posterior ex = exact_posterior(kb, utt);
            const Posterior rj = rejection_infer(kb, utt, kTableSamples, seed);
            for (int c = 0; c < 4; ++c) {
                const double v = sense_prob(ex, "e", senses[c]);
                const double s = sense_prob(rj, "e", senses[c]);
                tb.add(row.noun, senses[c], row.published[c], v, s, 0.05, four_sigma(v, kTableSamples));
            }
        }
        return tb.finish(table_id);
    }

    throw Error("unknown table id '" + table_id + "' (expected one of: player_bat, leave, vampire_eating, astronomer)");
}

std::string render_table(const TableResult& t) {
    std::ostringstream os;
    os << "table " << t.id << "\n";
    os << std::left << std::setw(44) << "row" << std::setw(14) << "col" << std::right
       << std::setw(10) << "published" << std::setw(10) << "exact" << std::setw(10) << "sampled"
       << std::setw(8) << "tol_p" << std::setw(8) << "tol_s"
       << "  status\n";
    os << std::string(110, '-') << "\n";
    for (const auto& c : t.cells) {
        os << std::left << std::setw(44) << c.row << std::setw(14) << c.col << std::right
           << std::fixed << std::setprecision(3) << std::setw(10) << c.published << std::setprecision(5)
           << std::setw(10) << c.exact_value << std::setw(10) << c.sampled << std::setprecision(3)
           << std::setw(8) << c.published_tolerance << std::setw(8) << c.sample_tolerance
           << (c.pass ? "  PASS" : "  FAIL") << "\n";
    }
    os << "RESULT: " << (t.pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

}  // namespace sds
