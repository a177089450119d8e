#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "jaf/agents.hpp"
#include "jaf/engine.hpp"
#include "jaf/hash_forest.hpp"
#include "jaf/knowledge_graph.hpp"
#include "jaf/reporting.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Flag values; unset options fall back to the config document.
struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> cohort;
    std::optional<std::string> scheme;
    std::optional<int> k;
    std::optional<int> tmin;
    std::optional<int> tmax;
    std::optional<int> runs;
    std::optional<std::string> agent;
};

void add_common_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file");
    cmd->add_option("--seed", f.seed, "random seed (mandatory, here or in config)");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--cohort", f.cohort, "cohort JSON file");
    cmd->add_option("--scheme", f.scheme, "neighbor scheme: lsh | label-overlap | graph")
        ->check(CLI::IsMember({"lsh", "label-overlap", "graph"}));
    cmd->add_option("--k", f.k, "neighborhood size");
    cmd->add_option("--tmin", f.tmin, "per-instance minimum acceptance rounds");
    cmd->add_option("--tmax", f.tmax, "maximum refinement rounds");
    cmd->add_option("--runs", f.runs, "evaluation runs per instance");
    cmd->add_option("--agent", f.agent, "agent backend: sim | http")
        ->check(CLI::IsMember({"sim", "http"}));
}

ordered_json default_config() {
    return ordered_json{
        {"cohort", ""},
        {"out", "out"},
        {"scheme", "label-overlap"},
        {"k", 8},
        {"max_hamming_radius", 1},
        {"k_pos", 4},
        {"k_neg", 4},
        {"overlap_field", "components"},
        {"tmin", 1},
        {"tmax", 5},
        {"runs", 10},
        {"agent", "sim"},
        {"world", ""},
        {"sim",
         {{"n", 200},
          {"primary_error_rate", 0.5},
          {"judge_error_rate", 0.3},
          {"context_benefit", 0.8},
          {"refine_adoption", 1.0}}},
        {"http", {{"endpoint", ""}, {"model", "gpt-4o-mini"}, {"temperature", 0.0}}},
        {"hash",
         {{"max_bits", 8},
          {"min_bucket_size", 8},
          {"min_info_gain", 0.02},
          {"label_field", "components"}}},
        {"graph",
         {{"relations", ordered_json::array({ordered_json{{"kind", "shared-categorical"},
                                                          {"field", "components"},
                                                          {"priority", 0}}})},
          {"max_degree", 8},
          {"partition_key", nullptr}}},
    };
}

ordered_json effective_config(const Flags& f) {
    ordered_json cfg = default_config();
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw jaf::ConfigError("cannot open config file: " + f.config_path);
        ordered_json user;
        try {
            in >> user;
        } catch (const nlohmann::json::exception& e) {
            throw jaf::ParseError(std::string("malformed config JSON: ") + e.what());
        }
        cfg.merge_patch(user);
    }
    if (f.seed) cfg["seed"] = *f.seed;
    if (f.out) cfg["out"] = *f.out;
    if (f.cohort) cfg["cohort"] = *f.cohort;
    if (f.scheme) cfg["scheme"] = *f.scheme;
    if (f.k) cfg["k"] = *f.k;
    if (f.tmin) cfg["tmin"] = *f.tmin;
    if (f.tmax) cfg["tmax"] = *f.tmax;
    if (f.runs) cfg["runs"] = *f.runs;
    if (f.agent) cfg["agent"] = *f.agent;
    if (!cfg.contains("seed")) throw jaf::ConfigError("seed is mandatory (--seed or config)");
    return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw jaf::Error("cannot write " + path.string());
    out << content;
}

void write_json(const fs::path& path, const ordered_json& j) { write_file(path, j.dump(2) + "\n"); }

fs::path prepare_out(const ordered_json& cfg) {
    fs::path out = cfg.at("out").get<std::string>();
    fs::create_directories(out);
    write_json(out / "effective-config.json", cfg);
    return out;
}

jaf::SimWorld load_world(const ordered_json& cfg) {
    std::string path = cfg.at("world").get<std::string>();
    if (path.empty()) {
        path = (fs::path(cfg.at("cohort").get<std::string>()).parent_path() / "world.json").string();
    }
    std::ifstream in(path);
    if (!in) throw jaf::ConfigError("cannot open world file: " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw jaf::ParseError(std::string("malformed world JSON: ") + e.what());
    }
    jaf::SimWorld w;
    w.primary_error_rate = j.at("primary_error_rate").get<double>();
    w.judge_error_rate = j.at("judge_error_rate").get<double>();
    w.context_benefit = j.at("context_benefit").get<double>();
    w.refine_adoption = j.at("refine_adoption").get<double>();
    w.seed = j.at("seed").get<std::uint64_t>();
    for (auto it = j.at("truth").begin(); it != j.at("truth").end(); ++it) {
        w.truth[it.key()] = it.value().get<std::string>();
    }
    return w;
}

ordered_json world_to_json(const jaf::SimWorld& w) {
    ordered_json truth = ordered_json::object();
    for (const auto& [id, answer] : w.truth) truth[id] = answer;
    return ordered_json{{"primary_error_rate", w.primary_error_rate},
                        {"judge_error_rate", w.judge_error_rate},
                        {"context_benefit", w.context_benefit},
                        {"refine_adoption", w.refine_adoption},
                        {"seed", w.seed},
                        {"truth", truth}};
}

jaf::HttpAgentConfig http_config(const ordered_json& cfg) {
    jaf::HttpAgentConfig h;
    const auto& j = cfg.at("http");
    h.endpoint = j.at("endpoint").get<std::string>();
    h.model = j.at("model").get<std::string>();
    h.temperature = j.at("temperature").get<double>();
    return h;
}

std::unique_ptr<jaf::NeighborSource> make_source(const ordered_json& cfg, const fs::path& out) {
    std::string scheme = cfg.at("scheme").get<std::string>();
    jaf::SamplerConfig sc;
    sc.k = cfg.at("k").get<int>();
    if (sc.k == 0) return std::make_unique<jaf::IsolatedSource>();
    if (scheme == "label-overlap") {
        sc.scheme = jaf::SamplerConfig::Scheme::LabelOverlap;
        sc.k_pos = cfg.at("k_pos").get<int>();
        sc.k_neg = cfg.at("k_neg").get<int>();
        sc.overlap_field = cfg.at("overlap_field").get<std::string>();
        return std::make_unique<jaf::LabelOverlapSource>(sc);
    }
    if (scheme == "lsh") {
        sc.scheme = jaf::SamplerConfig::Scheme::Lsh;
        sc.max_hamming_radius = cfg.at("max_hamming_radius").get<int>();
        fs::path forest_path = out / "forest.json";
        std::ifstream in(forest_path);
        if (!in) {
            throw jaf::ConfigError("lsh scheme requires a trained forest at " +
                                   forest_path.string() + " (run `hash train` first)");
        }
        ordered_json j;
        in >> j;
        return std::make_unique<jaf::LshSource>(jaf::HashForest::from_json(j), sc);
    }
    // graph
    fs::path graph_path = out / "graph.json";
    std::ifstream in(graph_path);
    if (!in) {
        throw jaf::ConfigError("graph scheme requires a built graph at " + graph_path.string() +
                               " (run `graph build` first)");
    }
    ordered_json j;
    in >> j;
    return std::make_unique<jaf::GraphSource>(jaf::graph_from_json(j), sc.k);
}

int cmd_simulate(const Flags& f) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    const auto& sim = cfg.at("sim");
    auto [cohort, world] = jaf::make_sim_cohort(
        sim.at("n").get<int>(), sim.at("primary_error_rate").get<double>(),
        sim.at("judge_error_rate").get<double>(), sim.at("context_benefit").get<double>(),
        sim.at("refine_adoption").get<double>(), cfg.at("seed").get<std::uint64_t>());
    jaf::save_cohort(cohort, out / "cohort.json");
    write_json(out / "world.json", world_to_json(world));
    std::cout << "wrote " << (out / "cohort.json").string() << " (" << cohort.size()
              << " instances)\n";
    return 0;
}

int cmd_hash_train(const Flags& f) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    jaf::Cohort cohort = jaf::load_cohort(cfg.at("cohort").get<std::string>());
    jaf::CohortFeatures features = jaf::features_of(cohort);

    const auto& h = cfg.at("hash");
    std::string label_field = h.at("label_field").get<std::string>();
    std::vector<std::string> labels;
    for (const auto& inst : cohort.instances) {
        labels.push_back(jaf::side_value(inst, label_field));
    }
    jaf::GrowthConfig growth;
    growth.max_bits = h.at("max_bits").get<int>();
    growth.min_bucket_size = h.at("min_bucket_size").get<int>();
    growth.min_info_gain = h.at("min_info_gain").get<double>();
    jaf::Rng rng(jaf::derive_stream(cfg.at("seed").get<std::uint64_t>(), "hash-train"));
    jaf::HashForest forest = jaf::grow_forest(features, labels, growth, rng);
    write_json(out / "forest.json", forest.to_json());

    auto codes = jaf::assign_codes(forest, features);
    ordered_json metrics;
    if (!forest.predicates.empty()) {
        jaf::CodeMetrics m = jaf::code_information_metrics(codes, labels);
        metrics = {{"bits", forest.size()},
                   {"bit_entropies", m.bit_entropies},
                   {"joint_entropy", m.joint_entropy},
                   {"total_correlation", m.total_correlation},
                   {"cond_entropy_given_labels", m.cond_entropy_given_labels},
                   {"mutual_info", m.mutual_info}};
    } else {
        metrics = {{"bits", 0}};
    }
    write_json(out / "hash-metrics.json", metrics);
    std::cout << "trained " << forest.size() << " predicates\n";
    return 0;
}

int cmd_graph_build(const Flags& f) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    jaf::Cohort cohort = jaf::load_cohort(cfg.at("cohort").get<std::string>());

    const auto& g = cfg.at("graph");
    std::vector<jaf::RelationSpec> relations;
    for (const auto& jr : g.at("relations")) {
        jaf::RelationSpec r;
        std::string kind = jr.at("kind").get<std::string>();
        if (kind == "shared-categorical") {
            r.kind = jaf::RelationSpec::Kind::SharedCategorical;
            r.field = jr.at("field").get<std::string>();
        } else if (kind == "knn-embedding") {
            r.kind = jaf::RelationSpec::Kind::KnnEmbedding;
            r.k = jr.at("k").get<int>();
        } else if (kind == "metadata-equal") {
            r.kind = jaf::RelationSpec::Kind::MetadataEqual;
            r.field = jr.at("key").get<std::string>();
        } else {
            throw jaf::ConfigError("unknown relation kind: " + kind);
        }
        if (jr.contains("priority")) r.weight_priority = jr.at("priority").get<int>();
        relations.push_back(std::move(r));
    }
    jaf::PruneConfig prune;
    prune.max_degree = g.at("max_degree").get<int>();
    if (!g.at("partition_key").is_null()) {
        prune.partition_key = g.at("partition_key").get<std::string>();
    }
    jaf::KnowledgeGraph graph = jaf::build_graph(cohort, relations, prune);
    write_json(out / "graph.json", jaf::graph_to_json(graph));
    std::cout << "built graph over " << graph.n << " nodes\n";
    return 0;
}

int cmd_refine(const Flags& f) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    jaf::Cohort cohort = jaf::load_cohort(cfg.at("cohort").get<std::string>());
    auto source = make_source(cfg, out);

    std::unique_ptr<jaf::Judge> judge;
    std::unique_ptr<jaf::PrimaryAgent> primary;
    jaf::RefinementConfig rc;
    rc.t_min = cfg.at("tmin").get<int>();
    rc.t_max = cfg.at("tmax").get<int>();
    rc.seed = cfg.at("seed").get<std::uint64_t>();
    if (cfg.at("agent") == "sim") {
        jaf::SimWorld world = load_world(cfg);
        judge = std::make_unique<jaf::SimulatedJudge>(world);
        primary = std::make_unique<jaf::SimulatedPrimary>(world);
        rc.refresh_side_info = jaf::refresh_sim_side_info;
    } else {
        jaf::HttpAgentConfig h = http_config(cfg);
        judge = std::make_unique<jaf::HttpJudge>(h);
        primary = std::make_unique<jaf::HttpPrimary>(h);
    }

    jaf::RefinementTrace trace = jaf::run_refinement(cohort, *primary, *judge, *source, rc);
    write_json(out / "trace.json", jaf::trace_to_json(trace));
    write_file(out / "verdicts.jsonl", jaf::verdicts_to_jsonl(trace));
    jaf::save_cohort(cohort, out / "refined-cohort.json");
    std::cout << "refined through round " << trace.t_star << " with " << trace.judge_calls
              << " judge calls\n";
    return 0;
}

int cmd_eval(const Flags& f) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    fs::path refined = out / "refined-cohort.json";
    if (!fs::exists(refined)) {
        throw jaf::ConfigError("no refinement output at " + refined.string() +
                               " (run `refine` first)");
    }
    jaf::Cohort cohort = jaf::load_cohort(refined);
    auto source = make_source(cfg, out);

    std::unique_ptr<jaf::Judge> judge;
    if (cfg.at("agent") == "sim") {
        judge = std::make_unique<jaf::SimulatedJudge>(load_world(cfg));
    } else {
        judge = std::make_unique<jaf::HttpJudge>(http_config(cfg));
    }
    jaf::AcceptanceProfile profile = jaf::evaluate_probabilistic(
        cohort, *judge, *source, cfg.at("runs").get<int>(), cfg.at("seed").get<std::uint64_t>());
    write_json(out / "profile.json", jaf::profile_to_json(profile));
    std::cout << "evaluated " << profile.ids.size() << " instances over " << profile.runs
              << " runs\n";
    return 0;
}

int cmd_report(const Flags& f, int bins) {
    ordered_json cfg = effective_config(f);
    fs::path out = prepare_out(cfg);
    fs::path profile_path = out / "profile.json";
    if (!fs::exists(profile_path)) {
        throw jaf::ConfigError("no profile at " + profile_path.string() + " (run `eval` first)");
    }
    std::ifstream in(profile_path);
    ordered_json j;
    in >> j;
    jaf::AcceptanceProfile profile = jaf::profile_from_json(j);
    jaf::HistogramReport report = jaf::make_histogram(profile, bins);
    write_file(out / "histogram.csv", jaf::histogram_to_csv(report));
    std::cout << "mean " << report.mean << ", std " << report.std_dev << ", n " << report.n
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cohort-level judge pipeline"};
    app.require_subcommand(1);

    Flags flags;
    int bins = 10;

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic cohort and world");
    add_common_options(simulate, flags);

    auto* hash = app.add_subcommand("hash", "hash forest commands");
    auto* hash_train = hash->add_subcommand("train", "train a hash forest on a cohort");
    add_common_options(hash_train, flags);
    hash->require_subcommand(1);

    auto* graph = app.add_subcommand("graph", "knowledge graph commands");
    auto* graph_build = graph->add_subcommand("build", "build the cohort knowledge graph");
    add_common_options(graph_build, flags);
    graph->require_subcommand(1);

    auto* refine = app.add_subcommand("refine", "run iterative self-refinement");
    add_common_options(refine, flags);

    auto* eval = app.add_subcommand("eval", "probabilistic evaluation of refined responses");
    add_common_options(eval, flags);

    auto* report = app.add_subcommand("report", "histogram report from a saved profile");
    add_common_options(report, flags);
    report->add_option("--bins", bins, "histogram bin count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(flags);
        if (hash_train->parsed()) return cmd_hash_train(flags);
        if (graph_build->parsed()) return cmd_graph_build(flags);
        if (refine->parsed()) return cmd_refine(flags);
        if (eval->parsed()) return cmd_eval(flags);
        if (report->parsed()) return cmd_report(flags, bins);
    } catch (const jaf::AgentError& e) {
        std::cerr << "agent error: " << e.what() << "\n";
        return 2;
    } catch (const jaf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
