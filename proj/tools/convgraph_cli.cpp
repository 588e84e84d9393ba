// convgraph: run the conversational evidence-graph QA pipeline, or any one stage of it, on files.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convgraph/error.hpp"
#include "convgraph/evaluator.hpp"
#include "convgraph/gradcheck.hpp"
#include "convgraph/pipeline.hpp"
#include "convgraph/version.hpp"

namespace fs = std::filesystem;
using namespace convgraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRecoverable = 1;
constexpr int kExitFatal = 2;

struct ConfigFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> direct;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "flat key=value config file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override any config key (key=value), repeatable");
        add(app, "--seed", "seed", "run seed");
        add(app, "--k", "k", "top-k evidence per turn");
        add(app, "--rho", "rho", "fraction of the top-k replaced from memory");
        add(app, "--memory", "memory", "on|off|random");
        add(app, "--scorer", "scorer", "tfidf|embed");
        add(app, "--out", "out", "output directory");
    }

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { direct[key] = v; }, help);
    }

    PipelineConfig resolve() const {
        PipelineConfig config;
        if (!config_file.empty()) config.apply(read_config_file(config_file));
        std::map<std::string, std::string> overrides;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw InvalidInput("--set expects key=value, got '" + s + "'");
            overrides[s.substr(0, eq)] = s.substr(eq + 1);
        }
        for (const auto& [k, v] : direct) overrides[k] = v;
        config.apply(overrides);
        return config;
    }
};

PromptTemplate load_prompt(const PipelineConfig& config) {
    return config.prompt_template.empty() ? PromptTemplate::default_template() : PromptTemplate::load(config.prompt_template);
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << text;
}

int run_ingest(const ConfigFlags& flags) {
    const PipelineConfig config = flags.resolve();
    config.validate();
    const FixtureSet fixtures = load_fixtures(config);
    const Vocab vocab = build_fixture_vocab(fixtures, load_prompt(config));
    const fs::path out(config.out);
    fs::create_directories(out);
    std::vector<nlohmann::json> pools;
    std::size_t instances = 0;
    for (const auto& [key, pool] : fixtures.pools) {
        pools.emplace_back(pool);
        instances += pool.evidence.size();
    }
    write_jsonl((out / "pools.jsonl").string(), pools);
    vocab.save((out / "vocab.txt").string());
    std::cout << fixtures.interactions.size() << " conversations, " << pools.size() << " pools, " << instances
              << " evidence instances, vocabulary " << vocab.size() << "\n";
    return kExitOk;
}

int run_rank(const ConfigFlags& flags, const std::string& out_file) {
    PipelineConfig config = flags.resolve();
    config.validate();
    const FixtureSet fixtures = load_fixtures(config);
    std::vector<nlohmann::json> lines;
    std::size_t skipped = 0;
    for (const auto& interaction : fixtures.interactions) {
        auto scorer = make_scorer(config);
        TurnState state;
        for (const auto& turn : interaction.turns) {
            const auto it = fixtures.pools.find({interaction.conv_id, turn.index});
            if (it == fixtures.pools.end() || it->second.evidence.empty()) {
                state.memory = update_memory(std::move(state.memory), std::vector<Evidence>{});
                ++skipped;
                continue;
            }
            const RetrievalResult r =
                retrieve(interaction.conv_id, state.history, turn.question, it->second, state.memory, *scorer, config);
            lines.emplace_back(EvidencePool{interaction.conv_id, turn.index, r.merged});
            state.memory = advance_memory(std::move(state.memory), r, config);
            state.history.emplace_back(turn.question, turn.gold_answer);
        }
    }
    const fs::path path = out_file.empty() ? fs::path(config.out) / "ranked.jsonl" : fs::path(out_file);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_jsonl(path.string(), lines);
    std::cout << lines.size() << " merged evidence sets written to " << path.string();
    if (skipped) std::cout << " (" << skipped << " turns without a pool)";
    std::cout << "\n";
    return skipped ? kExitRecoverable : kExitOk;
}

int run_build_graph(const ConfigFlags& flags, const std::string& pools_file, const std::string& out_path) {
    const PipelineConfig config = flags.resolve();
    std::vector<EvidencePool> pools = load_pools(pools_file);
    for (auto& pool : pools) pool.evidence = linearize_pool(std::move(pool.evidence), config.linearize);
    const std::vector<EntityRef> lexicon = config.entities.empty() ? std::vector<EntityRef>{} : load_entities(config.entities);

    Vocab vocab;
    if (!config.vocab.empty()) {
        vocab = Vocab::load(config.vocab);
    } else {
        std::vector<std::string> texts;
        for (const auto& pool : pools) {
            for (const auto& e : pool.evidence) texts.push_back(e.linearized);
        }
        vocab = Vocab::build(texts);
    }

    const fs::path target = out_path.empty() ? fs::path(config.out) : fs::path(out_path);
    const bool single_file = pools.size() == 1 && target.extension() == ".json";
    std::size_t warnings = 0;
    for (const auto& pool : pools) {
        const auto entities = evidence_entities(pool.evidence, lexicon);
        const GraphBuildResult built = build_graph(pool.evidence, entities, vocab, config.graph, pool.turn);
        for (const auto& w : built.warnings) std::cerr << "warning: " << w << "\n";
        warnings += built.warnings.size();
        const fs::path file = single_file ? target : target / graph_file_name(pool.conv_id, pool.turn);
        write_file(file, serialize_graph(built.graph));
        std::cout << file.string() << ": " << built.graph.nodes.size() << " nodes, " << built.graph.edges.size()
                  << " edges\n";
    }
    return warnings ? kExitRecoverable : kExitOk;
}

int run_train(const ConfigFlags& flags) {
    const PipelineConfig config = flags.resolve();
    config.validate();
    const FixtureSet fixtures = load_fixtures(config);
    const PromptTemplate prompt = load_prompt(config);
    const Vocab vocab = config.vocab.empty() ? build_fixture_vocab(fixtures, prompt) : Vocab::load(config.vocab);
    const auto examples = build_training_examples(fixtures, vocab, prompt, config);
    if (examples.empty()) throw InvalidInput("no training examples: every turn lacks an evidence pool");

    ModelConfig model = config.model;
    model.lm.vocab_size = vocab.size();
    ModelParams params = ModelParams::init(model, config.seed);
    TrainConfig train = config.train;
    train.max_steps = config.train_steps;
    train.seed = config.seed;
    const TrainResult result = train_loop(examples, train, params, vocab);

    const fs::path out(config.out);
    fs::create_directories(out);
    vocab.save((out / "vocab.txt").string());
    save_checkpoint((out / "checkpoint.json").string(), params);
    write_loss_trace((out / "loss_trace.csv").string(), result.trace);
    double tail = 0.0;
    const std::size_t window = std::min<std::size_t>(result.trace.size(), train.accumulation);
    for (std::size_t i = result.trace.size() - window; i < result.trace.size(); ++i) tail += result.trace[i].loss;
    std::cout << examples.size() << " examples, " << result.steps << " steps, final loss "
              << (window ? tail / static_cast<double>(window) : 0.0) << "\n";
    return kExitOk;
}

int run_eval(const std::string& records_file, const std::string& out_file) {
    const MetricsReport report = stratify(load_eval_records(records_file));
    const std::string text = report_text(report);
    if (!out_file.empty()) write_file(out_file, text);
    std::cout << text;
    return kExitOk;
}

int run_pipeline_command(const ConfigFlags& flags) {
    const PipelineOutcome outcome = run_pipeline(flags.resolve());
    for (const auto& e : outcome.errors) std::cerr << "error: " << e << "\n";
    std::cout << outcome.records.size() << " turns answered, H@1 " << outcome.report.overall.h1() << ", H@5 "
              << outcome.report.overall.h5() << "\n";
    return outcome.exit_code;
}

int run_gradcheck(std::size_t nodes, std::uint64_t seed) {
    const GradCheckResult gat = gat_gradcheck(nodes, seed);
    const GradCheckResult full = full_gradcheck(nodes, seed);
    std::cout << "gat  max relative error " << gat.max_relative_error << " over " << gat.entries << " entries (worst "
              << gat.worst << ")\n";
    std::cout << "full max relative error " << full.max_relative_error << " over " << full.entries << " entries (worst "
              << full.worst << ")\n";
    return gat.max_relative_error < 1e-5 && full.max_relative_error < 1e-4 ? kExitOk : kExitRecoverable;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conversational question answering over evidence graphs"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ConfigFlags ingest_flags, rank_flags, graph_flags, train_flags, pipeline_flags;
    std::string rank_out, graph_pools, graph_out, records, report_out;
    std::size_t nodes = 10;
    std::uint64_t seed = 7;

    auto* ingest = app.add_subcommand("ingest", "validate and linearize fixtures; write pools.jsonl and vocab.txt");
    ingest_flags.attach(ingest);

    auto* rank = app.add_subcommand("rank", "BM25 top-k plus memory merge per turn, gold history");
    rank_flags.attach(rank);
    rank->add_option("--ranked", rank_out, "output file (default <out>/ranked.jsonl)");

    auto* graph = app.add_subcommand("build-graph", "build graph.json files from an evidence pool file");
    graph_flags.attach(graph);
    graph->add_option("--pools", graph_pools, "evidence pools, one JSON object per line")->required()->check(CLI::ExistingFile);
    graph->add_option("--graph-out", graph_out, "graph file (single pool, .json) or directory");

    auto* train = app.add_subcommand("train", "train on the fixture conversations; write checkpoint and loss trace");
    train_flags.attach(train);

    auto* eval = app.add_subcommand("eval", "stratified metrics from eval_records.jsonl");
    eval->add_option("--records", records, "eval records file")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", report_out, "write the report here as well");

    auto* pipeline = app.add_subcommand("pipeline", "run every stage over the fixtures");
    pipeline_flags.attach(pipeline);

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--nodes", nodes, "graph size")->check(CLI::Range(1, 64));
    gradcheck->add_option("--seed", seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitFatal;
    }

    try {
        if (*ingest) return run_ingest(ingest_flags);
        if (*rank) return run_rank(rank_flags, rank_out);
        if (*graph) return run_build_graph(graph_flags, graph_pools, graph_out);
        if (*train) return run_train(train_flags);
        if (*eval) return run_eval(records, report_out);
        if (*pipeline) return run_pipeline_command(pipeline_flags);
        if (*gradcheck) return run_gradcheck(nodes, seed);
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
