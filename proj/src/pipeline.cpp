#include "convgraph/pipeline.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"
#include "convgraph/version.hpp"

namespace convgraph {

namespace fs = std::filesystem;

namespace {

// Predicted answers can be empty; the query builder needs a non-empty history entry.
constexpr const char* kNoAnswer = "unknown";

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t turn_seed(std::uint64_t seed, const std::string& conv_id, std::size_t turn) {
    std::uint64_t h = fnv1a(conv_id, fnv1a(std::to_string(seed)));
    return fnv1a(std::to_string(turn), h);
}

std::string format_double(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidInput("config " + key + ": not a count: '" + v + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidInput("config " + key + ": not an integer: '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(out)) {
        throw InvalidInput("config " + key + ": not a number: '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw InvalidInput("config " + key + ": expected true or false, got '" + v + "'");
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

std::string memory_text(MemoryMode m) {
    switch (m) {
        case MemoryMode::Off: return "off";
        case MemoryMode::On: return "on";
        case MemoryMode::Random: return "random";
    }
    return "on";
}

std::string link_text(EntityLinkMode m) {
    switch (m) {
        case EntityLinkMode::Heads: return "heads";
        case EntityLinkMode::AllTokens: return "all";
        case EntityLinkMode::None: return "none";
    }
    return "heads";
}

template <typename Enum>
Enum parse_choice(const std::string& key, const std::string& v, const std::vector<std::pair<std::string, Enum>>& choices) {
    for (const auto& [name, value] : choices) {
        if (name == v) return value;
    }
    std::string allowed;
    for (const auto& c : choices) allowed += (allowed.empty() ? "" : "|") + c.first;
    throw InvalidInput("config " + key + ": expected " + allowed + ", got '" + v + "'");
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << text;
}

std::string safe_component(const std::string& id) {
    std::string out;
    for (char c : id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

}  // namespace

void PipelineConfig::apply(const std::map<std::string, std::string>& values) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"interactions", [&](auto&, auto& v) { interactions = v; }},
        {"pools", [&](auto&, auto& v) { pools = v; }},
        {"entities", [&](auto&, auto& v) { entities = v; }},
        {"vocab", [&](auto&, auto& v) { vocab = v; }},
        {"checkpoint", [&](auto&, auto& v) { checkpoint = v; }},
        {"template", [&](auto&, auto& v) { prompt_template = v; }},
        {"embeddings", [&](auto&, auto& v) { embeddings = v; }},
        {"out", [&](auto&, auto& v) { out = v; }},
        {"k", [&](auto& key, auto& v) { k = parse_size(key, v); }},
        {"rho", [&](auto& key, auto& v) { rho = parse_double(key, v); }},
        {"memory", [&](auto& key, auto& v) {
             memory = parse_choice<MemoryMode>(key, v, {{"on", MemoryMode::On}, {"off", MemoryMode::Off}, {"random", MemoryMode::Random}});
         }},
        {"memory_store", [&](auto& key, auto& v) {
             memory_store = parse_choice<MemoryStore>(key, v, {{"retrieved", MemoryStore::Retrieved}, {"merged", MemoryStore::Merged}});
         }},
        {"scorer", [&](auto& key, auto& v) {
             scorer = parse_choice<ScorerKind>(key, v, {{"tfidf", ScorerKind::Tfidf}, {"embed", ScorerKind::Embedding}});
         }},
        {"history", [&](auto& key, auto& v) {
             history = parse_choice<HistorySource>(key, v, {{"gold", HistorySource::Gold}, {"predicted", HistorySource::Predicted}});
         }},
        {"seed", [&](auto& key, auto& v) { seed = parse_u64(key, v); }},
        {"prepend_title_text", [&](auto& key, auto& v) { linearize.prepend_title_text = parse_bool(key, v); }},
        {"prepend_title_table", [&](auto& key, auto& v) { linearize.prepend_title_table = parse_bool(key, v); }},
        {"prepend_title_kb", [&](auto& key, auto& v) { linearize.prepend_title_kb = parse_bool(key, v); }},
        {"link_mode", [&](auto& key, auto& v) {
             graph.link_mode = parse_choice<EntityLinkMode>(
                 key, v, {{"heads", EntityLinkMode::Heads}, {"all", EntityLinkMode::AllTokens}, {"none", EntityLinkMode::None}});
         }},
        {"reverse_chain", [&](auto& key, auto& v) { graph.reverse_chain = parse_bool(key, v); }},
        {"contract_spans", [&](auto& key, auto& v) { graph.contract_spans = parse_bool(key, v); }},
        {"d_model", [&](auto& key, auto& v) { model.lm.d_model = parse_size(key, v); }},
        {"lm_layers", [&](auto& key, auto& v) { model.lm.layers = parse_size(key, v); }},
        {"lm_heads", [&](auto& key, auto& v) { model.lm.heads = parse_size(key, v); }},
        {"d_ff", [&](auto& key, auto& v) { model.lm.d_ff = parse_size(key, v); }},
        {"gat_layers", [&](auto& key, auto& v) { model.gat_layers = parse_size(key, v); }},
        {"gat_heads", [&](auto& key, auto& v) { model.gat_heads = parse_size(key, v); }},
        {"gat_dropout", [&](auto& key, auto& v) { model.gat_dropout = parse_double(key, v); }},
        {"lora_rank", [&](auto& key, auto& v) { model.lora_rank = parse_size(key, v); }},
        {"lora_alpha", [&](auto& key, auto& v) { model.lora_alpha = parse_double(key, v); }},
        {"lora_dropout", [&](auto& key, auto& v) { model.lora_dropout = parse_double(key, v); }},
        {"lr", [&](auto& key, auto& v) { train.lr = parse_double(key, v); }},
        {"accumulation", [&](auto& key, auto& v) { train.accumulation = parse_size(key, v); }},
        {"train_steps", [&](auto& key, auto& v) { train_steps = parse_size(key, v); }},
        {"max_tokens", [&](auto& key, auto& v) { max_tokens = parse_size(key, v); }},
        {"workers", [&](auto& key, auto& v) { workers = parse_size(key, v); }},
    };
    for (const auto& [key, value] : values) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw InvalidInput("unknown config key '" + key + "'");
        it->second(key, value);
    }
}

std::map<std::string, std::string> PipelineConfig::to_map() const {
    return {
        {"interactions", interactions},
        {"pools", pools},
        {"entities", entities},
        {"vocab", vocab},
        {"checkpoint", checkpoint},
        {"template", prompt_template},
        {"embeddings", embeddings},
        {"out", out},
        {"k", std::to_string(k)},
        {"rho", format_double(rho)},
        {"memory", memory_text(memory)},
        {"memory_store", memory_store == MemoryStore::Retrieved ? "retrieved" : "merged"},
        {"scorer", scorer == ScorerKind::Tfidf ? "tfidf" : "embed"},
        {"history", history == HistorySource::Gold ? "gold" : "predicted"},
        {"seed", std::to_string(seed)},
        {"prepend_title_text", bool_text(linearize.prepend_title_text)},
        {"prepend_title_table", bool_text(linearize.prepend_title_table)},
        {"prepend_title_kb", bool_text(linearize.prepend_title_kb)},
        {"link_mode", link_text(graph.link_mode)},
        {"reverse_chain", bool_text(graph.reverse_chain)},
        {"contract_spans", bool_text(graph.contract_spans)},
        {"d_model", std::to_string(model.lm.d_model)},
        {"lm_layers", std::to_string(model.lm.layers)},
        {"lm_heads", std::to_string(model.lm.heads)},
        {"d_ff", std::to_string(model.lm.d_ff)},
        {"gat_layers", std::to_string(model.gat_layers)},
        {"gat_heads", std::to_string(model.gat_heads)},
        {"gat_dropout", format_double(model.gat_dropout)},
        {"lora_rank", std::to_string(model.lora_rank)},
        {"lora_alpha", format_double(model.lora_alpha)},
        {"lora_dropout", format_double(model.lora_dropout)},
        {"lr", format_double(train.lr)},
        {"accumulation", std::to_string(train.accumulation)},
        {"train_steps", std::to_string(train_steps)},
        {"max_tokens", std::to_string(max_tokens)},
        {"workers", std::to_string(workers)},
    };
}

void PipelineConfig::validate() const {
    auto require = [](const std::string& path, const char* what) {
        if (!fs::is_regular_file(path)) throw InvalidInput(std::string(what) + " file not found: " + path);
    };
    require(interactions, "interactions");
    require(pools, "pools");
    if (!entities.empty()) require(entities, "entities");
    if (!vocab.empty()) require(vocab, "vocab");
    if (!checkpoint.empty()) require(checkpoint, "checkpoint");
    if (!prompt_template.empty()) require(prompt_template, "template");
    if (scorer == ScorerKind::Embedding) {
        if (embeddings.empty()) throw InvalidInput("the embedding scorer needs an embeddings file");
        require(embeddings, "embeddings");
    }
    if (k < 1) throw InvalidInput("k must be >= 1");
    if (!(rho >= 0.0 && rho <= 1.0)) throw InvalidInput("rho must lie in [0, 1]");
    if (train.accumulation < 1) throw InvalidInput("accumulation must be >= 1");
    if (!(train.lr >= 0.0)) throw InvalidInput("lr must be >= 0");
    if (workers < 1) throw InvalidInput("workers must be >= 1");
}

std::string PipelineConfig::hash() const {
    std::string canonical;
    for (const auto& [key, value] : to_map()) canonical += key + "=" + value + "\n";
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
    return buffer;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read config " + path);
    std::map<std::string, std::string> values;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string_view body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(path + ":" + std::to_string(number) + ": expected key=value", 0);
        }
        values[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
    }
    return values;
}

FixtureSet load_fixtures(const PipelineConfig& config) {
    FixtureSet fixtures;
    fixtures.interactions = load_interactions(config.interactions);
    for (auto& pool : load_pools(config.pools)) {
        pool.evidence = linearize_pool(std::move(pool.evidence), config.linearize);
        const auto key = std::make_pair(pool.conv_id, pool.turn);
        if (fixtures.pools.count(key)) {
            throw InvalidInput("duplicate evidence pool for " + pool.conv_id + " turn " + std::to_string(pool.turn));
        }
        fixtures.pools.emplace(key, std::move(pool));
    }
    if (!config.entities.empty()) fixtures.entities = load_entities(config.entities);
    return fixtures;
}

Vocab build_fixture_vocab(const FixtureSet& fixtures, const PromptTemplate& prompt) {
    std::vector<std::string> texts = {prompt.prefix(), prompt.suffix({}, "x"), kNoAnswer};
    for (const auto& interaction : fixtures.interactions) {
        for (const auto& turn : interaction.turns) {
            texts.push_back(turn.question);
            texts.push_back(turn.gold_answer);
            for (const auto& alias : turn.answer_aliases) texts.push_back(alias);
        }
    }
    for (const auto& [key, pool] : fixtures.pools) {
        for (const auto& e : pool.evidence) {
            texts.push_back(e.linearized);
            for (const auto& entity : e.entities) texts.push_back(entity.label);
        }
    }
    return Vocab::build(texts);
}

std::unique_ptr<RerankScorer> make_scorer(const PipelineConfig& config) {
    if (config.scorer == ScorerKind::Embedding) {
        return std::make_unique<EmbeddingCosineScorer>(EmbeddingCosineScorer::from_file(config.embeddings));
    }
    return std::make_unique<TfidfCosineScorer>();
}

std::vector<EntityRef> evidence_entities(const std::vector<Evidence>& evidence, const std::vector<EntityRef>& lexicon) {
    std::map<std::string, const EntityRef*> by_id;
    for (const auto& e : lexicon) by_id.emplace(e.entity_id, &e);
    std::vector<EntityRef> out;
    std::set<std::string> seen;
    for (const auto& item : evidence) {
        for (const auto& entity : item.entities) {
            if (!seen.insert(entity.entity_id).second) continue;
            const auto it = by_id.find(entity.entity_id);
            if (it == by_id.end()) {
                out.push_back(entity);
                continue;
            }
            auto aliases = entity.aliases;
            aliases.insert(aliases.end(), it->second->aliases.begin(), it->second->aliases.end());
            out.push_back(make_entity(entity.entity_id, entity.label, aliases));
        }
    }
    return out;
}

RetrievalResult retrieve(const std::string& conv_id, const std::vector<QaPair>& history, const std::string& question,
                         const EvidencePool& pool, const EvidenceMemory& memory, RerankScorer& scorer,
                         const PipelineConfig& config) {
    RetrievalResult result;
    result.query = build_query(history, question);
    result.ranked = rank_evidence(result.query, pool.evidence, config.k);
    switch (config.memory) {
        case MemoryMode::Off:
            for (const auto& r : result.ranked) result.merged.push_back(r.evidence);
            break;
        case MemoryMode::On: {
            auto merged = merge_with_memory(result.ranked, memory, result.query, scorer, config.rho);
            result.merged = std::move(merged.evidence);
            result.scorer_errors = std::move(merged.scorer_errors);
            break;
        }
        case MemoryMode::Random: {
            auto merged = merge_with_random_memory(result.ranked, memory, config.rho,
                                                   turn_seed(config.seed, conv_id, pool.turn));
            result.merged = std::move(merged.evidence);
            break;
        }
    }
    return result;
}

EvidenceMemory advance_memory(EvidenceMemory memory, const RetrievalResult& retrieval, const PipelineConfig& config) {
    if (config.memory_store == MemoryStore::Merged) return update_memory(std::move(memory), retrieval.merged);
    return update_memory(std::move(memory), retrieval.ranked);
}

std::string graph_file_name(const std::string& conv_id, std::size_t turn) {
    return "graphs/" + safe_component(conv_id) + "/turn_" + std::to_string(turn) + ".json";
}

TurnResult answer_turn(const Interaction& interaction, const Turn& turn, const EvidencePool& pool, TurnState& state,
                       const ModelContext& model, RerankScorer& scorer, const PipelineConfig& config) {
    TurnResult result;
    result.conv_id = interaction.conv_id;
    result.turn = turn.index;

    const RetrievalResult retrieval =
        retrieve(interaction.conv_id, state.history, turn.question, pool, state.memory, scorer, config);
    for (const auto& e : retrieval.merged) result.merged_ids.push_back(e.evidence_id);
    for (const auto& err : retrieval.scorer_errors) result.warnings.push_back("scorer: " + err);

    const std::vector<EntityRef> entities = evidence_entities(retrieval.merged, model.lexicon);
    GraphBuildResult built = build_graph(retrieval.merged, entities, model.vocab, config.graph, turn.index);
    for (auto& w : built.warnings) result.warnings.push_back(std::move(w));
    result.graph = std::move(built.graph);
    result.graph_path = graph_file_name(interaction.conv_id, turn.index);
    const fs::path graph_file = fs::path(config.out) / result.graph_path;
    fs::create_directories(graph_file.parent_path());
    write_text(graph_file, serialize_graph(result.graph));

    const Matrix h_g = gat_forward(result.graph, model.params.gat, model.params.nodes);
    if (!all_finite(h_g)) {
        throw ConversationAborted(interaction.conv_id + " turn " + std::to_string(turn.index) +
                                  ": non-finite graph embeddings (" + std::to_string(result.graph.nodes.size()) + " nodes)");
    }
    const AssembledInput input = assemble_embeddings(model.prompt.prefix(), h_g,
                                                     model.prompt.suffix(state.history, turn.question),
                                                     model.params.lm, model.vocab);
    if (!all_finite(input.embeddings)) {
        throw ConversationAborted(interaction.conv_id + " turn " + std::to_string(turn.index) + ": non-finite input rows");
    }
    if (input.embeddings.rows() > 0) {
        result.generated = generate(input.embeddings, model.params.lm, model.params.lora, model.vocab, config.max_tokens);
    }

    TurnScoreInput score_input;
    score_input.conv_id = interaction.conv_id;
    score_input.turn = turn.index;
    score_input.domain = turn.domain.empty() ? interaction.domain : turn.domain;
    score_input.answer_source = turn.answer_source;
    score_input.generated = result.generated;
    score_input.gold = turn.gold_answer;
    score_input.gold_aliases = turn.answer_aliases;
    result.record = score_turn(score_input, normalize_answer(result.generated, entities, 5));

    state.memory = advance_memory(std::move(state.memory), retrieval, config);
    std::string said = config.history == HistorySource::Gold ? turn.gold_answer : result.record.normalized;
    if (trim(said).empty()) said = kNoAnswer;
    state.history.emplace_back(turn.question, said);
    return result;
}

std::vector<TrainingExample> build_training_examples(const FixtureSet& fixtures, const Vocab& vocab,
                                                     const PromptTemplate& prompt, const PipelineConfig& config) {
    std::vector<TrainingExample> examples;
    for (const auto& interaction : fixtures.interactions) {
        auto scorer = make_scorer(config);
        TurnState state;
        for (const auto& turn : interaction.turns) {
            const auto it = fixtures.pools.find({interaction.conv_id, turn.index});
            if (it == fixtures.pools.end() || it->second.evidence.empty()) {
                state.memory = update_memory(std::move(state.memory), std::vector<Evidence>{});
                continue;
            }
            const RetrievalResult retrieval =
                retrieve(interaction.conv_id, state.history, turn.question, it->second, state.memory, *scorer, config);
            TrainingExample ex;
            ex.id = interaction.conv_id + "/" + std::to_string(turn.index);
            ex.graph = build_graph(retrieval.merged, evidence_entities(retrieval.merged, fixtures.entities), vocab,
                                   config.graph, turn.index)
                           .graph;
            ex.prefix = prompt.prefix();
            ex.suffix = prompt.suffix(state.history, turn.question);
            ex.answer = turn.gold_answer;
            examples.push_back(std::move(ex));
            state.memory = advance_memory(std::move(state.memory), retrieval, config);
            state.history.emplace_back(turn.question, turn.gold_answer);
        }
    }
    return examples;
}

PipelineOutcome run_pipeline(const PipelineConfig& config) {
    config.validate();
    const fs::path out(config.out);
    fs::create_directories(out);

    const FixtureSet fixtures = load_fixtures(config);
    const PromptTemplate prompt =
        config.prompt_template.empty() ? PromptTemplate::default_template() : PromptTemplate::load(config.prompt_template);
    const Vocab vocab = config.vocab.empty() ? build_fixture_vocab(fixtures, prompt) : Vocab::load(config.vocab);
    vocab.save((out / "vocab.txt").string());
    std::vector<std::string> outputs = {"vocab.txt"};

    ModelParams params;
    if (!config.checkpoint.empty()) {
        params = load_checkpoint(config.checkpoint);
        if (params.lm.vocab_size() != vocab.size()) {
            throw InvalidInput("checkpoint vocabulary size " + std::to_string(params.lm.vocab_size()) +
                               " does not match the vocabulary (" + std::to_string(vocab.size()) + ")");
        }
    } else {
        ModelConfig model = config.model;
        model.lm.vocab_size = vocab.size();
        params = ModelParams::init(model, config.seed);
        const auto examples = build_training_examples(fixtures, vocab, prompt, config);
        if (config.train_steps > 0 && !examples.empty()) {
            TrainConfig train = config.train;
            train.max_steps = config.train_steps;
            train.seed = config.seed;
            const TrainResult trained = train_loop(examples, train, params, vocab);
            write_loss_trace((out / "loss_trace.csv").string(), trained.trace);
            outputs.push_back("loss_trace.csv");
        }
    }
    save_checkpoint((out / "checkpoint.json").string(), params);
    outputs.push_back("checkpoint.json");

    const ModelContext model{params, vocab, prompt, fixtures.entities};
    const std::size_t n = fixtures.interactions.size();
    std::vector<std::vector<TurnResult>> per_conv(n);
    std::vector<std::vector<std::string>> per_conv_errors(n);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t c = next++; c < n; c = next++) {
            const Interaction& interaction = fixtures.interactions[c];
            auto& errors = per_conv_errors[c];
            try {
                auto scorer = make_scorer(config);
                TurnState state;
                for (const auto& turn : interaction.turns) {
                    const auto it = fixtures.pools.find({interaction.conv_id, turn.index});
                    if (it == fixtures.pools.end() || it->second.evidence.empty()) {
                        errors.push_back(interaction.conv_id + " turn " + std::to_string(turn.index) +
                                         ": no evidence pool; turn skipped");
                        state.memory = update_memory(std::move(state.memory), std::vector<Evidence>{});
                        continue;
                    }
                    per_conv[c].push_back(answer_turn(interaction, turn, it->second, state, model, *scorer, config));
                }
            } catch (const std::exception& e) {
                errors.push_back(interaction.conv_id + ": conversation aborted: " + e.what());
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(config.workers, std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    PipelineOutcome outcome;
    std::vector<nlohmann::json> turn_lines;
    for (std::size_t c = 0; c < n; ++c) {
        for (auto& r : per_conv[c]) {
            outcome.records.push_back(r.record);
            turn_lines.push_back({{"conv_id", r.conv_id},
                                  {"turn", r.turn},
                                  {"merged_ids", r.merged_ids},
                                  {"graph", r.graph_path},
                                  {"generated", r.generated},
                                  {"normalized", r.record.normalized},
                                  {"warnings", r.warnings}});
            outputs.push_back(r.graph_path);
            outcome.turns.push_back(std::move(r));
        }
        for (auto& e : per_conv_errors[c]) outcome.errors.push_back(std::move(e));
    }
    outcome.report = stratify(outcome.records);

    write_jsonl((out / "turns.jsonl").string(), turn_lines);
    write_eval_records((out / "eval_records.jsonl").string(), outcome.records);
    std::vector<nlohmann::json> error_lines;
    for (const auto& e : outcome.errors) error_lines.push_back({{"error", e}});
    write_jsonl((out / "errors.jsonl").string(), error_lines);
    write_text(out / "metrics_report.json", report_text(outcome.report));
    outputs.insert(outputs.end(), {"turns.jsonl", "eval_records.jsonl", "errors.jsonl", "metrics_report.json"});

    const nlohmann::json manifest = {{"tool", "convgraph"},
                                     {"version", kVersion},
                                     {"checkpoint_format_version", 1},
                                     {"seed", config.seed},
                                     {"config_hash", config.hash()},
                                     {"config", config.to_map()},
                                     {"outputs", outputs}};
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    outcome.exit_code = outcome.errors.empty() ? 0 : 1;
    return outcome;
}

}  // namespace convgraph
