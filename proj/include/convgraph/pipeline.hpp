#pragma once
// Fixture-driven orchestration: query -> rank -> memory merge -> graph -> GAT -> injection
// -> generation -> scoring -> memory update, over every turn of every conversation.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "convgraph/evaluator.hpp"
#include "convgraph/evidence.hpp"
#include "convgraph/graph.hpp"
#include "convgraph/injector.hpp"
#include "convgraph/linearizer.hpp"
#include "convgraph/memory.hpp"
#include "convgraph/ranker.hpp"
#include "convgraph/trainer.hpp"

namespace convgraph {

enum class ScorerKind { Tfidf, Embedding };
enum class HistorySource { Gold, Predicted };
enum class MemoryStore { Retrieved, Merged };

struct PipelineConfig {
    std::string interactions = "fixtures/interactions.jsonl";
    std::string pools = "fixtures/pools.jsonl";
    std::string entities;    // optional lexicon; aliases are merged into matching evidence entities
    std::string vocab;       // optional; built from the fixtures when empty
    std::string checkpoint;  // optional; otherwise the model is initialised from `seed` and trained
    std::string prompt_template;
    std::string embeddings;  // required by the embedding scorer
    std::string out = "out";

    std::size_t k = 50;
    double rho = 1.0 / 3.0;
    MemoryMode memory = MemoryMode::On;
    MemoryStore memory_store = MemoryStore::Retrieved;
    ScorerKind scorer = ScorerKind::Tfidf;
    HistorySource history = HistorySource::Predicted;
    std::uint64_t seed = 0;

    LinearizeOptions linearize;
    GraphOptions graph;
    ModelConfig model;
    TrainConfig train;
    std::size_t train_steps = 10;
    std::size_t max_tokens = 32;
    std::size_t workers = 1;

    // Flat key=value pairs; unknown keys and malformed values are rejected.
    void apply(const std::map<std::string, std::string>& values);
    std::map<std::string, std::string> to_map() const;
    // Throws InvalidInput naming the first referenced file that does not exist.
    void validate() const;
    // FNV-1a over the canonical key=value listing.
    std::string hash() const;
};

// '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> read_config_file(const std::string& path);

struct FixtureSet {
    std::vector<Interaction> interactions;
    std::map<std::pair<std::string, std::size_t>, EvidencePool> pools;  // linearized
    std::vector<EntityRef> entities;
};

FixtureSet load_fixtures(const PipelineConfig& config);

// Every token-bearing text the pipeline can feed the model.
Vocab build_fixture_vocab(const FixtureSet& fixtures, const PromptTemplate& prompt);

std::unique_ptr<RerankScorer> make_scorer(const PipelineConfig& config);

// Entities attached to `evidence`, unique by id in first-seen order, with lexicon aliases merged in.
std::vector<EntityRef> evidence_entities(const std::vector<Evidence>& evidence, const std::vector<EntityRef>& lexicon);

struct TurnState {
    EvidenceMemory memory;
    std::vector<QaPair> history;
};

struct RetrievalResult {
    ConversationQuery query;
    std::vector<RankedEvidence> ranked;
    std::vector<Evidence> merged;
    std::vector<std::string> scorer_errors;
};

// build_query -> rank_evidence -> memory merge for one turn.
RetrievalResult retrieve(const std::string& conv_id, const std::vector<QaPair>& history, const std::string& question,
                         const EvidencePool& pool, const EvidenceMemory& memory, RerankScorer& scorer,
                         const PipelineConfig& config);

EvidenceMemory advance_memory(EvidenceMemory memory, const RetrievalResult& retrieval, const PipelineConfig& config);

struct TurnResult {
    std::string conv_id;
    std::size_t turn = 0;
    std::vector<std::string> merged_ids;
    std::string graph_path;
    EvidenceGraph graph;
    std::string generated;
    EvalRecord record;
    std::vector<std::string> warnings;
};

class ConversationAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelContext {
    const ModelParams& params;
    const Vocab& vocab;
    const PromptTemplate& prompt;
    const std::vector<EntityRef>& lexicon;
};

// One turn of the pipeline; updates `state` (memory and history) in place.
TurnResult answer_turn(const Interaction& interaction, const Turn& turn, const EvidencePool& pool, TurnState& state,
                       const ModelContext& model, RerankScorer& scorer, const PipelineConfig& config);

// Training examples along the gold conversation path.
std::vector<TrainingExample> build_training_examples(const FixtureSet& fixtures, const Vocab& vocab,
                                                     const PromptTemplate& prompt, const PipelineConfig& config);

struct PipelineOutcome {
    MetricsReport report;
    std::vector<EvalRecord> records;
    std::vector<TurnResult> turns;
    std::vector<std::string> errors;  // skipped turns and aborted conversations
    int exit_code = 0;
};

// Runs everything and writes to config.out: vocab.txt, checkpoint.json, loss_trace.csv (when
// trained), graphs/<conv>/turn_<t>.json, turns.jsonl, eval_records.jsonl, errors.jsonl,
// metrics_report.json and manifest.json.
PipelineOutcome run_pipeline(const PipelineConfig& config);

std::string graph_file_name(const std::string& conv_id, std::size_t turn);

}  // namespace convgraph
