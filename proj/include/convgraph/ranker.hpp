#pragma once
// BM25 top-k selection and memory re-ranking.

#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "convgraph/evidence.hpp"

namespace convgraph {

struct CorpusStats {
    std::size_t doc_count = 0;
    double avg_doc_len = 0.0;
    std::map<std::string, std::size_t> doc_freq;
};

struct RankedEvidence {
    Evidence evidence;
    double score = 0.0;
    std::size_t rank = 1;
    bool operator==(const RankedEvidence&) const = default;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

CorpusStats build_corpus_stats(const std::vector<Evidence>& pool);

// Okapi BM25 over the unique terms of the query, IDF = ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_score(const ConversationQuery& query, const Evidence& evidence, const CorpusStats& stats,
                  Bm25Params params = {});

// Top min(k, |pool|) by BM25, ties broken by ascending evidence_id.
std::vector<RankedEvidence> rank_evidence(const ConversationQuery& query, const std::vector<Evidence>& pool,
                                          std::size_t k, Bm25Params params = {});

class ScorerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Relevance of an evidence instance to a query text, used to re-rank the evidence memory.
class RerankScorer {
public:
    virtual ~RerankScorer() = default;

    // Called once with the candidates before scoring them.
    virtual void prepare(const std::vector<Evidence>& /*pool*/) {}

    // Throws ScorerError when the item cannot be scored.
    virtual double score(const std::string& query_text, const Evidence& evidence) const = 0;
};

// Cosine similarity of smoothed TF-IDF vectors; the IDF table is built in prepare().
class TfidfCosineScorer : public RerankScorer {
public:
    void prepare(const std::vector<Evidence>& pool) override;
    double score(const std::string& query_text, const Evidence& evidence) const override;

    double similarity(const std::string& a, const std::string& b) const;

private:
    double idf(const std::string& term) const;

    std::size_t doc_count_ = 0;
    std::unordered_map<std::string, std::size_t> doc_freq_;
};

// Cosine over precomputed vectors. Evidence vectors are keyed by evidence_id and
// query vectors by "query:" + query text.
class EmbeddingCosineScorer : public RerankScorer {
public:
    explicit EmbeddingCosineScorer(std::unordered_map<std::string, std::vector<double>> vectors);

    // JSON lines {"id": ..., "vector": [...]}, all of one dimension.
    static EmbeddingCosineScorer from_file(const std::string& path);

    double score(const std::string& query_text, const Evidence& evidence) const override;

private:
    const std::vector<double>& lookup(const std::string& key) const;

    std::unordered_map<std::string, std::vector<double>> vectors_;
};

struct RerankOutcome {
    std::vector<RankedEvidence> ranking;
    std::vector<std::string> errors;
};

// Full descending order of `pool` under `scorer`. Items the scorer rejects are placed
// last with score -infinity and reported in `errors`.
RerankOutcome rerank(const ConversationQuery& query, const std::vector<Evidence>& pool, RerankScorer& scorer);

}  // namespace convgraph
