#include "convgraph/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

CorpusStats build_corpus_stats(const std::vector<Evidence>& pool) {
    CorpusStats stats;
    stats.doc_count = pool.size();
    std::size_t total_len = 0;
    for (const auto& evidence : pool) {
        const auto tokens = word_tokens(evidence.linearized);
        total_len += tokens.size();
        for (const auto& term : std::set<std::string>(tokens.begin(), tokens.end())) ++stats.doc_freq[term];
    }
    if (stats.doc_count > 0) stats.avg_doc_len = static_cast<double>(total_len) / static_cast<double>(stats.doc_count);
    return stats;
}

double bm25_score(const ConversationQuery& query, const Evidence& evidence, const CorpusStats& stats,
                  Bm25Params params) {
    if (stats.doc_count == 0) throw InvalidState("bm25_score: corpus statistics are empty");
    const auto query_terms = word_tokens(query.text);
    if (query_terms.empty()) return 0.0;

    const auto doc_tokens = word_tokens(evidence.linearized);
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& token : doc_tokens) ++tf[token];

    const double n = static_cast<double>(stats.doc_count);
    const double doc_len = static_cast<double>(doc_tokens.size());
    // avg_doc_len is zero only when every document is empty; then no term can match.
    const double norm = stats.avg_doc_len > 0.0 ? doc_len / stats.avg_doc_len : 0.0;

    double score = 0.0;
    for (const auto& term : std::set<std::string>(query_terms.begin(), query_terms.end())) {
        const auto it = tf.find(term);
        if (it == tf.end()) continue;
        const auto df_it = stats.doc_freq.find(term);
        const double df = df_it == stats.doc_freq.end() ? 0.0 : static_cast<double>(df_it->second);
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double f = static_cast<double>(it->second);
        score += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
    }
    return score;
}

namespace {

bool ranks_before(const RankedEvidence& a, const RankedEvidence& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.evidence.evidence_id < b.evidence.evidence_id;
}

}  // namespace

std::vector<RankedEvidence> rank_evidence(const ConversationQuery& query, const std::vector<Evidence>& pool,
                                          std::size_t k, Bm25Params params) {
    if (k < 1) throw InvalidInput("rank_evidence: k must be >= 1");
    if (pool.empty()) return {};
    const auto stats = build_corpus_stats(pool);
    std::vector<RankedEvidence> scored;
    scored.reserve(pool.size());
    for (const auto& evidence : pool) scored.push_back({evidence, bm25_score(query, evidence, stats, params), 0});

    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), ranks_before);
    scored.resize(keep);
    for (std::size_t i = 0; i < scored.size(); ++i) scored[i].rank = i + 1;
    return scored;
}

void TfidfCosineScorer::prepare(const std::vector<Evidence>& pool) {
    doc_count_ = pool.size();
    doc_freq_.clear();
    for (const auto& evidence : pool) {
        const auto tokens = word_tokens(evidence.linearized);
        for (const auto& term : std::set<std::string>(tokens.begin(), tokens.end())) ++doc_freq_[term];
    }
}

double TfidfCosineScorer::idf(const std::string& term) const {
    const auto it = doc_freq_.find(term);
    const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(doc_count_)) / (1.0 + df)) + 1.0;
}

double TfidfCosineScorer::similarity(const std::string& a, const std::string& b) const {
    auto weights = [&](const std::string& text) {
        std::map<std::string, double> w;
        for (const auto& token : word_tokens(text)) w[token] += 1.0;
        for (auto& [term, value] : w) value *= idf(term);
        return w;
    };
    const auto wa = weights(a);
    const auto wb = weights(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [term, value] : wa) {
        na += value * value;
        if (const auto it = wb.find(term); it != wb.end()) dot += value * it->second;
    }
    for (const auto& [term, value] : wb) nb += value * value;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

double TfidfCosineScorer::score(const std::string& query_text, const Evidence& evidence) const {
    return similarity(query_text, evidence.linearized);
}

EmbeddingCosineScorer::EmbeddingCosineScorer(std::unordered_map<std::string, std::vector<double>> vectors)
    : vectors_(std::move(vectors)) {
    std::size_t dim = 0;
    for (const auto& [id, vec] : vectors_) {
        if (dim == 0) dim = vec.size();
        if (vec.size() != dim || dim == 0) throw InvalidInput("embedding '" + id + "' has inconsistent dimension");
    }
}

EmbeddingCosineScorer EmbeddingCosineScorer::from_file(const std::string& path) {
    std::unordered_map<std::string, std::vector<double>> vectors;
    for (const auto& record : read_jsonl(path)) {
        vectors[record.at("id").get<std::string>()] = record.at("vector").get<std::vector<double>>();
    }
    return EmbeddingCosineScorer(std::move(vectors));
}

const std::vector<double>& EmbeddingCosineScorer::lookup(const std::string& key) const {
    const auto it = vectors_.find(key);
    if (it == vectors_.end()) throw ScorerError("no embedding vector for '" + key + "'");
    return it->second;
}

double EmbeddingCosineScorer::score(const std::string& query_text, const Evidence& evidence) const {
    const auto& q = lookup("query:" + query_text);
    const auto& e = lookup(evidence.evidence_id);
    double dot = 0.0, nq = 0.0, ne = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        dot += q[i] * e[i];
        nq += q[i] * q[i];
        ne += e[i] * e[i];
    }
    if (nq == 0.0 || ne == 0.0) return 0.0;
    return dot / (std::sqrt(nq) * std::sqrt(ne));
}

RerankOutcome rerank(const ConversationQuery& query, const std::vector<Evidence>& pool, RerankScorer& scorer) {
    RerankOutcome outcome;
    scorer.prepare(pool);
    outcome.ranking.reserve(pool.size());
    for (const auto& evidence : pool) {
        double score = -std::numeric_limits<double>::infinity();
        try {
            score = scorer.score(query.text, evidence);
            if (!std::isfinite(score)) throw ScorerError("non-finite score");
        } catch (const ScorerError& e) {
            score = -std::numeric_limits<double>::infinity();
            outcome.errors.push_back(evidence.evidence_id + ": " + e.what());
        }
        outcome.ranking.push_back({evidence, score, 0});
    }
    std::sort(outcome.ranking.begin(), outcome.ranking.end(), ranks_before);
    for (std::size_t i = 0; i < outcome.ranking.size(); ++i) outcome.ranking[i].rank = i + 1;
    return outcome;
}

}  // namespace convgraph
