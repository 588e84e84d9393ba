#include "convgraph/injector.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

namespace {

constexpr std::string_view kEvidenceSlot = "{evidence}";
constexpr std::string_view kHistorySlot = "{history}";

constexpr const char* kDefaultTemplate =
    "[INST]\n"
    "You are a helpful assistant. Using the following facts:\n"
    "{evidence}\n"
    "Answer the following conversational query as a simple key fact without description:\n"
    "[/INST]\n"
    "{history}";

std::string replace_once(std::string text, std::string_view slot, const std::string& value) {
    const auto pos = text.find(slot);
    if (pos == std::string::npos) return text;
    return text.replace(pos, slot.size(), value);
}

std::vector<TokenId> token_ids(const std::string& text, const Vocab& vocab) {
    std::vector<TokenId> ids;
    for (const auto& token : tokenize(text, vocab)) ids.push_back(token.id);
    return ids;
}

}  // namespace

PromptTemplate PromptTemplate::default_template() { return from_text(kDefaultTemplate); }

PromptTemplate PromptTemplate::from_text(const std::string& text) {
    const auto slot = text.find(kEvidenceSlot);
    if (slot == std::string::npos) throw InvalidInput("prompt template lacks an {evidence} slot");
    PromptTemplate tmpl;
    tmpl.prefix_ = text.substr(0, slot);
    tmpl.suffix_template_ = text.substr(slot + kEvidenceSlot.size());
    if (tmpl.prefix_.find("Using the following facts") == std::string::npos) {
        throw InvalidInput("prompt prefix must contain the instruction 'Using the following facts'");
    }
    const auto tail = trim(tmpl.suffix_template_);
    if (tail.size() < kHistorySlot.size() || tail.substr(tail.size() - kHistorySlot.size()) != kHistorySlot) {
        throw InvalidInput("prompt suffix must end with the {history} slot");
    }
    return tmpl;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

std::string render_history(const std::vector<QaPair>& history, const std::string& question) {
    std::string out;
    for (const auto& [q, a] : history) out += "Question: " + q + "\nAnswer: " + a + "\n";
    out += "Question: " + question + "\nAnswer:";
    return out;
}

std::string PromptTemplate::suffix(const std::vector<QaPair>& history, const std::string& question) const {
    return replace_once(suffix_template_, kHistorySlot, render_history(history, question));
}

std::string PromptTemplate::text_prompt(const std::vector<std::string>& evidence, const std::vector<QaPair>& history,
                                        const std::string& question) const {
    std::string block;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (i > 0) block += '\n';
        block += "<evidence>" + evidence[i] + "</evidence>";
    }
    return prefix_ + block + suffix(history, question);
}

AssembledInput assemble_embeddings(const std::string& prefix, const Matrix& graph_embeddings,
                                   const std::string& suffix, const ToyLmParams& params, const Vocab& vocab) {
    const std::size_t d = params.d_model();
    if (!graph_embeddings.empty() && graph_embeddings.cols() != d) {
        throw InvalidState("graph embeddings have width " + std::to_string(graph_embeddings.cols()) +
                           ", language model expects " + std::to_string(d));
    }
    AssembledInput input;
    input.prefix_ids = token_ids(prefix, vocab);
    input.suffix_ids = token_ids(suffix, vocab);
    const Matrix h_prefix = embed_ids(input.prefix_ids, params);
    const Matrix h_suffix = embed_ids(input.suffix_ids, params);
    const std::size_t n = graph_embeddings.rows();
    input.graph_begin = h_prefix.rows();
    input.graph_end = input.graph_begin + n;
    input.embeddings = Matrix(input.graph_end + h_suffix.rows(), d);
    auto copy_rows = [&](const Matrix& src, std::size_t offset) {
        for (std::size_t r = 0; r < src.rows(); ++r) {
            std::copy(src.row(r).begin(), src.row(r).end(), input.embeddings.row(offset + r).begin());
        }
    };
    copy_rows(h_prefix, 0);
    if (n > 0) copy_rows(graph_embeddings, input.graph_begin);
    copy_rows(h_suffix, input.graph_end);
    return input;
}

nlohmann::json boundary_dump(const AssembledInput& input) {
    return {{"prefix_tokens", input.prefix_ids.size()},
            {"graph_begin", input.graph_begin},
            {"graph_end", input.graph_end},
            {"suffix_tokens", input.suffix_ids.size()},
            {"total_rows", input.embeddings.rows()}};
}

std::vector<TokenId> generate_ids(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters,
                                  std::size_t max_tokens) {
    if (embeddings.rows() == 0) throw InvalidInput("generate: empty input");
    std::vector<TokenId> out;
    Matrix sequence = embeddings;
    for (std::size_t step = 0; step < max_tokens; ++step) {
        const auto result = lm_logits(sequence, params, adapters, LogitRows::Last);
        const auto row = result.logits.row(0);
        const auto next = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
        if (next == Vocab::kEos) break;
        out.push_back(next);
        Matrix extended(sequence.rows() + 1, sequence.cols());
        std::copy(sequence.values().begin(), sequence.values().end(), extended.values().begin());
        const auto e = params.token_embeddings.row(next);
        std::copy(e.begin(), e.end(), extended.row(sequence.rows()).begin());
        sequence = std::move(extended);
    }
    return out;
}

std::string generate(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters,
                     const Vocab& vocab, std::size_t max_tokens) {
    std::vector<std::string> surfaces;
    for (TokenId id : generate_ids(embeddings, params, adapters, max_tokens)) surfaces.push_back(vocab.surface(id));
    return detokenize(surfaces);
}

}  // namespace convgraph
