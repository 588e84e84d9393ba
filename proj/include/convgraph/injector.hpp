#pragma once
// Prompt templates and composite-embedding assembly: H = H_prefix (+) H_g (+) H_suffix.

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "convgraph/evidence.hpp"
#include "convgraph/graph.hpp"
#include "convgraph/lm.hpp"

namespace convgraph {

// A template is one text with an {evidence} slot (where graph embeddings, or <evidence>
// lines for the text-only variant, go) and a {history} slot for the question/answer transcript.
class PromptTemplate {
public:
    static PromptTemplate default_template();
    static PromptTemplate from_text(const std::string& text);
    static PromptTemplate load(const std::string& path);

    // P_prefix: everything before {evidence}.
    const std::string& prefix() const { return prefix_; }
    // P_suffix for a turn: everything after {evidence} with {history} filled in.
    std::string suffix(const std::vector<QaPair>& history, const std::string& question) const;
    // Whole prompt with evidence inlined as <evidence>...</evidence> lines.
    std::string text_prompt(const std::vector<std::string>& evidence, const std::vector<QaPair>& history,
                            const std::string& question) const;

private:
    std::string prefix_;
    std::string suffix_template_;
};

// "Question: q_1\nAnswer: a_1\n...Question: q_t\nAnswer:"
std::string render_history(const std::vector<QaPair>& history, const std::string& question);

struct AssembledInput {
    Matrix embeddings;
    std::vector<TokenId> prefix_ids;
    std::vector<TokenId> suffix_ids;
    std::size_t graph_begin = 0;  // first graph row
    std::size_t graph_end = 0;    // one past the last graph row
};

AssembledInput assemble_embeddings(const std::string& prefix, const Matrix& graph_embeddings,
                                   const std::string& suffix, const ToyLmParams& params, const Vocab& vocab);

nlohmann::json boundary_dump(const AssembledInput& input);

// Greedy decoding from the end of H. Stops at eos or after `max_tokens` tokens.
std::vector<TokenId> generate_ids(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters,
                                  std::size_t max_tokens = 32);
std::string generate(const Matrix& embeddings, const ToyLmParams& params, const LoraAdapters& adapters,
                     const Vocab& vocab, std::size_t max_tokens = 32);

}  // namespace convgraph
