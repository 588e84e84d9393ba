#pragma once
// Flattening of structured evidence (triples, table rows, infobox entries, text) into strings.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "convgraph/evidence.hpp"

namespace convgraph {

inline constexpr const char* kFieldSeparator = ", ";

struct LinearizeOptions {
    std::string separator = kFieldSeparator;
    bool prepend_title_text = true;
    bool prepend_title_table = true;
    bool prepend_title_kb = false;
};

std::string linearize_triple(const std::string& subject, const std::string& predicate, const std::string& object,
                             const std::string& separator = kFieldSeparator);

std::string linearize_table_row(const std::string& article_title, const std::vector<std::string>& headers,
                                const std::vector<std::string>& cells, bool prepend_title,
                                const std::string& separator = kFieldSeparator);

std::string linearize_infobox(const std::string& article_title, const std::optional<std::string>& header,
                              const std::vector<std::pair<std::string, std::string>>& pairs,
                              const std::string& separator = kFieldSeparator);

// Rule-based splitter: a sentence ends at '.', '!' or '?' followed by whitespace and an
// uppercase letter, or by end of text. A single-letter word ending in '.' that follows
// another word of the same sentence is an initial ("Ralph J. Gleason") and does not split.
std::vector<std::string> split_sentences(const std::string& article_title, const std::string& text,
                                         bool prepend_title);

// Fills `evidence.linearized` from its payload.
void linearize(Evidence& evidence, const LinearizeOptions& options = {});

// Splits multi-sentence text passages into one instance per sentence (ids suffixed
// "#1", "#2", ...) and linearizes every instance. Instances that linearize to an empty
// string are dropped.
std::vector<Evidence> linearize_pool(std::vector<Evidence> pool, const LinearizeOptions& options = {});

}  // namespace convgraph
