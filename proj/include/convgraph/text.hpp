#pragma once
// ASCII case folding and the shared tokenizer used by ranking and graph construction.

#include <string>
#include <string_view>
#include <vector>

namespace convgraph {

std::string to_lower(std::string_view text);
std::string_view trim(std::string_view text);

// Lowercase + trim; the comparison key for answers and entity labels.
std::string fold(std::string_view text);

// Lowercases and splits on whitespace and ASCII punctuation. With `keep_punctuation`
// each punctuation mark becomes its own token, otherwise it is dropped.
std::vector<std::string> split_tokens(std::string_view text, bool keep_punctuation);

// Word tokens for ranking (punctuation dropped).
inline std::vector<std::string> word_tokens(std::string_view text) { return split_tokens(text, false); }

bool is_punctuation_token(std::string_view token);

// Joins generated tokens back into text: closing punctuation attaches to the left,
// hyphens and slashes glue both neighbours.
std::string detokenize(const std::vector<std::string>& tokens);

}  // namespace convgraph
