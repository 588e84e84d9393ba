#include "convgraph/text.hpp"

#include <cctype>

namespace convgraph {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string to_lower(std::string_view text) {
    std::string out(text);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
    while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
    return text;
}

std::string fold(std::string_view text) { return to_lower(trim(text)); }

std::vector<std::string> split_tokens(std::string_view text, bool keep_punctuation) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (char c : text) {
        if (is_space(c)) {
            flush();
        } else if (is_punct(c)) {
            flush();
            if (keep_punctuation) tokens.emplace_back(1, c);
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return tokens;
}

bool is_punctuation_token(std::string_view token) { return token.size() == 1 && is_punct(token[0]); }

std::string detokenize(const std::vector<std::string>& tokens) {
    std::string out;
    bool glue_next = true;
    for (const auto& token : tokens) {
        const bool closing = token.size() == 1 && std::string_view(",.!?:;)]}%'").find(token[0]) != std::string_view::npos;
        const bool joiner = token == "-" || token == "/";
        if (!glue_next && !closing && !joiner) out += ' ';
        out += token;
        glue_next = joiner || token == "(" || token == "[" || token == "{";
    }
    return out;
}

}  // namespace convgraph
