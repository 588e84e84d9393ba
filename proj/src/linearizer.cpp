#include "convgraph/linearizer.hpp"

#include <cctype>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

std::string linearize_triple(const std::string& subject, const std::string& predicate, const std::string& object,
                             const std::string& separator) {
    if (subject.empty() || predicate.empty() || object.empty()) {
        throw InvalidInput("linearize_triple: triple elements must be non-empty");
    }
    return subject + separator + predicate + separator + object;
}

std::string linearize_table_row(const std::string& article_title, const std::vector<std::string>& headers,
                                const std::vector<std::string>& cells, bool prepend_title,
                                const std::string& separator) {
    if (headers.empty() || cells.empty()) throw InvalidInput("linearize_table_row: empty row");
    if (headers.size() != cells.size()) {
        throw InvalidInput("linearize_table_row: " + std::to_string(headers.size()) + " headers but " +
                           std::to_string(cells.size()) + " cells");
    }
    std::string out;
    if (prepend_title && !article_title.empty()) out = article_title + separator;
    for (std::size_t i = 0; i < headers.size(); ++i) {
        if (i > 0) out += separator;
        out += headers[i] + " " + cells[i];
    }
    return out;
}

std::string linearize_infobox(const std::string& article_title, const std::optional<std::string>& header,
                              const std::vector<std::pair<std::string, std::string>>& pairs,
                              const std::string& separator) {
    if (pairs.empty()) throw InvalidInput("linearize_infobox: no key-value pairs");
    std::string out = article_title;
    auto append = [&](const std::string& piece) {
        if (!out.empty()) out += separator;
        out += piece;
    };
    if (header && !header->empty()) append(*header);
    for (const auto& [key, value] : pairs) append(key + " " + value);
    return out;
}

namespace {

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// True when text[pos] == '.' closes a single-letter word that follows another word
// of the sentence starting at `sentence_start`.
bool is_initial(const std::string& text, std::size_t sentence_start, std::size_t pos) {
    if (pos == 0 || !is_alpha(text[pos - 1])) return false;
    const std::size_t letter = pos - 1;
    if (letter > sentence_start && !is_space(text[letter - 1])) return false;
    for (std::size_t i = sentence_start; i < letter; ++i) {
        if (!is_space(text[i])) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& article_title, const std::string& text,
                                         bool prepend_title) {
    std::vector<std::string> sentences;
    auto emit = [&](std::size_t begin, std::size_t end) {
        const auto piece = trim(std::string_view(text).substr(begin, end - begin));
        if (piece.empty()) return;
        std::string sentence(piece);
        if (prepend_title && !article_title.empty()) sentence = article_title + ": " + sentence;
        sentences.push_back(std::move(sentence));
    };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_terminator(text[i])) {
            ++i;
            continue;
        }
        const std::size_t terminator = i;
        std::size_t end = i + 1;
        while (end < text.size() && (is_terminator(text[end]) || is_closer(text[end]))) ++end;
        std::size_t next = end;
        while (next < text.size() && is_space(text[next])) ++next;
        const bool at_end = next == text.size();
        const bool boundary = at_end || (next > end && is_upper(text[next]));
        const bool guarded = text[terminator] == '.' && end == terminator + 1 && is_initial(text, start, terminator);
        if (boundary && !guarded) {
            emit(start, end);
            start = next;
        }
        i = end;
    }
    emit(start, text.size());
    return sentences;
}

void linearize(Evidence& evidence, const LinearizeOptions& options) {
    const std::string title = evidence.article_title.value_or("");
    evidence.linearized = std::visit(
        [&](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TriplePayload>) {
                auto out = linearize_triple(p.subject, p.predicate, p.object, options.separator);
                if (options.prepend_title_kb && !title.empty()) out = title + options.separator + out;
                return out;
            } else if constexpr (std::is_same_v<T, TableRowPayload>) {
                return linearize_table_row(title, p.headers, p.cells, options.prepend_title_table, options.separator);
            } else if constexpr (std::is_same_v<T, InfoboxPayload>) {
                return linearize_infobox(title, p.header, p.pairs, options.separator);
            } else {
                std::string sentence(trim(p.sentence));
                if (options.prepend_title_text && !title.empty() && !sentence.empty()) {
                    sentence = title + ": " + sentence;
                }
                return sentence;
            }
        },
        evidence.payload);
}

std::vector<Evidence> linearize_pool(std::vector<Evidence> pool, const LinearizeOptions& options) {
    std::vector<Evidence> out;
    out.reserve(pool.size());
    for (auto& evidence : pool) {
        if (auto* sentence = std::get_if<SentencePayload>(&evidence.payload)) {
            auto parts = split_sentences("", sentence->sentence, false);
            if (parts.size() > 1) {
                for (std::size_t i = 0; i < parts.size(); ++i) {
                    Evidence piece = evidence;
                    piece.evidence_id = evidence.evidence_id + "#" + std::to_string(i + 1);
                    piece.payload = SentencePayload{parts[i]};
                    linearize(piece, options);
                    out.push_back(std::move(piece));
                }
                continue;
            }
        }
        linearize(evidence, options);
        if (!evidence.linearized.empty()) out.push_back(std::move(evidence));
    }
    return out;
}

}  // namespace convgraph
