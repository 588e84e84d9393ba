#include "convgraph/evidence.hpp"

#include <fstream>
#include <unordered_set>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

using nlohmann::json;

std::string_view to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::KB: return "kb";
        case SourceKind::Text: return "text";
        case SourceKind::Table: return "table";
        case SourceKind::Infobox: return "infobox";
    }
    return "kb";
}

SourceKind parse_source_kind(std::string_view text) {
    const std::string lowered = to_lower(text);
    if (lowered == "kb") return SourceKind::KB;
    if (lowered == "text") return SourceKind::Text;
    if (lowered == "table") return SourceKind::Table;
    if (lowered == "infobox") return SourceKind::Infobox;
    throw InvalidInput("unknown source kind '" + std::string(text) + "'");
}

EntityRef make_entity(std::string entity_id, std::string label, std::vector<std::string> aliases) {
    if (label.empty()) throw InvalidInput("entity '" + entity_id + "' has an empty label");
    EntityRef entity{std::move(entity_id), std::move(label), {}};
    std::unordered_set<std::string> seen;
    for (auto& alias : aliases) {
        if (seen.insert(to_lower(alias)).second) entity.aliases.push_back(std::move(alias));
    }
    return entity;
}

ConversationQuery build_query(const std::vector<QaPair>& history, const std::string& question) {
    if (question.empty()) throw InvalidInput("build_query: current question is empty");
    ConversationQuery query;
    query.turn = history.size() + 1;
    query.parts.reserve(2 * history.size() + 1);
    for (const auto& [q, a] : history) {
        if (q.empty() || a.empty()) throw InvalidInput("build_query: history entries must be non-empty");
        query.parts.push_back({QueryRole::Question, q});
        query.parts.push_back({QueryRole::Answer, a});
    }
    query.parts.push_back({QueryRole::Question, question});
    for (std::size_t i = 0; i < query.parts.size(); ++i) {
        if (i > 0) query.text += ' ';
        query.text += query.parts[i].text;
    }
    return query;
}

void to_json(json& j, const SourceKind& kind) { j = std::string(to_string(kind)); }
void from_json(const json& j, SourceKind& kind) { kind = parse_source_kind(j.get<std::string>()); }

void to_json(json& j, const Turn& turn) {
    j = json{{"index", turn.index}, {"question", turn.question}, {"answer", turn.gold_answer}};
    if (!turn.answer_aliases.empty()) j["answer_aliases"] = turn.answer_aliases;
    if (turn.answer_source) j["answer_source"] = *turn.answer_source;
    if (!turn.domain.empty()) j["domain"] = turn.domain;
}

void from_json(const json& j, Turn& turn) {
    turn.index = j.at("index").get<std::size_t>();
    turn.question = j.at("question").get<std::string>();
    turn.gold_answer = j.at("answer").get<std::string>();
    turn.answer_aliases = j.value("answer_aliases", std::vector<std::string>{});
    turn.answer_source.reset();
    if (j.contains("answer_source") && !j["answer_source"].is_null()) {
        turn.answer_source = j["answer_source"].get<SourceKind>();
    }
    turn.domain = j.value("domain", std::string{});
    if (turn.index < 1) throw InvalidInput("turn index must be >= 1");
    if (turn.question.empty()) throw InvalidInput("turn question must be non-empty");
}

void to_json(json& j, const Interaction& interaction) {
    j = json{{"conv_id", interaction.conv_id}, {"domain", interaction.domain}, {"turns", interaction.turns}};
}

void from_json(const json& j, Interaction& interaction) {
    interaction.conv_id = j.at("conv_id").get<std::string>();
    interaction.domain = j.value("domain", std::string{});
    interaction.turns = j.at("turns").get<std::vector<Turn>>();
    for (std::size_t i = 0; i < interaction.turns.size(); ++i) {
        auto& turn = interaction.turns[i];
        if (turn.index != i + 1) {
            throw InvalidInput("conversation '" + interaction.conv_id + "': turn indices must be contiguous from 1");
        }
        if (turn.domain.empty()) turn.domain = interaction.domain;
    }
}

void to_json(json& j, const EntityRef& entity) {
    j = json{{"id", entity.entity_id}, {"label", entity.label}, {"aliases", entity.aliases}};
}

void from_json(const json& j, EntityRef& entity) {
    entity = make_entity(j.at("id").get<std::string>(), j.at("label").get<std::string>(),
                         j.value("aliases", std::vector<std::string>{}));
}

namespace {

json payload_to_json(const EvidencePayload& payload) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TriplePayload>) {
                return {{"subject", p.subject}, {"predicate", p.predicate}, {"object", p.object}};
            } else if constexpr (std::is_same_v<T, TableRowPayload>) {
                return {{"headers", p.headers}, {"cells", p.cells}};
            } else if constexpr (std::is_same_v<T, InfoboxPayload>) {
                json pairs = json::array();
                for (const auto& [key, value] : p.pairs) pairs.push_back({key, value});
                json out{{"pairs", pairs}};
                if (p.header) out["header"] = *p.header;
                return out;
            } else {
                return {{"sentence", p.sentence}};
            }
        },
        payload);
}

EvidencePayload payload_from_json(SourceKind kind, const json& j) {
    switch (kind) {
        case SourceKind::KB:
            return TriplePayload{j.at("subject").get<std::string>(), j.at("predicate").get<std::string>(),
                                 j.at("object").get<std::string>()};
        case SourceKind::Table:
            return TableRowPayload{j.at("headers").get<std::vector<std::string>>(),
                                   j.at("cells").get<std::vector<std::string>>()};
        case SourceKind::Infobox: {
            InfoboxPayload p;
            if (j.contains("header") && !j["header"].is_null()) p.header = j["header"].get<std::string>();
            for (const auto& pair : j.at("pairs")) {
                p.pairs.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
            }
            return p;
        }
        case SourceKind::Text:
            // Raw passages arrive as "text" and are split into sentences at ingest.
            if (j.contains("sentence")) return SentencePayload{j["sentence"].get<std::string>()};
            return SentencePayload{j.at("text").get<std::string>()};
    }
    throw InvalidInput("unhandled source kind");
}

}  // namespace

void to_json(json& j, const Evidence& evidence) {
    j = json{{"evidence_id", evidence.evidence_id},
             {"source_kind", evidence.source_kind},
             {"payload", payload_to_json(evidence.payload)},
             {"linearized", evidence.linearized},
             {"entities", evidence.entities},
             {"origin_turn", evidence.origin_turn}};
    j["article_title"] = evidence.article_title ? json(*evidence.article_title) : json(nullptr);
}

void from_json(const json& j, Evidence& evidence) {
    evidence.evidence_id = j.at("evidence_id").get<std::string>();
    evidence.source_kind = j.at("source_kind").get<SourceKind>();
    evidence.article_title.reset();
    if (j.contains("article_title") && !j["article_title"].is_null()) {
        evidence.article_title = j["article_title"].get<std::string>();
    }
    evidence.payload = payload_from_json(evidence.source_kind, j.at("payload"));
    evidence.linearized = j.value("linearized", std::string{});
    evidence.entities = j.value("entities", std::vector<EntityRef>{});
    evidence.origin_turn = j.value("origin_turn", std::size_t{1});
    if (evidence.origin_turn < 1) throw InvalidInput("evidence origin_turn must be >= 1");
}

void to_json(json& j, const ConversationQuery& query) {
    json parts = json::array();
    for (const auto& part : query.parts) {
        parts.push_back({{"role", part.role == QueryRole::Question ? "question" : "answer"}, {"text", part.text}});
    }
    j = json{{"turn", query.turn}, {"text", query.text}, {"parts", parts}};
}

void from_json(const json& j, ConversationQuery& query) {
    query.turn = j.at("turn").get<std::size_t>();
    query.text = j.at("text").get<std::string>();
    query.parts.clear();
    for (const auto& part : j.at("parts")) {
        const auto role = part.at("role").get<std::string>();
        query.parts.push_back({role == "answer" ? QueryRole::Answer : QueryRole::Question,
                               part.at("text").get<std::string>()});
    }
}

void to_json(json& j, const EvidencePool& pool) {
    j = json{{"conv_id", pool.conv_id}, {"turn", pool.turn}, {"evidence", pool.evidence}};
}

void from_json(const json& j, EvidencePool& pool) {
    pool.conv_id = j.at("conv_id").get<std::string>();
    pool.turn = j.at("turn").get<std::size_t>();
    pool.evidence = j.at("evidence").get<std::vector<Evidence>>();
    std::unordered_set<std::string> ids;
    for (const auto& ev : pool.evidence) {
        if (!ids.insert(ev.evidence_id).second) {
            throw InvalidInput("duplicate evidence_id '" + ev.evidence_id + "' in pool " + pool.conv_id);
        }
    }
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), e.byte);
        }
    }
    return records;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& record : records) out << record.dump() << '\n';
}

namespace {

template <typename T>
std::vector<T> load_typed(const std::string& path) {
    std::vector<T> out;
    std::size_t line_no = 0;
    for (const auto& record : read_jsonl(path)) {
        ++line_no;
        try {
            out.push_back(record.get<T>());
        } catch (const std::exception& e) {
            throw InvalidInput(path + ": record " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

std::vector<Interaction> load_interactions(const std::string& path) { return load_typed<Interaction>(path); }
std::vector<EvidencePool> load_pools(const std::string& path) { return load_typed<EvidencePool>(path); }
std::vector<EntityRef> load_entities(const std::string& path) { return load_typed<EntityRef>(path); }

}  // namespace convgraph
