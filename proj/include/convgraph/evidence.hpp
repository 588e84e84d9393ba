#pragma once
// Conversations, evidence instances and conversational queries.
//
// Every type here round-trips through nlohmann::json; the JSON field names
// are the on-disk schema of interactions.jsonl and the evidence pool files.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace convgraph {

enum class SourceKind { KB, Text, Table, Infobox };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

struct Turn {
    std::size_t index = 1;
    std::string question;
    std::string gold_answer;
    std::vector<std::string> answer_aliases;
    std::optional<SourceKind> answer_source;
    std::string domain;

    bool operator==(const Turn&) const = default;
};

struct Interaction {
    std::string conv_id;
    std::string domain;
    std::vector<Turn> turns;

    bool operator==(const Interaction&) const = default;
};

struct EntityRef {
    std::string entity_id;
    std::string label;
    std::vector<std::string> aliases;

    bool operator==(const EntityRef&) const = default;
};

// Builds an EntityRef with aliases deduplicated case-insensitively (first spelling wins).
EntityRef make_entity(std::string entity_id, std::string label, std::vector<std::string> aliases = {});

struct TriplePayload {
    std::string subject;
    std::string predicate;
    std::string object;
    bool operator==(const TriplePayload&) const = default;
};

struct TableRowPayload {
    std::vector<std::string> headers;
    std::vector<std::string> cells;
    bool operator==(const TableRowPayload&) const = default;
};

struct InfoboxPayload {
    std::optional<std::string> header;
    std::vector<std::pair<std::string, std::string>> pairs;
    bool operator==(const InfoboxPayload&) const = default;
};

struct SentencePayload {
    std::string sentence;
    bool operator==(const SentencePayload&) const = default;
};

using EvidencePayload = std::variant<TriplePayload, TableRowPayload, InfoboxPayload, SentencePayload>;

struct Evidence {
    std::string evidence_id;
    SourceKind source_kind = SourceKind::KB;
    std::optional<std::string> article_title;
    EvidencePayload payload;
    std::string linearized;
    std::vector<EntityRef> entities;
    std::size_t origin_turn = 1;

    bool operator==(const Evidence&) const = default;
};

enum class QueryRole { Question, Answer };

struct QueryPart {
    QueryRole role = QueryRole::Question;
    std::string text;
    bool operator==(const QueryPart&) const = default;
};

struct ConversationQuery {
    std::size_t turn = 1;
    std::string text;
    std::vector<QueryPart> parts;

    bool operator==(const ConversationQuery&) const = default;
};

using QaPair = std::pair<std::string, std::string>;

// Q_t = [q_1, a_1, ..., q_{t-1}, a_{t-1}, q_t], joined with single spaces.
ConversationQuery build_query(const std::vector<QaPair>& history, const std::string& question);

// One evidence pool as retrieved for a (conversation, turn).
struct EvidencePool {
    std::string conv_id;
    std::size_t turn = 1;
    std::vector<Evidence> evidence;

    bool operator==(const EvidencePool&) const = default;
};

void to_json(nlohmann::json& j, const SourceKind& kind);
void from_json(const nlohmann::json& j, SourceKind& kind);
void to_json(nlohmann::json& j, const Turn& turn);
void from_json(const nlohmann::json& j, Turn& turn);
void to_json(nlohmann::json& j, const Interaction& interaction);
void from_json(const nlohmann::json& j, Interaction& interaction);
void to_json(nlohmann::json& j, const EntityRef& entity);
void from_json(const nlohmann::json& j, EntityRef& entity);
void to_json(nlohmann::json& j, const Evidence& evidence);
void from_json(const nlohmann::json& j, Evidence& evidence);
void to_json(nlohmann::json& j, const ConversationQuery& query);
void from_json(const nlohmann::json& j, ConversationQuery& query);
void to_json(nlohmann::json& j, const EvidencePool& pool);
void from_json(const nlohmann::json& j, EvidencePool& pool);

// JSON-lines helpers. Errors carry the path and 1-based line number.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records);

std::vector<Interaction> load_interactions(const std::string& path);
std::vector<EvidencePool> load_pools(const std::string& path);
std::vector<EntityRef> load_entities(const std::string& path);

}  // namespace convgraph
