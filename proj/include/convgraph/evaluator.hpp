#pragma once
// Answer normalization against retrieved entities, hit@1 / hit@5 scoring, answer-type
// classification and stratified metric reports.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "convgraph/evidence.hpp"

namespace convgraph {

enum class AnswerType { Date, Number, String };

std::string_view to_string(AnswerType type);
AnswerType parse_answer_type(std::string_view text);

// Edit distance with unit costs over fold()ed strings.
std::size_t levenshtein(std::string_view a, std::string_view b);

// Top `topk` distinct entity labels. An exact (folded) label or alias match ranks first;
// the rest follow by ascending label distance, ties by label.
std::vector<std::string> normalize_answer(const std::string& generated, const std::vector<EntityRef>& candidates,
                                          std::size_t topk = 5);

AnswerType classify_answer_type(std::string_view answer);

struct EvalRecord {
    std::string conv_id;
    std::size_t turn = 0;
    std::string domain;
    std::optional<SourceKind> answer_source;
    std::string generated;
    std::string normalized;
    std::vector<std::string> ranking;
    std::string gold;
    std::vector<std::string> gold_aliases;
    bool hit1 = false;
    bool hit5 = false;
    AnswerType answer_type = AnswerType::String;
};

struct TurnScoreInput {
    std::string conv_id;
    std::size_t turn = 0;
    std::string domain;
    std::optional<SourceKind> answer_source;
    std::string generated;
    std::string gold;
    std::vector<std::string> gold_aliases;
};

// `ranking` is the output of normalize_answer. A generated answer equal to the gold
// answer (or an alias) scores as a hit without normalization.
EvalRecord score_turn(const TurnScoreInput& input, const std::vector<std::string>& ranking);

bool matches_gold(std::string_view answer, const std::string& gold, const std::vector<std::string>& aliases);

struct StratumStats {
    std::size_t count = 0;
    std::size_t hits1 = 0;
    std::size_t hits5 = 0;

    double h1() const { return count == 0 ? 0.0 : static_cast<double>(hits1) / static_cast<double>(count); }
    double h5() const { return count == 0 ? 0.0 : static_cast<double>(hits5) / static_cast<double>(count); }
};

struct MetricsReport {
    StratumStats overall;
    std::map<std::string, StratumStats> by_domain;
    std::map<std::string, StratumStats> by_source;
    std::map<std::size_t, StratumStats> by_turn;
    std::map<std::string, StratumStats> by_answer_type;
};

inline constexpr const char* kUnknownStratum = "unknown";

MetricsReport stratify(const std::vector<EvalRecord>& records);

nlohmann::json report_json(const MetricsReport& report);
// Pretty-printed with sorted keys and a trailing newline.
std::string report_text(const MetricsReport& report);

void to_json(nlohmann::json& j, const EvalRecord& record);
void from_json(const nlohmann::json& j, EvalRecord& record);

std::vector<EvalRecord> load_eval_records(const std::string& path);
void write_eval_records(const std::string& path, const std::vector<EvalRecord>& records);

}  // namespace convgraph
