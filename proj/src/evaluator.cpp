#include "convgraph/evaluator.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <regex>
#include <set>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"january", "february", "march",     "april",   "may",      "june",
                                                      "july",    "august",   "september", "october", "november", "december"};

bool is_month(const std::string& word) {
    return std::find(kMonths.begin(), kMonths.end(), to_lower(word)) != kMonths.end();
}

bool valid_day(int day) { return day >= 1 && day <= 31; }
bool valid_month(int month) { return month >= 1 && month <= 12; }
bool valid_year(int year) { return year >= 1000 && year <= 2999; }

bool is_date(const std::string& s) {
    static const std::regex day_month_year(R"((\d{1,2}) ([A-Za-z]+) (\d{4}))");
    static const std::regex month_day_year(R"(([A-Za-z]+) (\d{1,2}), (\d{4}))");
    static const std::regex iso(R"((\d{4})-(\d{2})-(\d{2}))");
    static const std::regex slashed(R"((\d{1,2})/(\d{1,2})/(\d{4}))");
    static const std::regex year(R"(\d{4})");
    std::smatch m;
    if (std::regex_match(s, m, day_month_year)) {
        return valid_day(std::stoi(m[1])) && is_month(m[2]) && valid_year(std::stoi(m[3]));
    }
    if (std::regex_match(s, m, month_day_year)) {
        return is_month(m[1]) && valid_day(std::stoi(m[2])) && valid_year(std::stoi(m[3]));
    }
    if (std::regex_match(s, m, iso)) {
        return valid_year(std::stoi(m[1])) && valid_month(std::stoi(m[2])) && valid_day(std::stoi(m[3]));
    }
    if (std::regex_match(s, m, slashed)) {
        return valid_day(std::stoi(m[1])) && valid_month(std::stoi(m[2])) && valid_year(std::stoi(m[3]));
    }
    return std::regex_match(s, year) && valid_year(std::stoi(s));
}

bool is_number(const std::string& s) {
    static const std::regex number(R"([+-]?(\d{1,3}(,\d{3})+|\d+)(\.\d+)?)");
    return std::regex_match(s, number);
}

StratumStats& add(StratumStats& stats, const EvalRecord& r) {
    ++stats.count;
    stats.hits1 += r.hit1 ? 1 : 0;
    stats.hits5 += r.hit5 ? 1 : 0;
    return stats;
}

nlohmann::json stats_json(const StratumStats& s) {
    return {{"count", s.count}, {"hits1", s.hits1}, {"hits5", s.hits5}, {"h1", s.h1()}, {"h5", s.h5()}};
}

template <typename Key>
nlohmann::json table_json(const std::map<Key, StratumStats>& table) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, stats] : table) {
        if constexpr (std::is_same_v<Key, std::string>) {
            out[key] = stats_json(stats);
        } else {
            out[std::to_string(key)] = stats_json(stats);
        }
    }
    return out;
}

}  // namespace

std::string_view to_string(AnswerType type) {
    switch (type) {
        case AnswerType::Date: return "Date";
        case AnswerType::Number: return "Number";
        case AnswerType::String: return "String";
    }
    return "String";
}

AnswerType parse_answer_type(std::string_view text) {
    if (text == "Date") return AnswerType::Date;
    if (text == "Number") return AnswerType::Number;
    if (text == "String") return AnswerType::String;
    throw InvalidInput("unknown answer type '" + std::string(text) + "'");
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
    const std::string x = fold(a);
    const std::string y = fold(b);
    std::vector<std::size_t> row(y.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t{0});
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = std::min({above + 1, row[j - 1] + 1, diagonal + (x[i - 1] == y[j - 1] ? 0 : 1)});
            diagonal = above;
        }
    }
    return row[y.size()];
}

std::vector<std::string> normalize_answer(const std::string& generated, const std::vector<EntityRef>& candidates,
                                          std::size_t topk) {
    if (topk < 1) throw InvalidInput("normalize_answer: topk must be >= 1");
    if (candidates.empty()) return {generated};

    const std::string key = fold(generated);
    struct Scored {
        std::size_t distance;
        std::string label;
    };
    std::vector<Scored> scored;
    std::set<std::string> seen;
    std::optional<std::string> exact;
    for (const auto& entity : candidates) {
        if (!seen.insert(fold(entity.label)).second) continue;
        bool hit = fold(entity.label) == key;
        for (const auto& alias : entity.aliases) hit = hit || fold(alias) == key;
        if (hit && !exact) {
            exact = entity.label;
            continue;
        }
        scored.push_back({levenshtein(generated, entity.label), entity.label});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.label < b.label;
    });

    std::vector<std::string> ranking;
    if (exact) ranking.push_back(*exact);
    for (const auto& s : scored) {
        if (ranking.size() == topk) break;
        ranking.push_back(s.label);
    }
    return ranking;
}

AnswerType classify_answer_type(std::string_view answer) {
    const std::string s(trim(answer));
    if (is_date(s)) return AnswerType::Date;
    if (is_number(s)) return AnswerType::Number;
    return AnswerType::String;
}

bool matches_gold(std::string_view answer, const std::string& gold, const std::vector<std::string>& aliases) {
    const std::string key = fold(answer);
    if (key == fold(gold)) return true;
    return std::any_of(aliases.begin(), aliases.end(), [&](const std::string& a) { return fold(a) == key; });
}

EvalRecord score_turn(const TurnScoreInput& input, const std::vector<std::string>& ranking) {
    EvalRecord r;
    r.conv_id = input.conv_id;
    r.turn = input.turn;
    r.domain = input.domain;
    r.answer_source = input.answer_source;
    r.generated = input.generated;
    r.gold = input.gold;
    r.gold_aliases = input.gold_aliases;
    r.ranking = ranking;
    r.answer_type = classify_answer_type(input.gold);
    if (matches_gold(input.generated, input.gold, input.gold_aliases)) {
        r.normalized = input.generated;
        r.hit1 = r.hit5 = true;
        return r;
    }
    r.normalized = ranking.empty() ? input.generated : ranking.front();
    r.hit1 = matches_gold(r.normalized, input.gold, input.gold_aliases);
    const std::size_t depth = std::min<std::size_t>(5, ranking.size());
    r.hit5 = r.hit1 || std::any_of(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(depth),
                                   [&](const std::string& label) { return matches_gold(label, input.gold, input.gold_aliases); });
    return r;
}

MetricsReport stratify(const std::vector<EvalRecord>& records) {
    MetricsReport report;
    for (const auto& r : records) {
        add(report.overall, r);
        add(report.by_domain[r.domain.empty() ? kUnknownStratum : r.domain], r);
        add(report.by_source[r.answer_source ? std::string(to_string(*r.answer_source)) : kUnknownStratum], r);
        add(report.by_turn[r.turn], r);
        add(report.by_answer_type[std::string(to_string(r.answer_type))], r);
    }
    return report;
}

nlohmann::json report_json(const MetricsReport& report) {
    return {{"overall", stats_json(report.overall)},
            {"by_domain", table_json(report.by_domain)},
            {"by_source", table_json(report.by_source)},
            {"by_turn", table_json(report.by_turn)},
            {"by_answer_type", table_json(report.by_answer_type)}};
}

std::string report_text(const MetricsReport& report) { return report_json(report).dump(2) + "\n"; }

void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = {{"conv_id", r.conv_id},
         {"turn", r.turn},
         {"domain", r.domain},
         {"answer_source", r.answer_source ? nlohmann::json(std::string(to_string(*r.answer_source))) : nlohmann::json()},
         {"generated", r.generated},
         {"normalized", r.normalized},
         {"ranking", r.ranking},
         {"gold", r.gold},
         {"gold_aliases", r.gold_aliases},
         {"hit1", r.hit1},
         {"hit5", r.hit5},
         {"answer_type", std::string(to_string(r.answer_type))}};
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
    r.conv_id = j.at("conv_id").get<std::string>();
    r.turn = j.at("turn").get<std::size_t>();
    r.domain = j.value("domain", std::string());
    r.answer_source.reset();
    if (j.contains("answer_source") && !j.at("answer_source").is_null()) {
        r.answer_source = parse_source_kind(j.at("answer_source").get<std::string>());
    }
    r.generated = j.at("generated").get<std::string>();
    r.normalized = j.value("normalized", r.generated);
    r.ranking = j.value("ranking", std::vector<std::string>{});
    r.gold = j.at("gold").get<std::string>();
    r.gold_aliases = j.value("gold_aliases", std::vector<std::string>{});
    r.hit1 = j.at("hit1").get<bool>();
    r.hit5 = j.at("hit5").get<bool>();
    r.answer_type = j.contains("answer_type") ? parse_answer_type(j.at("answer_type").get<std::string>())
                                              : classify_answer_type(r.gold);
    if (r.hit1 && !r.hit5) throw InvalidInput("record " + r.conv_id + "/" + std::to_string(r.turn) + " has hit1 without hit5");
}

std::vector<EvalRecord> load_eval_records(const std::string& path) {
    std::vector<EvalRecord> records;
    for (const auto& j : read_jsonl(path)) records.push_back(j.get<EvalRecord>());
    return records;
}

void write_eval_records(const std::string& path, const std::vector<EvalRecord>& records) {
    std::vector<nlohmann::json> lines;
    lines.reserve(records.size());
    for (const auto& r : records) lines.emplace_back(r);
    write_jsonl(path, lines);
}

}  // namespace convgraph
