#include "convgraph/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "convgraph/error.hpp"
#include "convgraph/text.hpp"

namespace convgraph {

namespace {

Evidence sentence(const std::string& id, const std::string& text, std::vector<EntityRef> entities = {}) {
    Evidence e;
    e.evidence_id = id;
    e.source_kind = SourceKind::Text;
    e.payload = SentencePayload{text};
    e.linearized = text;
    e.entities = std::move(entities);
    return e;
}

std::string numbered(const char* stem, std::size_t i) { return stem + std::to_string(i); }

std::size_t draw(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

// `count` distinct indices below `n`.
std::vector<std::size_t> sample_distinct(Rng& rng, std::size_t n, std::size_t count) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    return all;
}

}  // namespace

SyntheticDataset make_overfit_dataset(std::size_t count, std::uint64_t seed) {
    if (count == 0) throw InvalidInput("overfit dataset needs at least one example");
    static const std::vector<std::string> relations = {"rank", "year", "score", "label", "city"};
    static const std::vector<std::string> answers = {"7",  "1",        "2009",  "2 october", "paris", "42",
                                                     "3",  "radiohead", "ok computer", "berlin", "12",  "2000"};
    Rng rng(seed);
    struct Raw {
        std::vector<std::string> facts;
        std::string question;
        std::string answer;
    };
    std::vector<Raw> raw;
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < count; ++i) {
        Raw r;
        const std::string subject = numbered("item", i);
        const std::string relation = relations[draw(rng, relations.size())];
        r.answer = answers[draw(rng, answers.size())];
        r.facts.push_back(subject + " " + relation + " " + r.answer);
        if (draw(rng, 2) == 1) r.facts.push_back(subject + " is listed");
        r.question = "what is the " + relation + " of " + subject + " ?";
        for (const auto& f : r.facts) texts.push_back(f);
        texts.push_back(r.question);
        raw.push_back(std::move(r));
    }
    texts.push_back("facts : question : answer :");

    SyntheticDataset data;
    data.vocab = Vocab::build(texts);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        std::vector<Evidence> instances;
        for (std::size_t f = 0; f < raw[i].facts.size(); ++f) {
            instances.push_back(sentence("ex" + std::to_string(i) + "#" + std::to_string(f + 1), raw[i].facts[f]));
        }
        TrainingExample ex;
        ex.id = numbered("overfit", i);
        ex.graph = build_graph(instances, {}, data.vocab).graph;
        ex.prefix = "facts :";
        ex.suffix = "question : " + raw[i].question + " answer :";
        ex.answer = raw[i].answer;
        data.train.push_back(std::move(ex));
    }
    return data;
}

SyntheticDataset make_two_hop_dataset(const TwoHopOptions& o) {
    if (o.pairs == 0 || o.pairs > std::min({o.subjects, o.bridges, o.values})) {
        throw InvalidInput("two-hop task: pair count must be in [1, min(subjects, bridges, values)]");
    }
    if (o.test_examples >= o.examples) throw InvalidInput("two-hop task: test split must leave training examples");

    std::vector<std::string> texts = {"facts", "who"};
    for (std::size_t i = 0; i < o.subjects; ++i) texts.push_back(numbered("s", i));
    for (std::size_t i = 0; i < o.bridges; ++i) texts.push_back(numbered("b", i));
    for (std::size_t i = 0; i < o.values; ++i) texts.push_back(numbered("v", i));

    SyntheticDataset data;
    data.vocab = Vocab::build(texts);
    for (std::size_t i = 0; i < o.bridges; ++i) {
        data.lexicon.push_back(make_entity(numbered("B", i), numbered("b", i)));
    }

    GraphOptions graph_options;
    graph_options.link_mode = o.link_mode;
    Rng rng(o.seed);
    for (std::size_t n = 0; n < o.examples; ++n) {
        const auto s = sample_distinct(rng, o.subjects, o.pairs);
        const auto b = sample_distinct(rng, o.bridges, o.pairs);
        const auto v = sample_distinct(rng, o.values, o.pairs);
        std::vector<Evidence> instances;
        for (std::size_t p = 0; p < o.pairs; ++p) {
            const EntityRef& bridge = data.lexicon[b[p]];
            instances.push_back(sentence("", numbered("s", s[p]) + " " + bridge.label, {bridge}));
            instances.push_back(sentence("", numbered("v", v[p]) + " " + bridge.label, {bridge}));
        }
        std::shuffle(instances.begin(), instances.end(), rng);
        for (std::size_t k = 0; k < instances.size(); ++k) instances[k].evidence_id = "i" + std::to_string(k);

        TrainingExample ex;
        ex.id = numbered("twohop", n);
        ex.graph = build_graph(instances, data.lexicon, data.vocab, graph_options).graph;
        ex.prefix = "facts";
        ex.suffix = "who " + numbered("s", s[0]);
        ex.answer = numbered("v", v[0]);
        (n + o.test_examples < o.examples ? data.train : data.test).push_back(std::move(ex));
    }
    return data;
}

double exact_match(const std::vector<TrainingExample>& examples, const ModelParams& params, const Vocab& vocab) {
    if (examples.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& ex : examples) {
        if (fold(answer(ex.graph, ex.prefix, ex.suffix, params, vocab, 4)) == fold(ex.answer)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(examples.size());
}

}  // namespace convgraph
