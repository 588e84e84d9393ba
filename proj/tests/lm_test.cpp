#include <doctest.h>

#include <cmath>
#include <random>

#include "convgraph/error.hpp"
#include "convgraph/gradcheck.hpp"
#include "convgraph/injector.hpp"
#include "convgraph/lm.hpp"
#include "convgraph/synthetic.hpp"
#include "convgraph/trainer.hpp"
#include "dense.hpp"
#include "support.hpp"

using namespace convgraph;

namespace {

ToyLmParams small_lm(std::size_t vocab, Rng& rng, std::size_t d = 8) {
    LmConfig c;
    c.vocab_size = vocab;
    c.d_model = d;
    c.d_ff = 2 * d;
    return ToyLmParams::init(c, rng);
}

ModelConfig small_model(std::size_t vocab) {
    ModelConfig c;
    c.lm.vocab_size = vocab;
    c.lm.d_model = 16;
    c.lm.d_ff = 32;
    return c;
}

std::vector<Matrix> snapshot(ToyLmParams& lm) {
    std::vector<Matrix> out;
    for_each_tensor(lm, [&](const std::string&, Matrix& m) { out.push_back(m); });
    return out;
}

std::vector<Matrix> trainables(ModelParams& p) {
    std::vector<Matrix> out;
    for_each_trainable(p, [&](const std::string&, Matrix& m) { out.push_back(m); });
    return out;
}

}  // namespace

TEST_CASE("default prompt template") {
    const auto t = PromptTemplate::default_template();
    CHECK(t.prefix().find("Using the following facts") != std::string::npos);
    const std::string s = t.suffix({{"Fact Rank?", "7"}}, "Ranking on Rolling Stone in 2009?");
    CHECK(s.find("Question: Fact Rank?\nAnswer: 7\n") != std::string::npos);
    CHECK(s.substr(s.size() - 7) == "Answer:");
    const std::string text = t.text_prompt({"Kid A, publication, 2 October 2000"}, {}, "When?");
    CHECK(text.find("<evidence>Kid A, publication, 2 October 2000</evidence>") != std::string::npos);
    CHECK_THROWS_AS(PromptTemplate::from_text("no slot"), InvalidInput);
}

TEST_CASE("token embedding lookup") {
    const Vocab v = Vocab::build({"Answer the following conversational query"});
    Rng rng(1);
    const auto lm = small_lm(v.size(), rng);
    CHECK(embed_tokens("", v, lm).rows() == 0);
    const Matrix one = embed_tokens("query", v, lm);
    REQUIRE(one.rows() == 1);
    for (std::size_t c = 0; c < 8; ++c) CHECK(one(0, c) == lm.token_embeddings(v.id("query"), c));
    CHECK(embed_tokens("Answer the following conversational query", v, lm).rows() == 5);
}

TEST_CASE("composite embedding assembly") {
    const Vocab v = Vocab::build({"facts : question : ranking on rolling stone in 2009 ? answer :"});
    Rng rng(2);
    const auto lm = small_lm(v.size(), rng);
    const Matrix graph = Matrix::randn(40, 8, 1.0, rng);
    const std::string prefix = "facts :";
    const std::string suffix = "question : ranking on rolling stone in 2009 ? answer :";
    const auto input = assemble_embeddings(prefix, graph, suffix, lm, v);
    const std::size_t p = 2, s = 11;
    CHECK(input.embeddings.rows() == p + 40 + s);
    CHECK(input.graph_begin == p);
    CHECK(input.graph_end == p + 40);
    for (std::size_t c = 0; c < 8; ++c) CHECK(input.embeddings(p + 7, c) == graph(7, c));
    const auto dump = boundary_dump(input);
    CHECK(dump["graph_begin"] == p);
    CHECK(dump["graph_end"] == p + 40);

    const auto empty = assemble_embeddings(prefix, Matrix(), suffix, lm, v);
    CHECK(empty.embeddings.rows() == p + s);
    CHECK(empty.graph_begin == empty.graph_end);
    CHECK_THROWS_AS(assemble_embeddings(prefix, Matrix(3, 5), suffix, lm, v), InvalidState);
}

TEST_CASE("LoRA against a dense oracle") {
    Rng rng(3);
    const Matrix base = Matrix::randn(4, 4, 1.0, rng);
    const Matrix input = Matrix::randn(3, 4, 1.0, rng);
    LoraAdapter adapter = LoraAdapter::init(4, 4, 2, 8.0, 0.0, rng);

    SUBCASE("B = 0 is the base map exactly") {
        Matrix expected(3, 4);
        matmul_nt(input, base, expected);
        CHECK(lora_apply(base, adapter, input) == expected);
    }
    SUBCASE("random A and B") {
        adapter.b = Matrix::randn(4, 2, 1.0, rng);
        const Matrix out = lora_apply(base, adapter, input);
        for (std::size_t n = 0; n < 3; ++n) {
            for (std::size_t o = 0; o < 4; ++o) {
                double expected = 0.0;
                for (std::size_t i = 0; i < 4; ++i) expected += base(o, i) * input(n, i);
                for (std::size_t r = 0; r < 2; ++r) {
                    double low = 0.0;
                    for (std::size_t i = 0; i < 4; ++i) low += adapter.a(r, i) * input(n, i);
                    expected += 4.0 * adapter.b(o, r) * low;
                }
                CHECK(std::abs(out(n, o) - expected) < 1e-12);
            }
        }
    }
    SUBCASE("full rank with alpha = r adds B A exactly once") {
        LoraAdapter full = LoraAdapter::init(4, 4, 4, 4.0, 0.0, rng);
        full.b = Matrix::randn(4, 4, 1.0, rng);
        CHECK(full.scale() == 1.0);
        Matrix ba(4, 4);
        matmul_nn(full.b, full.a, ba);
        Matrix merged = base;
        add_inplace(merged, ba);
        Matrix expected(3, 4);
        matmul_nt(input, merged, expected);
        const Matrix out = lora_apply(base, full, input);
        for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out.values()[i] - expected.values()[i]) < 1e-12);
    }
}

TEST_CASE("LoRA at initialisation leaves the model output unchanged") {
    Rng rng(4);
    const auto lm = small_lm(20, rng);
    const auto adapters = LoraAdapters::init(lm, 4, 32.0, 0.05, rng);
    const Matrix h = Matrix::randn(7, 8, 1.0, rng);
    CHECK(lm_logits(h, lm, adapters).logits == lm_logits(h, lm, LoraAdapters{}).logits);
}

TEST_CASE("causal masking") {
    Rng rng(5);
    const auto lm = small_lm(15, rng);
    auto adapters = LoraAdapters::init(lm, 2, 4.0, 0.0, rng);
    for (auto& layer : adapters.layers) {
        for (auto& a : layer) a.b = Matrix::randn(a.b.rows(), a.b.cols(), 0.5, rng);
    }
    const Matrix h = Matrix::randn(9, 8, 1.0, rng);
    const Matrix base = lm_logits(h, lm, adapters).logits;
    for (std::size_t i = 0; i + 1 < 9; ++i) {
        Matrix changed = h;
        for (std::size_t r = i + 1; r < 9; ++r) {
            for (std::size_t c = 0; c < 8; ++c) changed(r, c) += 3.0;
        }
        const Matrix out = lm_logits(changed, lm, adapters).logits;
        for (std::size_t r = 0; r <= i; ++r) {
            for (std::size_t c = 0; c < 15; ++c) CHECK(out(r, c) == base(r, c));
        }
    }
}

TEST_CASE("completion loss") {
    Rng rng(6);
    auto lm = small_lm(12, rng);
    const Matrix h = Matrix::randn(6, 8, 1.0, rng);
    const std::vector<TokenId> targets = {0, 0, 5, 7, 2};
    const std::vector<bool> mask = {false, false, true, true, true};

    SUBCASE("matches the dense softmax oracle") {
        LmOptions options;
        options.rows = LogitRows::All;
        const auto out = lm_forward(h, targets, mask, lm, {}, options);
        oracle::Dense rows;
        std::vector<std::size_t> t;
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (!mask[p]) continue;
            rows.push_back(dense::from(out.logits)[p]);
            t.push_back(targets[p]);
        }
        CHECK(std::abs(out.loss - oracle::mean_cross_entropy(rows, t)) < 1e-12);
    }
    SUBCASE("prompt targets carry zero weight") {
        const double loss = lm_forward(h, targets, mask, lm, {}).loss;
        for (TokenId other = 0; other < 12; ++other) {
            const std::vector<TokenId> perturbed = {other, static_cast<TokenId>(11 - other), 5, 7, 2};
            CHECK(lm_forward(h, perturbed, mask, lm, {}).loss == loss);
        }
    }
    SUBCASE("uniform logits give ln V") {
        lm.token_embeddings.fill(0.0);
        CHECK(lm_forward(h, targets, mask, lm, {}).loss == doctest::Approx(std::log(12.0)).epsilon(1e-14));
    }
    SUBCASE("no completion positions is an error") {
        CHECK_THROWS_AS(lm_forward(h, targets, std::vector<bool>(5, false), lm, {}), InvalidInput);
        CHECK_THROWS_AS(lm_forward(h, {1, 2}, {true, true}, lm, {}), InvalidInput);
    }
}

TEST_CASE("greedy generation edge cases") {
    const Vocab v = Vocab::build({"a b c"});
    Rng rng(7);
    auto lm = small_lm(v.size(), rng);
    const Matrix h = Matrix::randn(3, 8, 1.0, rng);
    CHECK(generate(h, lm, {}, v, 0).empty());

    lm.token_embeddings.fill(0.0);
    for (std::size_t c = 0; c < 8; ++c) {
        lm.final_gain(0, c) = 0.0;
        lm.final_bias(0, c) = 1.0;
        lm.token_embeddings(Vocab::kEos, c) = 1.0;
    }
    CHECK(generate(h, lm, {}, v, 32).empty());
}

TEST_CASE("training sequence layout") {
    const auto data = make_overfit_dataset(3, 2);
    const auto params = ModelParams::init(small_model(data.vocab.size()), 1);
    const auto& ex = data.train[0];
    const Matrix h_g = gat_forward(ex.graph, params.gat, params.nodes);
    const auto seq = build_sequence(ex, h_g, params.lm, data.vocab);
    const std::size_t context = tokenize(ex.prefix, data.vocab).size() + ex.graph.nodes.size() +
                                tokenize(ex.suffix, data.vocab).size();
    const std::size_t answer = tokenize(ex.answer, data.vocab).size();
    CHECK(seq.input.embeddings.rows() == context + answer + 1);
    CHECK(seq.targets.size() == context + answer);
    std::size_t masked = 0;
    for (std::size_t p = 0; p < seq.completion_mask.size(); ++p) {
        masked += seq.completion_mask[p];
        CHECK(seq.completion_mask[p] == (p + 1 >= context));
    }
    CHECK(masked == answer + 1);
    CHECK(seq.targets.back() == Vocab::kEos);
}

TEST_CASE("training contracts") {
    const auto data = make_overfit_dataset(8, 1);
    TrainConfig config;
    config.max_steps = 3;
    config.seed = 4;
    config.lr = 1e-3;

    SUBCASE("learning rate zero changes nothing") {
        auto params = ModelParams::init(small_model(data.vocab.size()), 1);
        const auto before = trainables(params);
        config.lr = 0.0;
        train_loop(data.train, config, params, data.vocab);
        CHECK(trainables(params) == before);
    }
    SUBCASE("base weights are frozen, adapters, GAT and node table move") {
        auto params = ModelParams::init(small_model(data.vocab.size()), 1);
        const auto lm_before = snapshot(params.lm);
        const auto gat_before = params.gat;
        const auto lora_before = params.lora;
        const auto result = train_loop(data.train, config, params, data.vocab);
        CHECK(result.steps == 3);
        CHECK(result.trace.size() == 3 * config.accumulation);
        CHECK(snapshot(params.lm) == lm_before);
        bool gat_moved = false;
        for (std::size_t l = 0; l < gat_before.layers.size(); ++l) {
            for (std::size_t h = 0; h < gat_before.layers[l].heads.size(); ++h) {
                gat_moved |= !(params.gat.layers[l].heads[h].weight == gat_before.layers[l].heads[h].weight);
            }
        }
        CHECK(gat_moved);
        CHECK_FALSE(params.lora.layers[0][0].b == lora_before.layers[0][0].b);

        const TokenId listed = data.vocab.id("listed");
        REQUIRE(listed != Vocab::kUnk);
        bool differs = false;
        for (std::size_t c = 0; c < params.nodes.dim(); ++c) {
            differs |= params.nodes.matrix(listed, c) != params.lm.token_embeddings(listed, c);
        }
        CHECK(differs);
    }
    SUBCASE("one step moves the GAT") {
        auto params = ModelParams::init(small_model(data.vocab.size()), 3);
        const auto before = params.gat.layers[0].heads[0].attention;
        config.max_steps = 1;
        train_loop(data.train, config, params, data.vocab);
        CHECK_FALSE(params.gat.layers[0].heads[0].attention == before);
    }
    SUBCASE("same seed, same loss trace") {
        auto a = ModelParams::init(small_model(data.vocab.size()), 1);
        auto b = ModelParams::init(small_model(data.vocab.size()), 1);
        const auto ta = train_loop(data.train, config, a, data.vocab).trace;
        const auto tb = train_loop(data.train, config, b, data.vocab).trace;
        REQUIRE(ta.size() == tb.size());
        for (std::size_t i = 0; i < ta.size(); ++i) {
            CHECK(ta[i].loss == tb[i].loss);
            CHECK(ta[i].example_id == tb[i].example_id);
        }
        const auto dir = support::scratch_dir("trace");
        write_loss_trace((dir / "trace.csv").string(), ta);
        CHECK(support::slurp(dir / "trace.csv").rfind("step,example_id,loss\n", 0) == 0);
    }
    SUBCASE("a non-finite loss aborts with parameter norms") {
        auto params = ModelParams::init(small_model(data.vocab.size()), 1);
        params.nodes.matrix.fill(std::nan(""));
        try {
            train_loop(data.train, config, params, data.vocab);
            FAIL("expected TrainingAborted");
        } catch (const TrainingAborted& e) {
            CHECK(std::string(e.what()).find("parameter norms") != std::string::npos);
        }
    }
    SUBCASE("invalid configurations") {
        auto params = ModelParams::init(small_model(data.vocab.size()), 1);
        TrainConfig bad = config;
        bad.accumulation = 0;
        CHECK_THROWS_AS(train_loop(data.train, bad, params, data.vocab), InvalidInput);
        bad = config;
        bad.lr = -1.0;
        CHECK_THROWS_AS(train_loop(data.train, bad, params, data.vocab), InvalidInput);
        CHECK_THROWS_AS(train_loop({}, config, params, data.vocab), InvalidInput);
    }
}

TEST_CASE("checkpoint round trip") {
    const auto data = make_overfit_dataset(4, 5);
    auto params = ModelParams::init(small_model(data.vocab.size()), 9);
    TrainConfig config;
    config.max_steps = 2;
    config.lr = 1e-3;
    train_loop(data.train, config, params, data.vocab);

    const std::string text = checkpoint_json(params);
    ModelParams loaded = checkpoint_from_json(text);
    CHECK(checkpoint_json(loaded) == text);
    std::vector<Matrix> a, b;
    for_each_tensor(params, [&](const std::string&, Matrix& m) { a.push_back(m); });
    for_each_tensor(loaded, [&](const std::string&, Matrix& m) { b.push_back(m); });
    CHECK(a == b);
    const auto& ex = data.train[0];
    CHECK(answer(ex.graph, ex.prefix, ex.suffix, loaded, data.vocab, 4) ==
          answer(ex.graph, ex.prefix, ex.suffix, params, data.vocab, 4));
    CHECK(answer(ex.graph, ex.prefix, ex.suffix, loaded, data.vocab, 0).empty());

    const auto dir = support::scratch_dir("ckpt");
    save_checkpoint((dir / "c.json").string(), params);
    CHECK(checkpoint_json(load_checkpoint((dir / "c.json").string())) == text);
    CHECK_THROWS_AS(checkpoint_from_json(text.substr(0, text.size() / 3)), ParseError);
}

TEST_CASE("full-model gradients agree with finite differences") {
    for (std::uint64_t seed : {0u, 7u, 13u}) {
        const auto r = full_gradcheck(10, seed);
        CHECK_MESSAGE(r.max_relative_error < 1e-4, "seed " << seed << " worst " << r.worst);
    }
}
