#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corpus_util.hpp"
#include "oracles.hpp"
#include "toktrans/lm.hpp"

using namespace toktrans;

namespace {

LmParams zeroed_model(const LmConfig& cfg) {
    LmParams p = LmParams::init(cfg, 0);
    for (auto& [name, t] : p.named_params())
        for (auto& x : t->data) x = 0.0;
    return p;
}

}  // namespace

TEST_CASE("zeroed network produces zero logits and ln(vocab) loss") {
    LmConfig cfg{16, 4, 1, 1, 8};
    LmParams model = zeroed_model(cfg);
    std::vector<int> ids{1, 2, 3, 4};
    Tensor logits = forward_logits(model, ids);
    for (double x : logits.data) CHECK(x == 0.0);
    CHECK(nll_loss(model, ids) == doctest::Approx(std::log(16.0)).epsilon(1e-12));
}

TEST_CASE("causality: future tokens do not affect past logits") {
    LmConfig cfg{32, 16, 3, 4, 16};
    LmParams model = LmParams::init(cfg, 42);
    std::vector<int> ids{5, 9, 13, 2, 7, 1, 30, 11};
    Tensor base = forward_logits(model, ids);
    for (std::size_t t = 0; t + 1 < ids.size(); ++t) {
        auto perturbed = ids;
        perturbed[t + 1] = (perturbed[t + 1] + 17) % 32;
        Tensor got = forward_logits(model, perturbed);
        for (std::size_t i = 0; i <= t; ++i)
            for (std::size_t j = 0; j < cfg.vocab; ++j)
                CHECK(got.at(i, j) == base.at(i, j));  // bit-identical
    }
}

TEST_CASE("input validation") {
    LmConfig cfg{16, 4, 1, 1, 8};
    LmParams model = LmParams::init(cfg, 0);
    CHECK_THROWS_AS(forward_logits(model, {1, 16}), ConfigError);
    CHECK_THROWS_AS(forward_logits(model, std::vector<int>(9, 1)), ConfigError);
    CHECK_THROWS_AS(forward_logits(model, {}), ConfigError);
}

TEST_CASE("gradient of the loss w.r.t. every parameter matches finite differences") {
    LmConfig cfg{16, 8, 1, 2, 6};
    LmParams model = LmParams::init(cfg, 7);
    std::vector<int> ids{3, 1, 15, 7, 2, 9};

    Tape t;
    LmVars vars = lm_vars(t, model, true);
    auto grads = t.backward(nll_loss_op(t, vars, ids));
    auto pgrads = collect_param_grads(grads, vars);

    auto named = model.named_params();
    for (std::size_t k = 0; k < named.size(); ++k) {
        Tensor* param = named[k].second;
        auto fd = oracles::finite_diff(
            [&](const std::vector<double>& x) {
                LmParams m2 = model;
                m2.named_params()[k].second->data = x;
                return nll_loss(m2, ids);
            },
            param->data, 1e-5);
        if (pgrads[k].data.empty()) {
            for (double x : fd) CHECK(std::abs(x) <= 1e-9);
            continue;
        }
        INFO("param ", named[k].first);
        CHECK(oracles::rel_err(pgrads[k].data, fd) <= 1e-5);
    }
}

TEST_CASE("evaluate: uniform-logit model sits at the random-guess line") {
    LmConfig cfg{512, 4, 1, 1, 16};
    LmParams model = zeroed_model(cfg);
    auto tok = TokenizerModel::byte_tokenizer();
    // byte tokenizer ids < 259 < 512, so blocks are valid for the model
    Rng rng(5);
    Corpus corpus = corpus_util::protein_like(10, rng);
    auto blocks = pack_sequences(corpus, tok, cfg.context_len);
    EvalReport r = evaluate_blocks(model, tok, blocks);
    CHECK(r.mean_nll == doctest::Approx(std::log(512.0)).epsilon(1e-12));
    CHECK(r.perplexity == doctest::Approx(512.0).epsilon(1e-9));
    CHECK(r.perplexity == std::exp(r.mean_nll));
    const double want_bpb =
        r.mean_nll * (double(r.token_count) / double(r.byte_count)) / std::log(2.0);
    CHECK(r.bits_per_byte == want_bpb);
}

TEST_CASE("bits-per-byte accounting across tokenizers") {
    // same corpus, byte vs BPE tokenizer: BpB scales by tokens-per-byte
    Rng rng(11);
    Corpus corpus = corpus_util::protein_like(30, rng);
    auto tok_byte = TokenizerModel::byte_tokenizer();
    auto tok_bpe = train_bpe(corpus, 320);
    LmConfig cfg{320, 4, 1, 1, 32};
    LmParams model = zeroed_model(cfg);
    auto rb = evaluate_blocks(model, tok_byte, pack_sequences(corpus, tok_byte, 32));
    auto rp = evaluate_blocks(model, tok_bpe, pack_sequences(corpus, tok_bpe, 32));
    // uniform model: nll = ln(320) for both; bytes-per-token differ
    CHECK(rb.mean_nll == doctest::Approx(rp.mean_nll).epsilon(1e-12));
    double ratio_b = double(rb.byte_count) / double(rb.token_count);
    double ratio_p = double(rp.byte_count) / double(rp.token_count);
    CHECK(ratio_p > ratio_b);
    CHECK(rp.bits_per_byte < rb.bits_per_byte);
    CHECK(rb.bits_per_byte ==
          doctest::Approx(rb.mean_nll / ratio_b / std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("evaluate is deterministic") {
    LmConfig cfg{259, 16, 2, 2, 24};
    LmParams model = LmParams::init(cfg, 3);
    auto tok = TokenizerModel::byte_tokenizer();
    Rng rng(13);
    Corpus corpus = corpus_util::protein_like(8, rng);
    auto r1 = evaluate(model, tok, corpus);
    auto r2 = evaluate(model, tok, corpus);
    CHECK(r1.mean_nll == r2.mean_nll);
    CHECK(r1.bits_per_byte == r2.bits_per_byte);
}

TEST_CASE("training memorizes a tiny corpus") {
    auto tok = TokenizerModel::byte_tokenizer();
    Corpus corpus = make_corpus(std::vector<std::string>(8, "the cat sat on the mat"));
    LmConfig cfg{259, 16, 1, 2, 12};
    PretrainOptions opt;
    opt.steps = 250;
    opt.batch_size = 4;
    opt.lr = 3e-3;
    opt.seed = 1;
    LmParams init = LmParams::init(cfg, opt.seed);
    double loss0 = evaluate(init, tok, corpus).mean_nll;
    LmParams trained = train_source_model(corpus, tok, cfg, opt);
    double loss1 = evaluate(trained, tok, corpus).mean_nll;
    CHECK(loss1 <= 0.1 * loss0);
}
