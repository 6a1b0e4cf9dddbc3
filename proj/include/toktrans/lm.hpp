#pragma once

#include <string>
#include <vector>

#include "toktrans/tape.hpp"
#include "toktrans/tensor.hpp"
#include "toktrans/tokenizer.hpp"

namespace toktrans {

struct LmConfig {
    std::size_t vocab = 259;
    std::size_t d = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t context_len = 64;
};

// Pre-norm causal transformer. Attention weights are stored per head so the
// forward pass needs no tensor slicing.
struct LmParams {
    struct Layer {
        std::vector<Tensor> wq, wk, wv;  // per head: d x dh
        std::vector<Tensor> wo;          // per head: dh x d
        Tensor w1, b1, w2, b2;           // MLP d->4d->d
        Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    };

    LmConfig config;
    Tensor E;    // vocab x d
    Tensor L;    // vocab x d
    Tensor pos;  // context_len x d
    std::vector<Layer> layers;
    Tensor lnf_g, lnf_b;

    static LmParams init(const LmConfig& cfg, std::uint64_t seed);

    // Stable names; order is the checkpoint/optimizer order.
    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<std::pair<std::string, const Tensor*>> named_params() const;
    std::uint64_t param_hash() const;
};

// Var ids of every parameter on a tape. E/L may be replaced by translated
// heads before calling lm_forward_op.
struct LmVars {
    int E = -1, L = -1, pos = -1;
    struct Layer {
        std::vector<int> wq, wk, wv, wo;
        int w1, b1, w2, b2;
        int ln1_g, ln1_b, ln2_g, ln2_b;
    };
    std::vector<Layer> layers;
    int lnf_g = -1, lnf_b = -1;
    const LmConfig* config = nullptr;
};

LmVars lm_vars(Tape& t, const LmParams& p, bool trainable);

// Collects gradients for the encoder+E+L+pos vars of `vars` in
// named_params() order (empty tensors for untouched params).
std::vector<Tensor> collect_param_grads(const std::vector<Tensor>& grads, const LmVars& vars);

// Logits for every position; logits[t] depends only on ids[0..t].
int lm_forward_op(Tape& t, const LmVars& vars, const std::vector<int>& ids);

Tensor forward_logits(const LmParams& model, const std::vector<int>& ids);

// Mean over positions 0..s-2 of -log softmax(logits[t])[ids[t+1]].
int nll_loss_op(Tape& t, const LmVars& vars, const std::vector<int>& ids);
double nll_loss(const LmParams& model, const std::vector<int>& ids);

struct EvalReport {
    double mean_nll = 0.0;       // nats per predicted token
    double perplexity = 0.0;     // exp(mean_nll)
    double bits_per_byte = 0.0;  // mean_nll * (token_count/byte_count) / ln 2
    std::size_t token_count = 0; // predicted positions
    std::size_t byte_count = 0;  // bytes of the predicted tokens, specials excluded
    std::string to_json() const;
};

EvalReport evaluate(const LmParams& model, const TokenizerModel& tok, const Corpus& corpus);
EvalReport evaluate_blocks(const LmParams& model, const TokenizerModel& tok,
                           const std::vector<std::vector<int>>& blocks);

struct PretrainOptions {
    long steps = 300;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    bool verbose = false;
};

// Desk-scale source model trained from random init.
LmParams train_source_model(const Corpus& corpus, const TokenizerModel& tok,
                            const LmConfig& cfg, const PretrainOptions& opt);

}  // namespace toktrans
