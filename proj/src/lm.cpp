#include "toktrans/lm.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "toktrans/optim.hpp"

namespace toktrans {

LmParams LmParams::init(const LmConfig& cfg, std::uint64_t seed) {
    if (cfg.n_heads == 0 || cfg.d % cfg.n_heads != 0)
        throw ConfigError("lm: d must be divisible by n_heads");
    Rng rng(seed);
    const double w = 0.02;
    const std::size_t dh = cfg.d / cfg.n_heads;
    LmParams p;
    p.config = cfg;
    p.E = Tensor::randn({cfg.vocab, cfg.d}, rng, w);
    p.L = Tensor::randn({cfg.vocab, cfg.d}, rng, w);
    p.pos = Tensor::randn({cfg.context_len, cfg.d}, rng, w);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        Layer lay;
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            lay.wq.push_back(Tensor::randn({cfg.d, dh}, rng, w));
            lay.wk.push_back(Tensor::randn({cfg.d, dh}, rng, w));
            lay.wv.push_back(Tensor::randn({cfg.d, dh}, rng, w));
            lay.wo.push_back(Tensor::randn({dh, cfg.d}, rng, w));
        }
        lay.w1 = Tensor::randn({cfg.d, 4 * cfg.d}, rng, w);
        lay.b1 = Tensor::zeros({4 * cfg.d});
        lay.w2 = Tensor::randn({4 * cfg.d, cfg.d}, rng, w);
        lay.b2 = Tensor::zeros({cfg.d});
        lay.ln1_g = Tensor::full({cfg.d}, 1.0);
        lay.ln1_b = Tensor::zeros({cfg.d});
        lay.ln2_g = Tensor::full({cfg.d}, 1.0);
        lay.ln2_b = Tensor::zeros({cfg.d});
        p.layers.push_back(std::move(lay));
    }
    p.lnf_g = Tensor::full({cfg.d}, 1.0);
    p.lnf_b = Tensor::zeros({cfg.d});
    return p;
}

namespace {

template <typename P, typename T>
std::vector<std::pair<std::string, T*>> named_params_impl(P& p) {
    std::vector<std::pair<std::string, T*>> out;
    out.emplace_back("E", &p.E);
    out.emplace_back("L", &p.L);
    out.emplace_back("pos", &p.pos);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < lay.wq.size(); ++h) {
            std::string hp = pre + "h" + std::to_string(h) + ".";
            out.emplace_back(hp + "wq", &lay.wq[h]);
            out.emplace_back(hp + "wk", &lay.wk[h]);
            out.emplace_back(hp + "wv", &lay.wv[h]);
            out.emplace_back(hp + "wo", &lay.wo[h]);
        }
        out.emplace_back(pre + "w1", &lay.w1);
        out.emplace_back(pre + "b1", &lay.b1);
        out.emplace_back(pre + "w2", &lay.w2);
        out.emplace_back(pre + "b2", &lay.b2);
        out.emplace_back(pre + "ln1_g", &lay.ln1_g);
        out.emplace_back(pre + "ln1_b", &lay.ln1_b);
        out.emplace_back(pre + "ln2_g", &lay.ln2_g);
        out.emplace_back(pre + "ln2_b", &lay.ln2_b);
    }
    out.emplace_back("lnf_g", &p.lnf_g);
    out.emplace_back("lnf_b", &p.lnf_b);
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> LmParams::named_params() {
    return named_params_impl<LmParams, Tensor>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> LmParams::named_params() const {
    return named_params_impl<const LmParams, const Tensor>(*this);
}

std::uint64_t LmParams::param_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : named_params()) {
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(t->data.data(), t->data.size() * sizeof(double), h);
    }
    return h;
}

LmVars lm_vars(Tape& t, const LmParams& p, bool trainable) {
    LmVars v;
    v.config = &p.config;
    v.E = t.leaf(p.E, trainable);
    v.L = t.leaf(p.L, trainable);
    v.pos = t.leaf(p.pos, trainable);
    for (const auto& lay : p.layers) {
        LmVars::Layer lv;
        for (std::size_t h = 0; h < lay.wq.size(); ++h) {
            lv.wq.push_back(t.leaf(lay.wq[h], trainable));
            lv.wk.push_back(t.leaf(lay.wk[h], trainable));
            lv.wv.push_back(t.leaf(lay.wv[h], trainable));
            lv.wo.push_back(t.leaf(lay.wo[h], trainable));
        }
        lv.w1 = t.leaf(lay.w1, trainable);
        lv.b1 = t.leaf(lay.b1, trainable);
        lv.w2 = t.leaf(lay.w2, trainable);
        lv.b2 = t.leaf(lay.b2, trainable);
        lv.ln1_g = t.leaf(lay.ln1_g, trainable);
        lv.ln1_b = t.leaf(lay.ln1_b, trainable);
        lv.ln2_g = t.leaf(lay.ln2_g, trainable);
        lv.ln2_b = t.leaf(lay.ln2_b, trainable);
        v.layers.push_back(std::move(lv));
    }
    v.lnf_g = t.leaf(p.lnf_g, trainable);
    v.lnf_b = t.leaf(p.lnf_b, trainable);
    return v;
}

std::vector<Tensor> collect_param_grads(const std::vector<Tensor>& grads, const LmVars& vars) {
    std::vector<int> ids = {vars.E, vars.L, vars.pos};
    for (const auto& l : vars.layers) {
        for (std::size_t h = 0; h < l.wq.size(); ++h) {
            ids.push_back(l.wq[h]);
            ids.push_back(l.wk[h]);
            ids.push_back(l.wv[h]);
            ids.push_back(l.wo[h]);
        }
        for (int id : {l.w1, l.b1, l.w2, l.b2, l.ln1_g, l.ln1_b, l.ln2_g, l.ln2_b})
            ids.push_back(id);
    }
    ids.push_back(vars.lnf_g);
    ids.push_back(vars.lnf_b);
    std::vector<Tensor> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(grads.at(static_cast<std::size_t>(id)));
    return out;
}

int lm_forward_op(Tape& t, const LmVars& vars, const std::vector<int>& ids) {
    const LmConfig& cfg = *vars.config;
    const std::size_t s = ids.size();
    if (s == 0) throw ConfigError("lm_forward: empty block");
    if (s > cfg.context_len) throw ConfigError("lm_forward: block longer than context_len");
    const std::size_t vocab = t.value(vars.E).rows();
    std::vector<std::size_t> uids(s), pids(s);
    for (std::size_t i = 0; i < s; ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
            throw ConfigError("lm_forward: token id out of range");
        uids[i] = static_cast<std::size_t>(ids[i]);
        pids[i] = i;
    }
    int x = add(t, gather_rows(t, vars.E, uids), gather_rows(t, vars.pos, pids));

    // Additive causal mask: 0 on j<=i, large negative above the diagonal.
    Tensor mask = Tensor::zeros({s, s});
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i + 1; j < s; ++j) mask.at(i, j) = -1e9;
    int mask_var = t.leaf(std::move(mask));

    const std::size_t dh = cfg.d / cfg.n_heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    for (const auto& lay : vars.layers) {
        int xn = layer_norm_rows(t, x, lay.ln1_g, lay.ln1_b);
        int attn_out = -1;
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
            int q = matmul(t, xn, lay.wq[h]);
            int k = matmul(t, xn, lay.wk[h]);
            int v = matmul(t, xn, lay.wv[h]);
            int scores = add(t, scale(t, matmul(t, q, transpose(t, k)), inv_sqrt_dh), mask_var);
            int attn = row_softmax(t, scores);
            int head = matmul(t, matmul(t, attn, v), lay.wo[h]);
            attn_out = (attn_out < 0) ? head : add(t, attn_out, head);
        }
        x = add(t, x, attn_out);
        int xm = layer_norm_rows(t, x, lay.ln2_g, lay.ln2_b);
        int hmid = gelu(t, add_row_broadcast(t, matmul(t, xm, lay.w1), lay.b1));
        int mlp = add_row_broadcast(t, matmul(t, hmid, lay.w2), lay.b2);
        x = add(t, x, mlp);
    }
    int hfin = layer_norm_rows(t, x, vars.lnf_g, vars.lnf_b);
    return matmul(t, hfin, transpose(t, vars.L));
}

Tensor forward_logits(const LmParams& model, const std::vector<int>& ids) {
    Tape t;
    LmVars v = lm_vars(t, model, false);
    return t.value(lm_forward_op(t, v, ids));
}

int nll_loss_op(Tape& t, const LmVars& vars, const std::vector<int>& ids) {
    if (ids.size() < 2) throw ConfigError("nll_loss: need at least 2 tokens");
    int logits = lm_forward_op(t, vars, ids);
    std::vector<int> targets(ids.begin() + 1, ids.end());
    return softmax_cross_entropy(t, logits, std::move(targets));
}

double nll_loss(const LmParams& model, const std::vector<int>& ids) {
    Tape t;
    LmVars v = lm_vars(t, model, false);
    return t.value(nll_loss_op(t, v, ids)).scalar_value();
}

std::string EvalReport::to_json() const {
    nlohmann::json j{{"mean_nll", mean_nll},
                     {"perplexity", perplexity},
                     {"bits_per_byte", bits_per_byte},
                     {"token_count", token_count},
                     {"byte_count", byte_count}};
    return j.dump();
}

EvalReport evaluate_blocks(const LmParams& model, const TokenizerModel& tok,
                           const std::vector<std::vector<int>>& blocks) {
    if (blocks.empty()) throw DataError("evaluate: no full blocks to evaluate");
    double total_nll = 0.0;
    std::size_t tokens = 0, bytes = 0;
    for (const auto& block : blocks) {
        const std::size_t npos = block.size() - 1;
        total_nll += nll_loss(model, block) * static_cast<double>(npos);
        tokens += npos;
        for (std::size_t i = 1; i < block.size(); ++i)
            if (!tok.is_special(block[i]))
                bytes += tok.vocab[static_cast<std::size_t>(block[i])].size();
    }
    EvalReport r;
    r.token_count = tokens;
    r.byte_count = bytes;
    r.mean_nll = total_nll / static_cast<double>(tokens);
    r.perplexity = std::exp(r.mean_nll);
    r.bits_per_byte = r.mean_nll * (static_cast<double>(tokens) / static_cast<double>(bytes)) /
                      std::log(2.0);
    return r;
}

EvalReport evaluate(const LmParams& model, const TokenizerModel& tok, const Corpus& corpus) {
    return evaluate_blocks(model, tok, pack_sequences(corpus, tok, model.config.context_len));
}

LmParams train_source_model(const Corpus& corpus, const TokenizerModel& tok,
                            const LmConfig& cfg, const PretrainOptions& opt) {
    LmParams model = LmParams::init(cfg, opt.seed);
    auto blocks = pack_sequences(corpus, tok, cfg.context_len);
    if (blocks.empty()) throw DataError("train_source_model: corpus smaller than one block");
    Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
    auto params = model.named_params();
    std::vector<Tensor*> ptrs;
    for (auto& [name, p] : params) ptrs.push_back(p);
    OptimizerState state = OptimizerState::init(ptrs);
    AdamWConfig acfg;
    acfg.weight_decay = opt.weight_decay;
    Schedule sched{opt.lr, 0.2, 0.1, opt.steps};
    for (long step = 1; step <= opt.steps; ++step) {
        Tape t;
        LmVars vars = lm_vars(t, model, true);
        int loss = -1;
        for (std::size_t b = 0; b < opt.batch_size; ++b) {
            int l = nll_loss_op(t, vars, blocks[pick(rng)]);
            loss = (loss < 0) ? l : add(t, loss, l);
        }
        loss = scale(t, loss, 1.0 / static_cast<double>(opt.batch_size));
        double lv = t.value(loss).scalar_value();
        if (!std::isfinite(lv)) throw NumericalError("train_source_model: loss diverged");
        auto grads = t.backward(loss);
        adamw_step(ptrs, collect_param_grads(grads, vars), state, lr_at(sched, step), acfg);
        if (opt.verbose && step % 50 == 0)
            std::fprintf(stderr, "pretrain step %ld loss %.4f\n", step, lv);
    }
    return model;
}

}  // namespace toktrans
