#include "toktrans/train.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

namespace toktrans {

std::string run_mode_name(RunMode m) {
    switch (m) {
        case RunMode::S2T2: return "s2t2";
        case RunMode::DenseSinkhorn: return "dense_sinkhorn";
        case RunMode::Unconstrained: return "unconstrained";
        case RunMode::FtOrigTok: return "ft_orig_tok";
        case RunMode::FtNewTok: return "ft_new_tok";
    }
    throw ConfigError("unknown run mode");
}

RunMode run_mode_from_name(const std::string& name) {
    if (name == "s2t2") return RunMode::S2T2;
    if (name == "dense_sinkhorn") return RunMode::DenseSinkhorn;
    if (name == "unconstrained") return RunMode::Unconstrained;
    if (name == "ft_orig_tok") return RunMode::FtOrigTok;
    if (name == "ft_new_tok") return RunMode::FtNewTok;
    throw ConfigError("unknown run mode '" + name + "'");
}

std::string StepMetrics::to_json() const {
    nlohmann::json j{{"step", step},     {"lr", lr},
                     {"loss", loss},     {"nll", nll},
                     {"entropy", entropy}, {"row_err", row_err},
                     {"col_err", col_err}, {"sparsity", sparsity}};
    return j.dump();
}

std::string metrics_to_jsonl(const std::vector<StepMetrics>& log) {
    std::string out;
    for (const auto& m : log) {
        out += m.to_json();
        out += "\n";
    }
    return out;
}

Marginals empirical_marginals(const Corpus& src_corpus, const TokenizerModel& tok_src,
                              const Corpus& tgt_corpus, const TokenizerModel& tok_tgt) {
    auto count = [](const Corpus& c, const TokenizerModel& tok) {
        std::vector<double> counts(tok.size(), 1.0);  // add-one: strict positivity required
        for (const auto& s : c.sequences)
            for (int id : tok.encode(s)) counts[static_cast<std::size_t>(id)] += 1.0;
        double total = 0.0;
        for (double x : counts) total += x;
        for (double& x : counts) x /= total;
        return counts;
    };
    Marginals m;
    m.mu = count(src_corpus, tok_src);
    m.nu = count(tgt_corpus, tok_tgt);
    return m;
}

Tensor init_cost_matrix(std::size_t v, std::size_t u) {
    return Tensor::full({v, u}, 1.0 / static_cast<double>(v));
}

LmParams build_translated_model(const LmParams& source, const Tensor& P, const Marginals& m,
                                EmbeddingScaling scaling) {
    TranslatedHeads heads;
    heads.provenance = "coupling";
    heads.E_prime = translate_embeddings(
        source.E, P, scaling == EmbeddingScaling::Mu ? m.mu : m.nu, scaling);
    heads.L_prime = translate_head(source.L, P, m.nu);
    return build_translated_model(source, heads, P.cols());
}

LmParams build_translated_model(const LmParams& source, const TranslatedHeads& heads,
                                std::size_t u) {
    if (heads.E_prime.rows() != u || heads.L_prime.rows() != u)
        throw ConfigError("build_translated_model: head shapes disagree with target vocab");
    LmParams out = source;
    out.config.vocab = u;
    out.E = heads.E_prime;
    out.L = heads.L_prime;
    return out;
}

namespace {

std::vector<const std::vector<int>*> sample_batch(const std::vector<std::vector<int>>& blocks,
                                                  std::size_t n, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, blocks.size() - 1);
    std::vector<const std::vector<int>*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&blocks[pick(rng)]);
    return out;
}

}  // namespace

TranslatorResult train_translator(const LmParams& source_model, Tensor C, const Marginals& m,
                                  const std::vector<std::vector<int>>& blocks,
                                  const RunConfig& cfg) {
    if (cfg.mode != RunMode::S2T2 && cfg.mode != RunMode::DenseSinkhorn &&
        cfg.mode != RunMode::Unconstrained)
        throw ConfigError("train_translator: mode does not train a translator");
    if (blocks.empty()) throw DataError("train_translator: no training blocks");
    m.validate();
    if (C.rows() != source_model.config.vocab || C.rows() != m.mu.size() ||
        C.cols() != m.nu.size())
        throw ConfigError("train_translator: C/marginals/model dimension mismatch");
    const bool projected = cfg.mode != RunMode::Unconstrained;

    Rng rng(cfg.seed);
    std::vector<Tensor*> params{&C};
    OptimizerState state = OptimizerState::init(params);
    AdamWConfig acfg;
    acfg.weight_decay = cfg.weight_decay;
    Schedule sched{cfg.lr, 0.2, 0.1, cfg.steps};

    TranslatorResult res;
    auto project_now = [&](Tape& t, int c) {
        if (cfg.mode == RunMode::S2T2) return dykstra_project_op(t, c, m, cfg.sinkhorn_iters);
        if (cfg.mode == RunMode::DenseSinkhorn)
            return dense_sinkhorn_op(t, c, m, cfg.sinkhorn_iters, cfg.sinkhorn_corrections);
        return c;
    };

    for (long step = 1; step <= cfg.steps; ++step) {
        Tensor grad_acc = Tensor::zeros(C.shape);
        double loss_v = 0.0, nll_v = 0.0, ent_v = 0.0;
        double row_err = 0.0, col_err = 0.0, sp = 0.0;
        for (long a = 0; a < cfg.grad_accum; ++a) {
            Tape t;
            int c = t.leaf(C, true);
            int P = project_now(t, c);
            LmVars vars = lm_vars(t, source_model, false);
            int Evar, Lvar;
            if (projected) {
                Evar = translate_embeddings_op(
                    t, vars.E, P,
                    cfg.embedding_scaling == EmbeddingScaling::Mu ? m.mu : m.nu,
                    cfg.embedding_scaling);
                Lvar = translate_head_op(t, vars.L, P, m.nu);
            } else {
                Evar = unconstrained_translate_op(t, vars.E, P);
                Lvar = unconstrained_translate_op(t, vars.L, P);
            }
            vars.E = Evar;
            vars.L = Lvar;
            int loss = -1;
            for (const auto* block : sample_batch(blocks, cfg.batch_size, rng)) {
                int l = nll_loss_op(t, vars, *block);
                loss = (loss < 0) ? l : add(t, loss, l);
            }
            loss = scale(t, loss, 1.0 / static_cast<double>(cfg.batch_size));
            double nll_here = t.value(loss).scalar_value();
            double ent_here = projected ? entropy(t.value(P)) : 0.0;
            if (projected && cfg.entropy_alpha != 0.0)
                loss = add(t, loss, scale(t, entropy_op(t, P), cfg.entropy_alpha));
            double loss_here = t.value(loss).scalar_value();
            if (!std::isfinite(loss_here))
                throw NumericalError("train_translator: loss diverged at step " +
                                     std::to_string(step) + " (nll=" + std::to_string(nll_here) +
                                     ", entropy=" + std::to_string(ent_here) + ")");
            auto grads = t.backward(loss);
            const Tensor& gc = grads.at(static_cast<std::size_t>(c));
            for (std::size_t i = 0; i < grad_acc.data.size(); ++i)
                grad_acc.data[i] += gc.data[i] / static_cast<double>(cfg.grad_accum);
            loss_v += loss_here / static_cast<double>(cfg.grad_accum);
            nll_v += nll_here / static_cast<double>(cfg.grad_accum);
            ent_v = ent_here;
            if (projected) {
                auto [re, ce] = marginal_residual(t.value(P), m);
                row_err = re;
                col_err = ce;
                sp = sparsity(t.value(P));
            }
        }
        double lr_t = lr_at(sched, step);
        adamw_step(params, {grad_acc}, state, lr_t, acfg);
        res.log.push_back({step, lr_t, loss_v, nll_v, ent_v, row_err, col_err, sp});
    }

    if (cfg.mode == RunMode::S2T2) {
        res.P = dykstra_project(C, m, cfg.sinkhorn_iters);
    } else if (cfg.mode == RunMode::DenseSinkhorn) {
        res.P = dense_sinkhorn_project(C, m, cfg.sinkhorn_iters, cfg.sinkhorn_corrections);
    } else {
        res.P.P = C;
        auto [re, ce] = marginal_residual(C, m);
        res.P.row_err = re;
        res.P.col_err = ce;
    }
    res.C = std::move(C);
    return res;
}

std::pair<LmParams, std::vector<StepMetrics>> finetune_whole(
    LmParams model, const std::vector<std::vector<int>>& blocks, const RunConfig& cfg) {
    if (blocks.empty()) throw DataError("finetune_whole: no training blocks");
    Rng rng(cfg.seed);
    auto named = model.named_params();
    std::vector<Tensor*> params;
    for (auto& [name, p] : named) params.push_back(p);
    OptimizerState state = OptimizerState::init(params);
    AdamWConfig acfg;
    acfg.weight_decay = cfg.weight_decay;
    Schedule sched{cfg.lr, 0.2, 0.1, cfg.steps};
    std::vector<StepMetrics> log;
    for (long step = 1; step <= cfg.steps; ++step) {
        Tape t;
        LmVars vars = lm_vars(t, model, true);
        int loss = -1;
        for (const auto* block : sample_batch(blocks, cfg.batch_size, rng)) {
            int l = nll_loss_op(t, vars, *block);
            loss = (loss < 0) ? l : add(t, loss, l);
        }
        loss = scale(t, loss, 1.0 / static_cast<double>(cfg.batch_size));
        double lv = t.value(loss).scalar_value();
        if (!std::isfinite(lv))
            throw NumericalError("finetune_whole: loss diverged at step " + std::to_string(step));
        auto grads = t.backward(loss);
        double lr_t = lr_at(sched, step);
        adamw_step(params, collect_param_grads(grads, vars), state, lr_t, acfg);
        log.push_back({step, lr_t, lv, lv, 0.0, 0.0, 0.0, 0.0});
    }
    return {std::move(model), std::move(log)};
}

LmParams transfer_translator(const Tensor& P, const Marginals& m, const LmParams& target_model,
                             EmbeddingScaling scaling) {
    if (P.rows() != target_model.config.vocab)
        throw ConfigError("transfer_translator: coupling source vocab " +
                          std::to_string(P.rows()) + " does not match target model vocab " +
                          std::to_string(target_model.config.vocab));
    return build_translated_model(target_model, P, m, scaling);
}

std::vector<SuiteRow> run_baseline_suite(const SuiteInputs& in) {
    if (!in.source_model || !in.tok_src || !in.tok_tgt || !in.target_train || !in.target_eval)
        throw ConfigError("run_baseline_suite: missing inputs");
    const LmParams& src = *in.source_model;
    const std::size_t ctx = src.config.context_len;
    const std::size_t v = in.tok_src->size();
    const std::size_t u = in.tok_tgt->size();
    if (src.config.vocab != v)
        throw ConfigError("run_baseline_suite: source model vocab does not match tokenizer");

    auto tgt_train_blocks = pack_sequences(*in.target_train, *in.tok_tgt, ctx);
    auto tgt_eval_blocks = pack_sequences(*in.target_eval, *in.tok_tgt, ctx);
    auto src_train_blocks = pack_sequences(*in.target_train, *in.tok_src, ctx);
    auto src_eval_blocks = pack_sequences(*in.target_eval, *in.tok_src, ctx);

    Marginals m = in.marginals_mode == MarginalsMode::Uniform
                      ? Marginals::uniform(v, u)
                      : empirical_marginals(*in.target_train, *in.tok_src, *in.target_train,
                                            *in.tok_tgt);

    RunConfig tcfg;
    tcfg.steps = in.translator_steps;
    tcfg.batch_size = in.batch_size;
    tcfg.context_len = ctx;
    tcfg.seed = in.seed;
    tcfg.sinkhorn_iters = in.sinkhorn_iters;
    tcfg.lr = 1e-3;
    tcfg.weight_decay = 0.0;
    tcfg.marginals_mode = in.marginals_mode;

    RunConfig fcfg = tcfg;
    fcfg.steps = in.finetune_steps;
    fcfg.lr = 2e-5;
    fcfg.weight_decay = 0.01;

    std::vector<SuiteRow> rows;
    auto add_row = [&](const std::string& mode, const EvalReport& r, long steps) {
        rows.push_back({mode, r.perplexity, r.bits_per_byte, steps, in.seed});
    };

    struct TMode {
        RunMode mode;
        const char* name;
        double alpha;
    };
    const TMode tmodes[] = {{RunMode::Unconstrained, "plain_p", 0.0},
                            {RunMode::DenseSinkhorn, "sinkhorn_p", 0.0},
                            {RunMode::S2T2, "s2t2", in.entropy_alpha}};
    for (const auto& tm : tmodes) {
        RunConfig cfg = tcfg;
        cfg.mode = tm.mode;
        cfg.entropy_alpha = tm.alpha;
        TranslatorResult tr = train_translator(src, init_cost_matrix(v, u), m,
                                               tgt_train_blocks, cfg);
        LmParams translated;
        if (tm.mode == RunMode::Unconstrained) {
            TranslatedHeads heads = unconstrained_translate(src.E, src.L, tr.P.P);
            translated = build_translated_model(src, heads, u);
        } else {
            translated = build_translated_model(src, tr.P.P, m, cfg.embedding_scaling);
        }
        add_row(tm.name, evaluate_blocks(translated, *in.tok_tgt, tgt_eval_blocks),
                in.translator_steps);
        auto [cft, cft_log] = finetune_whole(translated, tgt_train_blocks, fcfg);
        add_row(std::string(tm.name) + "_cft",
                evaluate_blocks(cft, *in.tok_tgt, tgt_eval_blocks),
                in.translator_steps + in.finetune_steps);
    }

    {
        RunConfig cfg = fcfg;
        cfg.mode = RunMode::FtOrigTok;
        auto [ft, log] = finetune_whole(src, src_train_blocks, cfg);
        add_row("ft_orig_tok", evaluate_blocks(ft, *in.tok_src, src_eval_blocks),
                in.finetune_steps);
    }
    {
        RunConfig cfg = fcfg;
        cfg.mode = RunMode::FtNewTok;
        TranslatedHeads heads = truncation_resize(src.E, src.L, u, in.seed);
        LmParams init = build_translated_model(src, heads, u);
        auto [ft, log] = finetune_whole(std::move(init), tgt_train_blocks, cfg);
        add_row("ft_new_tok", evaluate_blocks(ft, *in.tok_tgt, tgt_eval_blocks),
                in.finetune_steps);
    }
    return rows;
}

std::string suite_to_json(const std::vector<SuiteRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows)
        out.push_back({{"mode", r.mode},
                       {"perplexity", r.perplexity},
                       {"bpb", r.bpb},
                       {"steps", r.steps},
                       {"seed", r.seed}});
    return out.dump(2);
}

std::string suite_to_text(const std::vector<SuiteRow>& rows) {
    std::ostringstream os;
    os << "mode            perplexity       bpb     steps   seed\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-15s %10.3f %9.4f %7ld %6llu\n", r.mode.c_str(),
                      r.perplexity, r.bpb, r.steps,
                      static_cast<unsigned long long>(r.seed));
        os << buf;
    }
    return os.str();
}

}  // namespace toktrans
