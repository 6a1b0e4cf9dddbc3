// toktrans: tokenizer training, desk-scale pretraining, token translation,
// finetuning, evaluation, coupling transfer, and the full baseline suite.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "toktrans/checkpoint.hpp"
#include "toktrans/train.hpp"

using namespace toktrans;
using Json = nlohmann::json;

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("TOKTRANS_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("TOKTRANS_SEED is not an unsigned integer");
        }
    }
    return 0;
}

Corpus load_corpus(const std::string& path, const std::string& format) {
    if (format == "text") return ingest_text(path);
    if (format == "fasta") return ingest_fasta(path);
    throw ConfigError("unknown corpus format '" + format + "' (expected text|fasta)");
}

TokenizerModel load_tokenizer(const std::string& path) {
    if (path.empty() || path == "byte") return TokenizerModel::byte_tokenizer();
    return TokenizerModel::load(path);
}

std::uint64_t config_hash(const Json& j) {
    std::string s = j.dump();
    return fnv1a(s.data(), s.size());
}

// ---- model checkpoints ---------------------------------------------------

void save_model(const std::string& path, const LmParams& model, Json metadata) {
    metadata["lm_config"] = {{"vocab", model.config.vocab},
                             {"d", model.config.d},
                             {"n_layers", model.config.n_layers},
                             {"n_heads", model.config.n_heads},
                             {"context_len", model.config.context_len}};
    std::vector<std::pair<std::string, const Tensor*>> named;
    for (auto& [name, t] : model.named_params()) named.emplace_back(name, t);
    save_checkpoint(path, named, metadata);
}

LmParams load_model(const std::string& path) {
    CheckpointData ck = load_checkpoint(path);
    if (!ck.metadata.contains("lm_config"))
        throw DataError("checkpoint " + path + " has no lm_config metadata");
    const Json& c = ck.metadata["lm_config"];
    LmConfig cfg{c.at("vocab").get<std::size_t>(), c.at("d").get<std::size_t>(),
                 c.at("n_layers").get<std::size_t>(), c.at("n_heads").get<std::size_t>(),
                 c.at("context_len").get<std::size_t>()};
    LmParams model = LmParams::init(cfg, 0);
    for (auto& [name, t] : model.named_params()) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end())
            throw DataError("checkpoint " + path + " is missing tensor '" + name + "'");
        if (it->second.shape != t->shape)
            throw DataError("checkpoint " + path + " tensor '" + name + "' has wrong shape");
        *t = it->second;
    }
    return model;
}

struct CouplingArtifact {
    Tensor C, P;
    Marginals m;
    Json metadata;
};

void save_coupling(const std::string& path, const TranslatorResult& res, const Marginals& m,
                   Json metadata) {
    Tensor mu = Tensor::vector1d(m.mu), nu = Tensor::vector1d(m.nu);
    metadata["row_err"] = res.P.row_err;
    metadata["col_err"] = res.P.col_err;
    save_checkpoint(path, {{"C", &res.C}, {"P", &res.P.P}, {"mu", &mu}, {"nu", &nu}}, metadata);
}

CouplingArtifact load_coupling(const std::string& path) {
    CheckpointData ck = load_checkpoint(path);
    for (const char* key : {"C", "P", "mu", "nu"})
        if (!ck.tensors.count(key))
            throw DataError("coupling checkpoint " + path + " is missing tensor '" +
                            std::string(key) + "'");
    CouplingArtifact out;
    out.C = ck.tensors["C"];
    out.P = ck.tensors["P"];
    out.m.mu = ck.tensors["mu"].data;
    out.m.nu = ck.tensors["nu"].data;
    out.metadata = ck.metadata;
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << content;
}

EmbeddingScaling parse_scaling(const std::string& s) {
    if (s == "mu") return EmbeddingScaling::Mu;
    if (s == "nu") return EmbeddingScaling::Nu;
    throw ConfigError("unknown embedding scaling '" + s + "' (expected mu|nu)");
}

MarginalsMode parse_marginals(const std::string& s) {
    if (s == "uniform") return MarginalsMode::Uniform;
    if (s == "empirical") return MarginalsMode::Empirical;
    throw ConfigError("unknown marginals mode '" + s + "' (expected uniform|empirical)");
}

// ---- experiment config (translate train --config) -------------------------

struct ExperimentConfig {
    RunConfig run;
    std::string model_path, corpus_path, corpus_format = "text";
    std::string tokenizer_path = "byte", src_corpus_path;
    std::string out_path, metrics_path, translated_out;
};

ExperimentConfig parse_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read config " + path);
    Json j;
    try {
        j = Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config ") + path + ": " + e.what());
    }
    static const std::vector<std::string> known{
        "mode",       "entropy_alpha", "steps",         "batch_size",     "context_len",
        "seed",       "sinkhorn_iters", "grad_accum",   "lr",             "weight_decay",
        "marginals",  "embedding_scaling", "sinkhorn_corrections",
        "model",      "corpus",        "corpus_format", "tokenizer",      "src_corpus",
        "out",        "metrics",       "translated_out"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw ConfigError("config " + path + ": unknown key '" + it.key() + "'");
    for (const char* req : {"model", "corpus", "out"})
        if (!j.contains(req))
            throw ConfigError("config " + path + ": missing required key '" + std::string(req) + "'");

    ExperimentConfig cfg;
    cfg.run.seed = default_seed();
    if (j.contains("mode")) cfg.run.mode = run_mode_from_name(j["mode"].get<std::string>());
    if (j.contains("entropy_alpha")) cfg.run.entropy_alpha = j["entropy_alpha"].get<double>();
    if (j.contains("steps")) cfg.run.steps = j["steps"].get<long>();
    if (j.contains("batch_size")) cfg.run.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("context_len")) cfg.run.context_len = j["context_len"].get<std::size_t>();
    if (j.contains("seed")) cfg.run.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("sinkhorn_iters")) cfg.run.sinkhorn_iters = j["sinkhorn_iters"].get<int>();
    if (j.contains("grad_accum")) cfg.run.grad_accum = j["grad_accum"].get<long>();
    if (j.contains("lr")) cfg.run.lr = j["lr"].get<double>();
    if (j.contains("weight_decay")) cfg.run.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("marginals"))
        cfg.run.marginals_mode = parse_marginals(j["marginals"].get<std::string>());
    if (j.contains("embedding_scaling"))
        cfg.run.embedding_scaling = parse_scaling(j["embedding_scaling"].get<std::string>());
    if (j.contains("sinkhorn_corrections"))
        cfg.run.sinkhorn_corrections = j["sinkhorn_corrections"].get<bool>();
    cfg.model_path = j["model"].get<std::string>();
    cfg.corpus_path = j["corpus"].get<std::string>();
    if (j.contains("corpus_format")) cfg.corpus_format = j["corpus_format"].get<std::string>();
    if (j.contains("tokenizer")) cfg.tokenizer_path = j["tokenizer"].get<std::string>();
    if (j.contains("src_corpus")) cfg.src_corpus_path = j["src_corpus"].get<std::string>();
    cfg.out_path = j["out"].get<std::string>();
    if (j.contains("metrics")) cfg.metrics_path = j["metrics"].get<std::string>();
    if (j.contains("translated_out")) cfg.translated_out = j["translated_out"].get<std::string>();
    return cfg;
}

Json run_config_json(const RunConfig& rc) {
    return Json{{"mode", run_mode_name(rc.mode)},
                {"entropy_alpha", rc.entropy_alpha},
                {"steps", rc.steps},
                {"batch_size", rc.batch_size},
                {"context_len", rc.context_len},
                {"seed", rc.seed},
                {"sinkhorn_iters", rc.sinkhorn_iters},
                {"grad_accum", rc.grad_accum},
                {"lr", rc.lr},
                {"weight_decay", rc.weight_decay},
                {"marginals", rc.marginals_mode == MarginalsMode::Uniform ? "uniform" : "empirical"},
                {"embedding_scaling", rc.embedding_scaling == EmbeddingScaling::Mu ? "mu" : "nu"},
                {"sinkhorn_corrections", rc.sinkhorn_corrections}};
}

void run_translate_train(const ExperimentConfig& cfg) {
    LmParams source = load_model(cfg.model_path);
    TokenizerModel tok_tgt = load_tokenizer(cfg.tokenizer_path);
    Corpus corpus = load_corpus(cfg.corpus_path, cfg.corpus_format);
    auto blocks = pack_sequences(corpus, tok_tgt, source.config.context_len);

    TokenizerModel tok_src = TokenizerModel::byte_tokenizer();
    Marginals m;
    if (cfg.run.marginals_mode == MarginalsMode::Uniform) {
        m = Marginals::uniform(source.config.vocab, tok_tgt.size());
    } else {
        Corpus src_corpus = cfg.src_corpus_path.empty()
                                ? corpus
                                : load_corpus(cfg.src_corpus_path, cfg.corpus_format);
        if (tok_src.size() != source.config.vocab)
            throw ConfigError("empirical marginals need a byte-vocab source model");
        m = empirical_marginals(src_corpus, tok_src, corpus, tok_tgt);
    }

    RunConfig rc = cfg.run;
    rc.context_len = source.config.context_len;
    TranslatorResult res =
        train_translator(source, init_cost_matrix(source.config.vocab, tok_tgt.size()), m,
                         blocks, rc);

    Json meta{{"seed", rc.seed},
              {"mode", run_mode_name(rc.mode)},
              {"config", run_config_json(rc)},
              {"config_hash", config_hash(run_config_json(rc))}};
    save_coupling(cfg.out_path, res, m, meta);
    if (!cfg.metrics_path.empty()) write_text(cfg.metrics_path, metrics_to_jsonl(res.log));
    if (!cfg.translated_out.empty()) {
        LmParams translated;
        if (rc.mode == RunMode::Unconstrained) {
            TranslatedHeads heads = unconstrained_translate(source.E, source.L, res.P.P);
            translated = build_translated_model(source, heads, tok_tgt.size());
        } else {
            translated = build_translated_model(source, res.P.P, m, rc.embedding_scaling);
        }
        save_model(cfg.translated_out, translated, meta);
    }
    if (!res.log.empty()) {
        const StepMetrics& last = res.log.back();
        std::printf("final step %ld loss %.6f nll %.6f entropy %.4f sparsity %.4f\n", last.step,
                    last.loss, last.nll, last.entropy, last.sparsity);
    }
    std::printf("row_err %.3e col_err %.3e\n", res.P.row_err, res.P.col_err);
}

int dispatch(int argc, char** argv) {
    CLI::App app{"sparse Sinkhorn token translation toolkit"};
    app.require_subcommand(1);

    // tokenizer train|stats
    auto* tok_cmd = app.add_subcommand("tokenizer", "train or inspect tokenizers");
    tok_cmd->require_subcommand(1);
    struct {
        std::string corpus, format = "text", out;
        std::size_t vocab_size = 512;
    } tt;
    auto* tok_train = tok_cmd->add_subcommand("train", "train a BPE tokenizer");
    tok_train->add_option("--corpus", tt.corpus)->required();
    tok_train->add_option("--format", tt.format)->check(CLI::IsMember({"text", "fasta"}));
    tok_train->add_option("--vocab-size", tt.vocab_size);
    tok_train->add_option("--out", tt.out)->required();
    tok_train->callback([&] {
        Corpus corpus = load_corpus(tt.corpus, tt.format);
        TokenizerModel tok = train_bpe(corpus, tt.vocab_size);
        tok.save(tt.out);
        Json out{{"vocab_size", tok.size()},
                 {"merges", tok.merges.size()},
                 {"compression_ratio", compression_ratio(tok, corpus)}};
        std::cout << out.dump(2) << "\n";
    });

    struct {
        std::string corpus, format = "text", tokenizer = "byte";
    } ts;
    auto* tok_stats = tok_cmd->add_subcommand("stats", "report compression on a corpus");
    tok_stats->add_option("--corpus", ts.corpus)->required();
    tok_stats->add_option("--format", ts.format)->check(CLI::IsMember({"text", "fasta"}));
    tok_stats->add_option("--tokenizer", ts.tokenizer);
    tok_stats->callback([&] {
        Corpus corpus = load_corpus(ts.corpus, ts.format);
        TokenizerModel tok = load_tokenizer(ts.tokenizer);
        Json out{{"vocab_size", tok.size()},
                 {"sequences", corpus.sequences.size()},
                 {"bytes", corpus.byte_count},
                 {"compression_ratio", compression_ratio(tok, corpus)}};
        std::cout << out.dump(2) << "\n";
    });

    // pretrain
    struct {
        std::string corpus, format = "text", tokenizer = "byte", out;
        std::size_t d = 64, layers = 2, heads = 2, context = 64, batch = 8;
        long steps = 300;
        double lr = 1e-3, wd = 0.01;
        std::uint64_t seed = default_seed();
        bool verbose = false;
    } pt;
    auto* pre = app.add_subcommand("pretrain", "train a source model from scratch");
    pre->add_option("--corpus", pt.corpus)->required();
    pre->add_option("--format", pt.format)->check(CLI::IsMember({"text", "fasta"}));
    pre->add_option("--tokenizer", pt.tokenizer);
    pre->add_option("--out", pt.out)->required();
    pre->add_option("--d", pt.d);
    pre->add_option("--layers", pt.layers);
    pre->add_option("--heads", pt.heads);
    pre->add_option("--context", pt.context);
    pre->add_option("--steps", pt.steps);
    pre->add_option("--batch", pt.batch);
    pre->add_option("--lr", pt.lr);
    pre->add_option("--weight-decay", pt.wd);
    pre->add_option("--seed", pt.seed);
    pre->add_flag("--verbose", pt.verbose);
    pre->callback([&] {
        Corpus corpus = load_corpus(pt.corpus, pt.format);
        TokenizerModel tok = load_tokenizer(pt.tokenizer);
        LmConfig cfg{tok.size(), pt.d, pt.layers, pt.heads, pt.context};
        PretrainOptions opt{pt.steps, pt.batch, pt.lr, pt.wd, pt.seed, pt.verbose};
        LmParams model = train_source_model(corpus, tok, cfg, opt);
        Json cj{{"d", pt.d}, {"layers", pt.layers}, {"heads", pt.heads},
                {"context", pt.context}, {"steps", pt.steps}, {"lr", pt.lr},
                {"weight_decay", pt.wd}};
        save_model(pt.out, model,
                   Json{{"seed", pt.seed}, {"mode", "pretrain"}, {"config_hash", config_hash(cj)}});
        EvalReport r = evaluate(model, tok, corpus);
        std::cout << r.to_json() << "\n";
    });

    // translate train
    auto* tr_cmd = app.add_subcommand("translate", "train a vocabulary translator");
    tr_cmd->require_subcommand(1);
    struct {
        std::string config;
        ExperimentConfig ec;
        std::string mode = "s2t2", marginals = "uniform", scaling = "mu";
        bool have_seed = false;
    } tr;
    auto* tr_train = tr_cmd->add_subcommand("train", "optimize the cost matrix C");
    tr_train->add_option("--config", tr.config, "experiment config JSON (overrides other flags)");
    tr_train->add_option("--model", tr.ec.model_path);
    tr_train->add_option("--corpus", tr.ec.corpus_path);
    tr_train->add_option("--format", tr.ec.corpus_format)->check(CLI::IsMember({"text", "fasta"}));
    tr_train->add_option("--tokenizer", tr.ec.tokenizer_path);
    tr_train->add_option("--src-corpus", tr.ec.src_corpus_path);
    tr_train->add_option("--out", tr.ec.out_path);
    tr_train->add_option("--metrics", tr.ec.metrics_path);
    tr_train->add_option("--translated-out", tr.ec.translated_out);
    tr_train->add_option("--mode", tr.mode)
        ->check(CLI::IsMember({"s2t2", "dense_sinkhorn", "unconstrained"}));
    tr_train->add_option("--entropy-alpha", tr.ec.run.entropy_alpha);
    tr_train->add_option("--sinkhorn-iters", tr.ec.run.sinkhorn_iters);
    tr_train->add_option("--marginals", tr.marginals)
        ->check(CLI::IsMember({"uniform", "empirical"}));
    tr_train->add_option("--embedding-scaling", tr.scaling)->check(CLI::IsMember({"mu", "nu"}));
    tr_train->add_option("--steps", tr.ec.run.steps);
    tr_train->add_option("--batch", tr.ec.run.batch_size);
    tr_train->add_option("--grad-accum", tr.ec.run.grad_accum);
    tr_train->add_option("--lr", tr.ec.run.lr);
    tr_train->add_option("--weight-decay", tr.ec.run.weight_decay);
    tr_train->add_option("--seed", tr.ec.run.seed);
    tr_train->callback([&] {
        if (!tr.config.empty()) {
            run_translate_train(parse_experiment_config(tr.config));
            return;
        }
        if (tr.ec.model_path.empty() || tr.ec.corpus_path.empty() || tr.ec.out_path.empty())
            throw ConfigError("translate train needs --model, --corpus and --out (or --config)");
        if (!tr_train->count("--seed")) tr.ec.run.seed = default_seed();
        tr.ec.run.mode = run_mode_from_name(tr.mode);
        tr.ec.run.marginals_mode = parse_marginals(tr.marginals);
        tr.ec.run.embedding_scaling = parse_scaling(tr.scaling);
        run_translate_train(tr.ec);
    });

    // finetune
    struct {
        std::string model, coupling, corpus, format = "text", tokenizer = "byte", out, metrics;
        std::string init = "s2t2", scaling = "mu";
        long steps = 200;
        std::size_t batch = 8;
        double lr = 2e-5, wd = 0.01;
        std::uint64_t seed = default_seed();
    } ft;
    auto* fin = app.add_subcommand("finetune", "whole-model finetuning");
    fin->add_option("--model", ft.model)->required();
    fin->add_option("--init", ft.init)
        ->check(CLI::IsMember({"s2t2", "dense", "unconstrained", "orig-tok", "new-tok-truncate"}));
    fin->add_option("--coupling", ft.coupling, "coupling checkpoint for translator inits");
    fin->add_option("--corpus", ft.corpus)->required();
    fin->add_option("--format", ft.format)->check(CLI::IsMember({"text", "fasta"}));
    fin->add_option("--tokenizer", ft.tokenizer);
    fin->add_option("--embedding-scaling", ft.scaling)->check(CLI::IsMember({"mu", "nu"}));
    fin->add_option("--out", ft.out)->required();
    fin->add_option("--metrics", ft.metrics);
    fin->add_option("--steps", ft.steps);
    fin->add_option("--batch", ft.batch);
    fin->add_option("--lr", ft.lr);
    fin->add_option("--weight-decay", ft.wd);
    fin->add_option("--seed", ft.seed);
    fin->callback([&] {
        LmParams model = load_model(ft.model);
        TokenizerModel tok = load_tokenizer(ft.tokenizer);
        Corpus corpus = load_corpus(ft.corpus, ft.format);

        LmParams start = model;
        if (ft.init == "orig-tok") {
            if (tok.size() != model.config.vocab)
                throw ConfigError("orig-tok finetuning needs the model's own tokenizer");
        } else if (ft.init == "new-tok-truncate") {
            TranslatedHeads heads = truncation_resize(model.E, model.L, tok.size(), ft.seed);
            start = build_translated_model(model, heads, tok.size());
        } else {
            if (ft.coupling.empty())
                throw ConfigError("--init " + ft.init + " needs --coupling");
            CouplingArtifact ca = load_coupling(ft.coupling);
            if (ft.init == "unconstrained") {
                TranslatedHeads heads = unconstrained_translate(model.E, model.L, ca.P);
                start = build_translated_model(model, heads, ca.P.cols());
            } else {
                start = build_translated_model(model, ca.P, ca.m, parse_scaling(ft.scaling));
            }
            if (start.config.vocab != tok.size())
                throw ConfigError("coupling target vocab does not match tokenizer");
        }

        RunConfig rc;
        rc.mode = ft.init == "orig-tok" ? RunMode::FtOrigTok : RunMode::FtNewTok;
        rc.steps = ft.steps;
        rc.batch_size = ft.batch;
        rc.context_len = start.config.context_len;
        rc.lr = ft.lr;
        rc.weight_decay = ft.wd;
        rc.seed = ft.seed;
        auto blocks = pack_sequences(corpus, tok, start.config.context_len);
        auto [trained, log] = finetune_whole(std::move(start), blocks, rc);
        save_model(ft.out, trained,
                   Json{{"seed", ft.seed},
                        {"mode", "finetune_" + ft.init},
                        {"config_hash", config_hash(run_config_json(rc))}});
        if (!ft.metrics.empty()) write_text(ft.metrics, metrics_to_jsonl(log));
        EvalReport r = evaluate(trained, tok, corpus);
        std::cout << r.to_json() << "\n";
    });

    // eval
    struct {
        std::string model, corpus, format = "text", tokenizer = "byte";
    } ev;
    auto* evc = app.add_subcommand("eval", "perplexity and bits-per-byte on a corpus");
    evc->add_option("--model", ev.model)->required();
    evc->add_option("--corpus", ev.corpus)->required();
    evc->add_option("--format", ev.format)->check(CLI::IsMember({"text", "fasta"}));
    evc->add_option("--tokenizer", ev.tokenizer);
    evc->callback([&] {
        LmParams model = load_model(ev.model);
        TokenizerModel tok = load_tokenizer(ev.tokenizer);
        Corpus corpus = load_corpus(ev.corpus, ev.format);
        std::cout << evaluate(model, tok, corpus).to_json() << "\n";
    });

    // transfer
    struct {
        std::string coupling, model, out, scaling = "mu";
    } tf;
    auto* tfc = app.add_subcommand("transfer", "apply a saved coupling to another model");
    tfc->add_option("--coupling", tf.coupling)->required();
    tfc->add_option("--model", tf.model)->required();
    tfc->add_option("--out", tf.out)->required();
    tfc->add_option("--embedding-scaling", tf.scaling)->check(CLI::IsMember({"mu", "nu"}));
    tfc->callback([&] {
        CouplingArtifact ca = load_coupling(tf.coupling);
        LmParams model = load_model(tf.model);
        LmParams translated = transfer_translator(ca.P, ca.m, model, parse_scaling(tf.scaling));
        Json meta{{"mode", "transfer"}};
        if (ca.metadata.contains("config_hash")) meta["config_hash"] = ca.metadata["config_hash"];
        if (ca.metadata.contains("seed")) meta["seed"] = ca.metadata["seed"];
        save_model(tf.out, translated, meta);
        std::printf("transferred coupling %zux%zu onto d=%zu model\n", ca.P.rows(), ca.P.cols(),
                    model.config.d);
    });

    // suite
    struct {
        std::string model, src_tok = "byte", tgt_tok = "byte";
        std::string train_corpus, eval_corpus, format = "text", json_out;
        long translator_steps = 200, finetune_steps = 200;
        std::size_t batch = 4;
        double entropy_alpha = 0.0;
        int sinkhorn_iters = 3;
        std::string marginals = "uniform";
        std::uint64_t seed = default_seed();
    } su;
    auto* suc = app.add_subcommand("suite", "run every baseline mode on one target corpus");
    suc->add_option("--model", su.model)->required();
    suc->add_option("--src-tokenizer", su.src_tok);
    suc->add_option("--tgt-tokenizer", su.tgt_tok);
    suc->add_option("--train-corpus", su.train_corpus)->required();
    suc->add_option("--eval-corpus", su.eval_corpus)->required();
    suc->add_option("--format", su.format)->check(CLI::IsMember({"text", "fasta"}));
    suc->add_option("--json", su.json_out);
    suc->add_option("--translator-steps", su.translator_steps);
    suc->add_option("--finetune-steps", su.finetune_steps);
    suc->add_option("--batch", su.batch);
    suc->add_option("--entropy-alpha", su.entropy_alpha);
    suc->add_option("--sinkhorn-iters", su.sinkhorn_iters);
    suc->add_option("--marginals", su.marginals)->check(CLI::IsMember({"uniform", "empirical"}));
    suc->add_option("--seed", su.seed);
    suc->callback([&] {
        LmParams model = load_model(su.model);
        TokenizerModel tok_src = load_tokenizer(su.src_tok);
        TokenizerModel tok_tgt = load_tokenizer(su.tgt_tok);
        Corpus train = load_corpus(su.train_corpus, su.format);
        Corpus eval = load_corpus(su.eval_corpus, su.format);
        SuiteInputs in;
        in.source_model = &model;
        in.tok_src = &tok_src;
        in.tok_tgt = &tok_tgt;
        in.target_train = &train;
        in.target_eval = &eval;
        in.translator_steps = su.translator_steps;
        in.finetune_steps = su.finetune_steps;
        in.batch_size = su.batch;
        in.entropy_alpha = su.entropy_alpha;
        in.sinkhorn_iters = su.sinkhorn_iters;
        in.seed = su.seed;
        in.marginals_mode = parse_marginals(su.marginals);
        auto rows = run_baseline_suite(in);
        std::cout << suite_to_text(rows);
        if (!su.json_out.empty()) write_text(su.json_out, suite_to_json(rows));
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    auto fail = [](const char* kind, const std::exception& e, int code) {
        Json err{{"error", {{"type", kind}, {"message", e.what()}}}};
        std::cerr << err.dump() << "\n";
        return code;
    };
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        return fail("config", e, 2);
    } catch (const DataError& e) {
        return fail("data", e, 3);
    } catch (const NumericalError& e) {
        return fail("numerical", e, 4);
    } catch (const std::exception& e) {
        return fail("internal", e, 1);
    }
}
