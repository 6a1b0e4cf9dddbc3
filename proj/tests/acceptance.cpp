// End-to-end acceptance suite. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "corpus_util.hpp"
#include "oracles.hpp"
#include "toktrans/checkpoint.hpp"
#include "toktrans/train.hpp"

using namespace toktrans;

namespace {

int g_failures = 0;

void run_criterion(int n, const std::string& what, const std::function<bool(std::string&)>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %2d (%s) [%.1fs]%s%s\n", ok ? "PASS" : "FAIL", n, what.c_str(),
                secs, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double median3(double a, double b, double c) {
    std::vector<double> v{a, b, c};
    std::sort(v.begin(), v.end());
    return v[1];
}

// ---- shared desk-scale setup ----------------------------------------------

struct Bench {
    TokenizerModel tok_byte = TokenizerModel::byte_tokenizer();
    Corpus src_corpus, tgt_train, tgt_eval;
    TokenizerModel tok_tgt;  // BPE over the target domain
    LmConfig cfg32{259, 32, 2, 2, 32};
    LmConfig cfg64{259, 64, 2, 2, 32};
    LmConfig cfg128{259, 128, 2, 2, 32};
    LmParams model32, model64, model128;
    std::vector<std::vector<int>> tgt_train_blocks, tgt_eval_blocks;

    Bench() {
        Rng rng(100);
        src_corpus = corpus_util::english_like(400, rng);
        tgt_train = corpus_util::protein_like(120, rng);
        tgt_eval = corpus_util::protein_like(30, rng);
        tok_tgt = train_bpe(tgt_train, 320);

        PretrainOptions opt;
        opt.steps = 250;
        opt.batch_size = 4;
        opt.lr = 1e-3;
        opt.seed = 1;
        model32 = train_source_model(src_corpus, tok_byte, cfg32, opt);
        model64 = train_source_model(src_corpus, tok_byte, cfg64, opt);
        model128 = train_source_model(src_corpus, tok_byte, cfg128, opt);

        tgt_train_blocks = pack_sequences(tgt_train, tok_tgt, cfg32.context_len);
        tgt_eval_blocks = pack_sequences(tgt_eval, tok_tgt, cfg32.context_len);
    }

    RunConfig translator_config(std::uint64_t seed, double alpha = 0.0) const {
        RunConfig rc;
        rc.mode = RunMode::S2T2;
        rc.steps = 80;
        rc.batch_size = 2;
        rc.context_len = cfg32.context_len;
        rc.seed = seed;
        rc.entropy_alpha = alpha;
        rc.lr = 1e-3;
        return rc;
    }

    RunConfig finetune_config(std::uint64_t seed) const {
        RunConfig rc;
        rc.steps = 60;
        rc.batch_size = 2;
        rc.context_len = cfg32.context_len;
        rc.seed = seed;
        rc.lr = 2e-5;
        rc.weight_decay = 0.01;
        return rc;
    }
};

// ---- criteria --------------------------------------------------------------

bool criterion_sparsemax_oracle(std::string& detail) {
    Rng rng(1);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    std::uniform_real_distribution<double> zval(-3.0, 3.0);
    std::uniform_real_distribution<double> aval(0.2, 3.0);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        std::size_t k = dim(rng);
        std::vector<double> z(k);
        for (double& x : z) x = zval(rng);
        double alpha = aval(rng);
        auto got = sparsemax(z, SimplexScale{alpha}).p;
        auto want = oracles::sparsemax_bruteforce(z, alpha);
        for (std::size_t j = 0; j < k; ++j)
            max_err = std::max(max_err, std::abs(got[j] - want[j]));
    }
    detail = "max abs err " + std::to_string(max_err);
    return max_err <= 1e-8;
}

bool criterion_dykstra_oracle(std::string& detail) {
    Rng rng(2);
    std::normal_distribution<double> nd(0.0, 1.0);
    double max_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        Tensor C = Tensor::zeros({3, 4});
        for (double& x : C.data) x = 0.4 * nd(rng);
        Marginals m;
        m.mu = oracles::random_simplex(3, rng);
        m.nu = oracles::random_simplex(4, rng);
        Coupling got = dykstra_project(C, m, 200);
        Tensor want = oracles::qp_ot_oracle(C, m, 1e-10);
        for (std::size_t j = 0; j < want.data.size(); ++j)
            max_err = std::max(max_err, std::abs(got.P.data[j] - want.data[j]));
    }
    // objective identity: 1/2||P - C||^2 - (1/2||P||^2 - <C,P>) = 1/2||C||^2
    double max_id_err = 0.0;
    for (int i = 0; i < 20; ++i) {
        Tensor C = Tensor::zeros({3, 4});
        for (double& x : C.data) x = nd(rng);
        auto mu = oracles::random_simplex(3, rng);
        auto nu = oracles::random_simplex(4, rng);
        double obj2 = 0.0, obj3 = 0.0, c2 = 0.0;
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 4; ++c) {
                double p = mu[r] * nu[c];  // product coupling, exactly feasible
                double cc = C.at(r, c);
                obj2 += 0.5 * (p - cc) * (p - cc);
                obj3 += 0.5 * p * p - cc * p;
                c2 += 0.5 * cc * cc;
            }
        max_id_err = std::max(max_id_err, std::abs(obj2 - obj3 - c2));
    }
    detail = "max entry err " + std::to_string(max_err) + ", identity err " +
             std::to_string(max_id_err);
    return max_err <= 1e-5 && max_id_err <= 1e-10;
}

bool criterion_feasibility_sparsity(std::string& detail) {
    Rng rng(3);
    // costs at the coupling's own scale, the regime the translator visits
    // (the cost matrix is initialized to 1/v); unit-scale entries make
    // Dykstra converge far too slowly for a 50-iteration budget
    std::normal_distribution<double> nd(0.0, 0.003);
    Tensor C = Tensor::zeros({64, 128});
    for (double& x : C.data) x = 1.0 / 64.0 + nd(rng);
    Marginals m = Marginals::uniform(64, 128);
    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double res50 = 0.0, res3 = 0.0, sp = 0.0;
    for (int n : {1, 3, 10, 50}) {
        Coupling P = dykstra_project(C, m, n);
        double res = std::max(P.row_err, P.col_err);
        if (res > prev + 1e-12) monotone = false;
        prev = res;
        if (n == 3) res3 = res;
        if (n == 50) {
            res50 = res;
            sp = sparsity(P.P);
        }
    }
    Coupling dense = dense_sinkhorn_project(C, m, 50);
    double dense_sp = sparsity(dense.P);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "residual n=3 %.2e (reported), n=50 %.2e, sparsity %.3f vs dense %.3f", res3,
                  res50, sp, dense_sp);
    detail = buf;
    return monotone && res50 <= 1e-6 && sp > 0.0 && dense_sp == 0.0;
}

bool criterion_gradient_fidelity(std::string& detail) {
    const std::size_t v = 8, u = 12;
    LmConfig cfg{u, 8, 1, 1, 8};
    Marginals m = Marginals::uniform(v, u);
    std::vector<int> block{3, 7, 1, 10, 4, 0, 8, 11};

    auto loss_of = [&](const Tensor& C, const LmParams& src) {
        Coupling P = dykstra_project(C, m, 3);
        LmParams translated = build_translated_model(src, P.P, m);
        return nll_loss(translated, block);
    };

    auto supports_of = [&](const Tensor& C) {
        DykstraTrace tr;
        dykstra_project(C, m, 3, &tr);
        std::vector<std::vector<std::size_t>> s;
        for (const auto& step : tr.row_steps)
            for (const auto& r : step) s.push_back(r.support);
        for (const auto& step : tr.col_steps)
            for (const auto& r : step) s.push_back(r.support);
        return s;
    };

    Rng rng(4);
    std::normal_distribution<double> nd(0.0, 0.3);
    const double h = 1e-6;
    for (int attempt = 0; attempt < 10; ++attempt) {
        LmConfig src_cfg{v, 8, 1, 1, 8};
        LmParams src = LmParams::init(src_cfg, 50 + attempt);
        Tensor C = init_cost_matrix(v, u);
        for (double& x : C.data) x += nd(rng);

        // only support-stable points: every +-h perturbation must keep every
        // projection support unchanged
        auto base_support = supports_of(C);
        bool stable = true;
        for (std::size_t i = 0; i < C.data.size() && stable; ++i) {
            for (double s : {h, -h}) {
                Tensor Cp = C;
                Cp.data[i] += s;
                if (supports_of(Cp) != base_support) {
                    stable = false;
                    break;
                }
            }
        }
        if (!stable) continue;

        Tape t;
        int c = t.leaf(C, true);
        int p = dykstra_project_op(t, c, m, 3);
        LmVars vars = lm_vars(t, src, false);
        vars.E = translate_embeddings_op(t, vars.E, p, m.mu);
        vars.L = translate_head_op(t, vars.L, p, m.nu);
        auto grads = t.backward(nll_loss_op(t, vars, block));
        const Tensor& analytic = grads.at(static_cast<std::size_t>(c));

        auto fd = oracles::finite_diff(
            [&](const std::vector<double>& x) {
                Tensor Cx = C;
                Cx.data = x;
                return loss_of(Cx, src);
            },
            C.data, h);
        double err = oracles::rel_err(analytic.data, fd);
        detail = "rel err " + std::to_string(err) + " (attempt " + std::to_string(attempt) + ")";
        return err <= 1e-4;
    }
    detail = "no support-stable instance found in 10 attempts";
    return false;
}

bool criterion_identity_translation(std::string& detail) {
    const std::size_t v = 16;
    LmConfig cfg{v, 16, 2, 2, 12};
    LmParams model = LmParams::init(cfg, 6);
    Rng rng(7);
    Marginals m;
    m.mu = oracles::random_simplex(v, rng);
    m.nu = m.mu;
    Tensor P = Tensor::zeros({v, v});
    for (std::size_t i = 0; i < v; ++i) P.at(i, i) = m.mu[i];
    LmParams translated = build_translated_model(model, P, m);
    std::vector<int> ids{2, 9, 14, 0, 5, 11, 7, 3};
    Tensor a = forward_logits(model, ids);
    Tensor b = forward_logits(translated, ids);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        max_diff = std::max(max_diff, std::abs(a.data[i] - b.data[i]));
    detail = "max logit diff " + std::to_string(max_diff);
    return max_diff <= 1e-9;
}

bool criterion_tokenizer(std::string& detail) {
    Rng rng(8);
    // round trip on random byte strings
    Corpus train = corpus_util::uniref_like(60, rng);
    TokenizerModel tok = train_bpe(train, 512);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> len(0, 64);
    for (int i = 0; i < 10000; ++i) {
        std::string s;
        int n = len(rng);
        for (int k = 0; k < n; ++k) s += static_cast<char>(byte(rng));
        if (tok.decode(tok.encode(s)) != s) {
            detail = "round trip failed on random string " + std::to_string(i);
            return false;
        }
    }
    Corpus held_out = corpus_util::uniref_like(20, rng);
    for (const auto& s : held_out.sequences)
        if (tok.decode(tok.encode(s)) != s) {
            detail = "round trip failed on held-out corpus";
            return false;
        }

    // monotone compression in vocab size
    double prev = 0.0;
    bool monotone = true;
    for (std::size_t vs : {260, 300, 380, 512}) {
        double r = compression_ratio(train_bpe(train, vs), held_out);
        if (r < prev - 1e-12) monotone = false;
        prev = r;
    }

    double ratio = compression_ratio(tok, held_out);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "vocab-512 compression %.3fx (reference 1.82 +- 0.25)", ratio);
    detail = buf;
    return monotone && std::abs(ratio - 1.82) <= 0.25;
}

bool criterion_table1_ordering(const Bench& b, std::string& detail) {
    const std::size_t u = b.tok_tgt.size();
    std::vector<double> perp_s2t2, perp_trunc, perp_s2t2_cft, perp_ft_new;
    std::vector<double> bpb_orig, bpb_s2t2, bpb_s2t2_cft, bpb_ft_new, bpb_trunc;

    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        Marginals m = Marginals::uniform(259, u);
        RunConfig trc = b.translator_config(seed);
        TranslatorResult tr =
            train_translator(b.model32, init_cost_matrix(259, u), m, b.tgt_train_blocks, trc);
        LmParams s2t2 = build_translated_model(b.model32, tr.P.P, m);
        EvalReport r_s2t2 = evaluate_blocks(s2t2, b.tok_tgt, b.tgt_eval_blocks);
        perp_s2t2.push_back(r_s2t2.perplexity);
        bpb_s2t2.push_back(r_s2t2.bits_per_byte);

        TranslatedHeads th = truncation_resize(b.model32.E, b.model32.L, u, seed);
        LmParams trunc = build_translated_model(b.model32, th, u);
        EvalReport r_trunc = evaluate_blocks(trunc, b.tok_tgt, b.tgt_eval_blocks);
        perp_trunc.push_back(r_trunc.perplexity);
        bpb_trunc.push_back(r_trunc.bits_per_byte);

        RunConfig fcfg = b.finetune_config(seed);
        auto [cft, cft_log] = finetune_whole(s2t2, b.tgt_train_blocks, fcfg);
        EvalReport r_cft = evaluate_blocks(cft, b.tok_tgt, b.tgt_eval_blocks);
        perp_s2t2_cft.push_back(r_cft.perplexity);
        bpb_s2t2_cft.push_back(r_cft.bits_per_byte);

        auto [ftn, ftn_log] = finetune_whole(trunc, b.tgt_train_blocks, fcfg);
        EvalReport r_ftn = evaluate_blocks(ftn, b.tok_tgt, b.tgt_eval_blocks);
        perp_ft_new.push_back(r_ftn.perplexity);
        bpb_ft_new.push_back(r_ftn.bits_per_byte);

        auto byte_train = pack_sequences(b.tgt_train, b.tok_byte, b.cfg32.context_len);
        auto byte_eval = pack_sequences(b.tgt_eval, b.tok_byte, b.cfg32.context_len);
        auto [fto, fto_log] = finetune_whole(b.model32, byte_train, fcfg);
        bpb_orig.push_back(evaluate_blocks(fto, b.tok_byte, byte_eval).bits_per_byte);
    }

    auto med = [](const std::vector<double>& v) { return median3(v[0], v[1], v[2]); };
    double p_s2t2 = med(perp_s2t2), p_trunc = med(perp_trunc);
    double p_cft = med(perp_s2t2_cft), p_ftn = med(perp_ft_new);
    double b_orig = med(bpb_orig);
    double b_new_max = std::max({med(bpb_s2t2), med(bpb_s2t2_cft), med(bpb_ft_new), med(bpb_trunc)});

    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "perp: s2t2 %.1f < trunc %.1f; s2t2+cft %.1f < ft-new %.1f; "
                  "bpb: ft-orig %.2f > max new-tok %.2f",
                  p_s2t2, p_trunc, p_cft, p_ftn, b_orig, b_new_max);
    detail = buf;
    return p_s2t2 < p_trunc && p_cft < p_ftn && b_orig > b_new_max;
}

bool criterion_weak_to_strong(const Bench& b, std::string& detail) {
    const std::size_t u = b.tok_tgt.size();
    std::vector<double> transferred, trunc_init;
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        Marginals m = Marginals::uniform(259, u);
        RunConfig trc = b.translator_config(seed);
        TranslatorResult tr =
            train_translator(b.model64, init_cost_matrix(259, u), m, b.tgt_train_blocks, trc);
        LmParams big = transfer_translator(tr.P.P, m, b.model128);
        transferred.push_back(evaluate_blocks(big, b.tok_tgt, b.tgt_eval_blocks).mean_nll);

        TranslatedHeads th = truncation_resize(b.model128.E, b.model128.L, u, seed);
        LmParams trunc = build_translated_model(b.model128, th, u);
        trunc_init.push_back(evaluate_blocks(trunc, b.tok_tgt, b.tgt_eval_blocks).mean_nll);
    }
    double got = median3(transferred[0], transferred[1], transferred[2]);
    double ref = median3(trunc_init[0], trunc_init[1], trunc_init[2]);
    double bound = std::log(static_cast<double>(u));
    char buf[128];
    std::snprintf(buf, sizeof(buf), "transferred nll %.3f vs ln(u) %.3f, trunc init %.3f", got,
                  bound, ref);
    detail = buf;
    return got < bound && got < ref;
}

bool criterion_entropy_trend(const Bench& b, std::string& detail) {
    const std::size_t u = b.tok_tgt.size();
    const std::vector<double> alphas{0.0, 0.01, 0.1};
    std::vector<std::vector<double>> H(alphas.size()), S(alphas.size());
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            Marginals m = Marginals::uniform(259, u);
            RunConfig rc = b.translator_config(seed, alphas[a]);
            rc.steps = 50;
            TranslatorResult tr =
                train_translator(b.model32, init_cost_matrix(259, u), m, b.tgt_train_blocks, rc);
            H[a].push_back(entropy(tr.P.P));
            S[a].push_back(sparsity(tr.P.P));
        }
    }
    auto med = [](std::vector<double> v) { return median3(v[0], v[1], v[2]); };
    double h0 = med(H[0]), h1 = med(H[1]), h2 = med(H[2]);
    double s0 = med(S[0]), s1 = med(S[1]), s2 = med(S[2]);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "H: %.3f >= %.3f >= %.3f; sparsity: %.3f <= %.3f <= %.3f", h0,
                  h1, h2, s0, s1, s2);
    detail = buf;
    return h0 >= h1 && h1 >= h2 && s0 <= s1 && s1 <= s2;
}

bool criterion_infrastructure(const Bench& b, std::string& detail) {
    // checkpoint round trip over a whole model
    std::string path = "/tmp/toktrans_acceptance.ckpt";
    std::vector<std::pair<std::string, const Tensor*>> named;
    for (auto& [name, t] : b.model32.named_params()) named.emplace_back(name, t);
    save_checkpoint(path, named, {{"seed", 1}});
    CheckpointData ck = load_checkpoint(path);
    for (auto& [name, t] : named) {
        const Tensor& got = ck.tensors.at(name);
        if (got.shape != t->shape ||
            std::memcmp(got.data.data(), t->data.data(), t->data.size() * sizeof(double)) != 0) {
            detail = "round trip mismatch on " + name;
            return false;
        }
    }
    std::remove(path.c_str());

    // fixed seed, bit-identical metrics logs
    Marginals m = Marginals::uniform(259, b.tok_tgt.size());
    RunConfig rc = b.translator_config(3);
    rc.steps = 5;
    auto r1 = train_translator(b.model32, init_cost_matrix(259, b.tok_tgt.size()), m,
                               b.tgt_train_blocks, rc);
    auto r2 = train_translator(b.model32, init_cost_matrix(259, b.tok_tgt.size()), m,
                               b.tgt_train_blocks, rc);
    if (metrics_to_jsonl(r1.log) != metrics_to_jsonl(r2.log)) {
        detail = "metrics logs differ across identical runs";
        return false;
    }

    // suite emits every mode with both metrics
    SuiteInputs in;
    in.source_model = &b.model32;
    in.tok_src = &b.tok_byte;
    in.tok_tgt = &b.tok_tgt;
    in.target_train = &b.tgt_train;
    in.target_eval = &b.tgt_eval;
    in.translator_steps = 2;
    in.finetune_steps = 2;
    in.batch_size = 2;
    in.seed = 1;
    auto rows = run_baseline_suite(in);
    const std::vector<std::string> want{"plain_p", "plain_p_cft", "sinkhorn_p", "sinkhorn_p_cft",
                                        "s2t2",    "s2t2_cft",    "ft_orig_tok", "ft_new_tok"};
    if (rows.size() != want.size()) {
        detail = "suite emitted " + std::to_string(rows.size()) + " rows";
        return false;
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].mode != want[i] || !std::isfinite(rows[i].perplexity) ||
            !std::isfinite(rows[i].bpb)) {
            detail = "suite row " + std::to_string(i) + " malformed";
            return false;
        }
    detail = "round trip, determinism, suite schema";
    return true;
}

}  // namespace

int main() {
    run_criterion(1, "sparsemax oracle equivalence", criterion_sparsemax_oracle);
    run_criterion(2, "coupling QP oracle equivalence", criterion_dykstra_oracle);
    run_criterion(3, "feasibility and sparsity", criterion_feasibility_sparsity);
    run_criterion(4, "end-to-end gradient fidelity", criterion_gradient_fidelity);
    run_criterion(5, "identity translation exactness", criterion_identity_translation);
    run_criterion(6, "tokenizer round trip and compression", criterion_tokenizer);

    std::printf("building shared desk-scale models...\n");
    std::fflush(stdout);
    Bench bench;

    run_criterion(7, "baseline ordering, median of 3 seeds",
                  [&](std::string& d) { return criterion_table1_ordering(bench, d); });
    run_criterion(8, "weak-to-strong coupling transfer",
                  [&](std::string& d) { return criterion_weak_to_strong(bench, d); });
    run_criterion(9, "entropy regularization trend",
                  [&](std::string& d) { return criterion_entropy_trend(bench, d); });
    run_criterion(10, "persistence and determinism",
                  [&](std::string& d) { return criterion_infrastructure(bench, d); });

    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
