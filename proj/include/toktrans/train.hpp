#pragma once

#include <optional>
#include <string>
#include <vector>

#include "toktrans/coupling.hpp"
#include "toktrans/lm.hpp"
#include "toktrans/optim.hpp"
#include "toktrans/translate.hpp"

namespace toktrans {

enum class RunMode { S2T2, DenseSinkhorn, Unconstrained, FtOrigTok, FtNewTok };

std::string run_mode_name(RunMode m);
RunMode run_mode_from_name(const std::string& name);

enum class MarginalsMode { Uniform, Empirical };

struct RunConfig {
    RunMode mode = RunMode::S2T2;
    double entropy_alpha = 0.0;
    long steps = 500;
    std::size_t batch_size = 8;
    std::size_t context_len = 256;
    std::uint64_t seed = 0;
    int sinkhorn_iters = 3;
    long grad_accum = 1;
    double lr = 1e-3;            // translator default; finetuning uses 2e-5
    double weight_decay = 0.0;   // finetuning uses 0.01
    MarginalsMode marginals_mode = MarginalsMode::Uniform;
    EmbeddingScaling embedding_scaling = EmbeddingScaling::Mu;
    bool sinkhorn_corrections = true;
};

// One JSON-lines record per optimization step.
struct StepMetrics {
    long step = 0;
    double lr = 0.0, loss = 0.0, nll = 0.0, entropy = 0.0;
    double row_err = 0.0, col_err = 0.0, sparsity = 0.0;
    std::string to_json() const;
};

std::string metrics_to_jsonl(const std::vector<StepMetrics>& log);

struct TranslatorResult {
    Tensor C;         // trained weight matrix (or W for the unconstrained mode)
    Coupling P;       // projection of the final C (P = C itself when unconstrained)
    std::vector<StepMetrics> log;
};

// Marginal estimation from token counts, add-one smoothed so every entry is
// strictly positive (1/mu and 1/nu divide the translation formulas).
Marginals empirical_marginals(const Corpus& src_corpus, const TokenizerModel& tok_src,
                              const Corpus& tgt_corpus, const TokenizerModel& tok_tgt);

// Cost matrix initialization: every entry 1/v.
Tensor init_cost_matrix(std::size_t v, std::size_t u);

// Model with translated E'/L' and the source encoder unchanged.
LmParams build_translated_model(const LmParams& source, const Tensor& P, const Marginals& m,
                                EmbeddingScaling scaling = EmbeddingScaling::Mu);
LmParams build_translated_model(const LmParams& source, const TranslatedHeads& heads,
                                std::size_t u);

// Trains C with the source model frozen. Loss = nll + entropy_alpha * H(P),
// backpropagated through the unrolled projection to C.
TranslatorResult train_translator(const LmParams& source_model, Tensor C, const Marginals& m,
                                  const std::vector<std::vector<int>>& blocks,
                                  const RunConfig& cfg);

// Whole-model finetuning; every parameter trainable.
std::pair<LmParams, std::vector<StepMetrics>> finetune_whole(
    LmParams model, const std::vector<std::vector<int>>& blocks, const RunConfig& cfg);

// Applies a coupling learned elsewhere to another model sharing the source
// vocabulary. P is d-independent, so only the vocab must match.
LmParams transfer_translator(const Tensor& P, const Marginals& m, const LmParams& target_model,
                             EmbeddingScaling scaling = EmbeddingScaling::Mu);

struct SuiteInputs {
    const LmParams* source_model = nullptr;
    const TokenizerModel* tok_src = nullptr;
    const TokenizerModel* tok_tgt = nullptr;
    const Corpus* target_train = nullptr;
    const Corpus* target_eval = nullptr;
    long translator_steps = 200;
    long finetune_steps = 200;
    std::size_t batch_size = 4;
    double entropy_alpha = 0.0;
    int sinkhorn_iters = 3;
    std::uint64_t seed = 0;
    MarginalsMode marginals_mode = MarginalsMode::Uniform;
};

struct SuiteRow {
    std::string mode;
    double perplexity = 0.0;
    double bpb = 0.0;
    long steps = 0;
    std::uint64_t seed = 0;
};

// All Table-1-style modes under shared seed/data: plain_p, sinkhorn_p, s2t2
// (each with and without CFT), ft_orig_tok, ft_new_tok.
std::vector<SuiteRow> run_baseline_suite(const SuiteInputs& in);

std::string suite_to_json(const std::vector<SuiteRow>& rows);
std::string suite_to_text(const std::vector<SuiteRow>& rows);

}  // namespace toktrans
