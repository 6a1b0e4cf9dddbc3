#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "toktrans/common.hpp"

namespace toktrans {

enum class TokKind { Byte, Bpe };

struct Specials {
    int bos = -1, eos = -1, pad = -1;
};

// Byte-level tokenizer: ids 0..255 are the raw bytes, then BOS/EOS/PAD.
// BPE: same base layout plus merge-produced tokens; merges apply in
// training order when encoding.
struct TokenizerModel {
    TokKind kind = TokKind::Byte;
    std::vector<std::string> vocab;  // id -> byte string ("" for specials)
    std::vector<std::pair<std::uint32_t, std::uint32_t>> merges;
    Specials specials;

    std::size_t size() const { return vocab.size(); }
    bool is_special(int id) const {
        return id == specials.bos || id == specials.eos || id == specials.pad;
    }

    static TokenizerModel byte_tokenizer();

    std::vector<int> encode(const std::string& text) const;
    std::string decode(const std::vector<int>& ids) const;

    std::string to_json() const;
    static TokenizerModel from_json(const std::string& json_text);
    void save(const std::string& path) const;
    static TokenizerModel load(const std::string& path);
};

enum class SourceFormat { Text, Fasta };

struct Corpus {
    std::vector<std::string> sequences;
    SourceFormat source_format = SourceFormat::Text;
    std::size_t byte_count = 0;  // sum of sequence lengths
};

Corpus make_corpus(std::vector<std::string> sequences,
                   SourceFormat fmt = SourceFormat::Text);
Corpus ingest_text(const std::string& path);
Corpus ingest_fasta(const std::string& path);

// Greedy highest-frequency pair merging until vocab_size is reached or no
// pair occurs at least twice. Ties broken lexicographically on the merged
// byte string. Deterministic.
TokenizerModel train_bpe(const Corpus& corpus, std::size_t vocab_size);

// byte_count / token_count, specials excluded.
double compression_ratio(const TokenizerModel& tok, const Corpus& corpus);

// Encode each sequence, append EOS, concatenate, chunk into blocks of
// context_len; the final partial block is dropped.
std::vector<std::vector<int>> pack_sequences(const Corpus& corpus, const TokenizerModel& tok,
                                             std::size_t context_len);

}  // namespace toktrans
