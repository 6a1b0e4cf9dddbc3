#include "toktrans/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace toktrans {

namespace {

using Json = nlohmann::json;

std::string hex_encode(const std::string& s) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 15]);
    }
    return out;
}

std::string hex_decode(const std::string& s) {
    if (s.size() % 2) throw DataError("tokenizer: odd-length hex string");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw DataError("tokenizer: bad hex digit");
    };
    std::string out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i < s.size(); i += 2)
        out.push_back(static_cast<char>(nibble(s[i]) * 16 + nibble(s[i + 1])));
    return out;
}

TokenizerModel base_model(TokKind kind) {
    TokenizerModel m;
    m.kind = kind;
    m.vocab.reserve(259);
    for (int b = 0; b < 256; ++b) m.vocab.push_back(std::string(1, static_cast<char>(b)));
    m.specials.bos = 256;
    m.specials.eos = 257;
    m.specials.pad = 258;
    m.vocab.push_back("");  // BOS
    m.vocab.push_back("");  // EOS
    m.vocab.push_back("");  // PAD
    return m;
}

constexpr std::size_t kBaseVocab = 259;  // 256 bytes + BOS/EOS/PAD

}  // namespace

TokenizerModel TokenizerModel::byte_tokenizer() { return base_model(TokKind::Byte); }

std::vector<int> TokenizerModel::encode(const std::string& text) const {
    std::vector<int> ids;
    ids.reserve(text.size());
    for (unsigned char c : text) ids.push_back(static_cast<int>(c));
    if (kind == TokKind::Byte) return ids;
    // Apply merges in training order; merge id for rule r is kBaseVocab + r.
    for (std::size_t r = 0; r < merges.size(); ++r) {
        const int a = static_cast<int>(merges[r].first);
        const int b = static_cast<int>(merges[r].second);
        const int merged = static_cast<int>(kBaseVocab + r);
        std::size_t w = 0;
        for (std::size_t i = 0; i < ids.size();) {
            if (i + 1 < ids.size() && ids[i] == a && ids[i + 1] == b) {
                ids[w++] = merged;
                i += 2;
            } else {
                ids[w++] = ids[i++];
            }
        }
        ids.resize(w);
    }
    return ids;
}

std::string TokenizerModel::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size())
            throw DataError("decode: token id " + std::to_string(id) + " out of range");
        if (is_special(id)) continue;
        out += vocab[static_cast<std::size_t>(id)];
    }
    return out;
}

std::string TokenizerModel::to_json() const {
    Json j;
    j["kind"] = (kind == TokKind::Byte) ? "byte" : "bpe";
    Json v = Json::object();
    for (std::size_t i = 0; i < vocab.size(); ++i) v[std::to_string(i)] = hex_encode(vocab[i]);
    j["vocab"] = std::move(v);
    Json ms = Json::array();
    for (const auto& [a, b] : merges) ms.push_back(Json::array({a, b}));
    j["merges"] = std::move(ms);
    j["specials"] = {{"bos", specials.bos}, {"eos", specials.eos}, {"pad", specials.pad}};
    return j.dump(2);
}

TokenizerModel TokenizerModel::from_json(const std::string& json_text) {
    Json j;
    try {
        j = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        throw DataError(std::string("tokenizer: invalid JSON: ") + e.what());
    }
    TokenizerModel m;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "byte")
        m.kind = TokKind::Byte;
    else if (kind == "bpe")
        m.kind = TokKind::Bpe;
    else
        throw DataError("tokenizer: unknown kind '" + kind + "'");
    const auto& v = j.at("vocab");
    m.vocab.resize(v.size());
    for (auto it = v.begin(); it != v.end(); ++it) {
        std::size_t id = std::stoul(it.key());
        if (id >= m.vocab.size()) throw DataError("tokenizer: vocab ids not dense");
        m.vocab[id] = hex_decode(it.value().get<std::string>());
    }
    for (const auto& pr : j.at("merges"))
        m.merges.emplace_back(pr.at(0).get<std::uint32_t>(), pr.at(1).get<std::uint32_t>());
    m.specials.bos = j.at("specials").at("bos").get<int>();
    m.specials.eos = j.at("specials").at("eos").get<int>();
    m.specials.pad = j.at("specials").at("pad").get<int>();
    return m;
}

void TokenizerModel::save(const std::string& path) const {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw DataError("cannot write " + tmp);
        f << to_json() << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot rename " + tmp + " to " + path);
}

TokenizerModel TokenizerModel::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

Corpus make_corpus(std::vector<std::string> sequences, SourceFormat fmt) {
    Corpus c;
    c.sequences = std::move(sequences);
    c.source_format = fmt;
    for (const auto& s : c.sequences) c.byte_count += s.size();
    return c;
}

Corpus ingest_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::vector<std::string> seqs;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) seqs.push_back(line);
    }
    return make_corpus(std::move(seqs), SourceFormat::Text);
}

Corpus ingest_fasta(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path);
    std::vector<std::string> seqs;
    std::string line;
    std::size_t lineno = 0;
    bool in_record = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            seqs.emplace_back();
            in_record = true;
        } else {
            if (!in_record)
                throw DataError("malformed FASTA: sequence line before any header at line " +
                                std::to_string(lineno));
            seqs.back() += line;
        }
    }
    // Drop empty records (header with no sequence lines).
    std::erase_if(seqs, [](const std::string& s) { return s.empty(); });
    return make_corpus(std::move(seqs), SourceFormat::Fasta);
}

TokenizerModel train_bpe(const Corpus& corpus, std::size_t vocab_size) {
    if (vocab_size < kBaseVocab)
        throw ConfigError("train_bpe: vocab_size " + std::to_string(vocab_size) +
                          " smaller than alphabet+specials (" + std::to_string(kBaseVocab) + ")");
    TokenizerModel m = base_model(TokKind::Bpe);
    std::vector<std::vector<int>> seqs;
    seqs.reserve(corpus.sequences.size());
    for (const auto& s : corpus.sequences) {
        std::vector<int> ids;
        ids.reserve(s.size());
        for (unsigned char c : s) ids.push_back(static_cast<int>(c));
        seqs.push_back(std::move(ids));
    }
    while (m.vocab.size() < vocab_size) {
        std::map<std::pair<int, int>, std::size_t> counts;
        for (const auto& seq : seqs)
            for (std::size_t i = 0; i + 1 < seq.size(); ++i)
                ++counts[{seq[i], seq[i + 1]}];
        std::pair<int, int> best{-1, -1};
        std::size_t best_count = 1;  // require >= 2
        std::string best_bytes;
        for (const auto& [pair, n] : counts) {
            if (n < best_count) continue;
            std::string bytes = m.vocab[static_cast<std::size_t>(pair.first)] +
                                m.vocab[static_cast<std::size_t>(pair.second)];
            if (n > best_count || bytes < best_bytes) {
                best = pair;
                best_count = n;
                best_bytes = std::move(bytes);
            }
        }
        if (best.first < 0) break;
        const int merged = static_cast<int>(m.vocab.size());
        m.vocab.push_back(best_bytes);
        m.merges.emplace_back(static_cast<std::uint32_t>(best.first),
                              static_cast<std::uint32_t>(best.second));
        for (auto& seq : seqs) {
            std::size_t w = 0;
            for (std::size_t i = 0; i < seq.size();) {
                if (i + 1 < seq.size() && seq[i] == best.first && seq[i + 1] == best.second) {
                    seq[w++] = merged;
                    i += 2;
                } else {
                    seq[w++] = seq[i++];
                }
            }
            seq.resize(w);
        }
    }
    return m;
}

double compression_ratio(const TokenizerModel& tok, const Corpus& corpus) {
    std::size_t tokens = 0;
    for (const auto& s : corpus.sequences) tokens += tok.encode(s).size();
    if (tokens == 0) throw DataError("compression_ratio: empty corpus");
    return static_cast<double>(corpus.byte_count) / static_cast<double>(tokens);
}

std::vector<std::vector<int>> pack_sequences(const Corpus& corpus, const TokenizerModel& tok,
                                             std::size_t context_len) {
    if (context_len < 2) throw ConfigError("pack_sequences: context_len must be >= 2");
    std::vector<std::vector<int>> blocks;
    std::vector<int> cur;
    cur.reserve(context_len);
    for (const auto& s : corpus.sequences) {
        std::vector<int> ids = tok.encode(s);
        ids.push_back(tok.specials.eos);
        for (int id : ids) {
            cur.push_back(id);
            if (cur.size() == context_len) {
                blocks.push_back(cur);
                cur.clear();
            }
        }
    }
    return blocks;  // final partial block dropped
}

}  // namespace toktrans
