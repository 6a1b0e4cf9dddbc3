#include "toktrans/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace toktrans {

namespace {

using Json = nlohmann::json;

constexpr char kMagic[4] = {'S', '2', 'T', '2'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
std::uint64_t get_uint(const std::string& buf, std::size_t off, int nbytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    return v;
}

// Little-endian IEEE-754 serialization, host-endianness independent.
void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}
void put_f32(std::string& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const nlohmann::json& metadata, const std::string& dtype) {
    if (dtype != "f64" && dtype != "f32") throw ConfigError("checkpoint: dtype must be f64 or f32");
    const std::size_t elem = (dtype == "f64") ? 8 : 4;
    Json header;
    Json tj = Json::object();
    std::string payload;
    std::uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        const std::uint64_t nbytes = t->data.size() * elem;
        tj[name] = {{"dtype", dtype}, {"shape", t->shape}, {"offset", offset}, {"nbytes", nbytes}};
        for (double x : t->data) {
            if (elem == 8)
                put_f64(payload, x);
            else
                put_f32(payload, static_cast<float>(x));
        }
        offset += nbytes;
    }
    header["tensors"] = std::move(tj);
    header["metadata"] = metadata;
    std::string hs = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, hs.size());
    out += hs;
    out += payload;

    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw DataError("checkpoint: cannot write " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw DataError("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("checkpoint: cannot rename " + tmp + " to " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot read " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw DataError("checkpoint: truncated file (missing fixed header)");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic, not an S2T2 container");
    std::uint32_t version = static_cast<std::uint32_t>(get_uint(buf, 4, 4));
    if (version > kVersion)
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    std::uint64_t hlen = get_uint(buf, 8, 8);
    if (16 + hlen > buf.size()) throw DataError("checkpoint: truncated file (missing JSON header)");
    Json header;
    try {
        header = Json::parse(buf.substr(16, hlen));
    } catch (const Json::parse_error& e) {
        throw DataError(std::string("checkpoint: corrupt JSON header: ") + e.what());
    }
    const std::size_t payload_off = 16 + hlen;
    const std::size_t payload_len = buf.size() - payload_off;

    CheckpointData data;
    if (header.contains("metadata")) data.metadata = header["metadata"];
    std::vector<std::pair<std::uint64_t, std::uint64_t>> regions;
    for (auto it = header.at("tensors").begin(); it != header.at("tensors").end(); ++it) {
        const Json& tj = it.value();
        std::string dtype = tj.at("dtype").get<std::string>();
        std::vector<std::size_t> shape = tj.at("shape").get<std::vector<std::size_t>>();
        std::uint64_t offset = tj.at("offset").get<std::uint64_t>();
        std::uint64_t nbytes = tj.at("nbytes").get<std::uint64_t>();
        const std::size_t elem = (dtype == "f64") ? 8 : (dtype == "f32") ? 4 : 0;
        if (elem == 0) throw DataError("checkpoint: tensor '" + it.key() + "' has unknown dtype");
        if (shape_numel(shape) * elem != nbytes)
            throw DataError("checkpoint: tensor '" + it.key() + "' shape/nbytes mismatch");
        if (offset + nbytes > payload_len)
            throw DataError("checkpoint: truncated file (tensor '" + it.key() +
                            "' region out of bounds)");
        regions.emplace_back(offset, offset + nbytes);
        Tensor t = Tensor::zeros(shape);
        const std::size_t base = payload_off + offset;
        for (std::size_t i = 0; i < t.data.size(); ++i) {
            if (elem == 8) {
                std::uint64_t bits = get_uint(buf, base + i * 8, 8);
                double d;
                std::memcpy(&d, &bits, 8);
                t.data[i] = d;
            } else {
                std::uint32_t bits = static_cast<std::uint32_t>(get_uint(buf, base + i * 4, 4));
                float fl;
                std::memcpy(&fl, &bits, 4);
                t.data[i] = static_cast<double>(fl);
            }
        }
        data.tensors.emplace(it.key(), std::move(t));
    }
    std::sort(regions.begin(), regions.end());
    for (std::size_t i = 1; i < regions.size(); ++i)
        if (regions[i].first < regions[i - 1].second)
            throw DataError("checkpoint: overlapping tensor regions");
    return data;
}

}  // namespace toktrans
