#pragma once

// Binary model container. Layout, all integers little-endian:
//
//   "DKRT"                     magic, 4 bytes
//   u16   format version       (currently 1)
//   u32   descriptor length    followed by that many bytes of UTF-8 JSON
//   u32   tensor count
//   per tensor:
//     u32 name length, name bytes
//     u32 rank, then rank × u32 dims
//     raw 32-bit float data, dims product × 4 bytes
//
// Loading never trusts a declared size: every length is checked against the
// bytes that actually remain, so a truncated or corrupted file fails with a
// typed error instead of a bad allocation.

#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "diakrit/error.hpp"
#include "diakrit/io.hpp"
#include "diakrit/layers.hpp"
#include "diakrit/tensor.hpp"
#include "diakrit/utf8.hpp"

namespace diakrit {

inline constexpr uint16_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[4] = {'D', 'K', 'R', 'T'};

namespace model_detail {

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t v;
    static_assert(sizeof(v) == sizeof(f));
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct Cursor {
    const std::vector<uint8_t>& data;
    size_t pos = 0;

    void need(size_t n, const std::string& what) const {
        if (pos + n > data.size())
            throw ModelFormatError(ModelFormatError::Kind::Truncated,
                                   "model file truncated reading " + what + ": need " +
                                       std::to_string(n) + " bytes at offset " +
                                       std::to_string(pos) + ", file has " +
                                       std::to_string(data.size()));
    }

    uint16_t u16(const std::string& what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(data[pos] | (data[pos + 1] << 8));
        pos += 2;
        return v;
    }

    uint32_t u32(const std::string& what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }

    std::string bytes(size_t n, const std::string& what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(data.data() + pos), n);
        pos += n;
        return s;
    }
};

} // namespace model_detail

struct ModelFile {
    std::string descriptor; // UTF-8 JSON; architecture metadata, anchors, etc.
    std::vector<std::pair<std::string, Tensor<float>>> tensors; // file order
};

// Serializes descriptor + parameter tensors; returns the file size in bytes.
inline size_t save_model(const std::string& descriptor, const std::vector<Param<float>>& params,
                         const std::string& path) {
    using namespace model_detail;
    std::vector<uint8_t> out;
    out.insert(out.end(), kModelMagic, kModelMagic + 4);
    put_u16(out, kModelFormatVersion);
    put_u32(out, static_cast<uint32_t>(descriptor.size()));
    out.insert(out.end(), descriptor.begin(), descriptor.end());
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (const auto& p : params) {
        put_u32(out, static_cast<uint32_t>(p.name.size()));
        out.insert(out.end(), p.name.begin(), p.name.end());
        const Tensor<float>& t = *p.value;
        put_u32(out, static_cast<uint32_t>(t.rank()));
        for (int d = 0; d < t.rank(); ++d) put_u32(out, static_cast<uint32_t>(t.dim(d)));
        out.reserve(out.size() + t.numel() * 4);
        for (float f : t.v) put_f32(out, f);
    }
    write_file(path, out);
    return out.size();
}

inline ModelFile load_model(const std::string& path) {
    using namespace model_detail;
    std::vector<uint8_t> data = read_file(path);
    Cursor c{data};

    std::string magic = c.bytes(4, "magic");
    if (magic != std::string(kModelMagic, 4))
        throw ModelFormatError(ModelFormatError::Kind::BadMagic,
                               "not a model file: bad magic in " + path);
    uint16_t version = c.u16("format version");
    if (version != kModelFormatVersion)
        throw ModelFormatError(ModelFormatError::Kind::BadVersion,
                               "unsupported model format version " + std::to_string(version) +
                                   " (expected " + std::to_string(kModelFormatVersion) + ")");

    uint32_t desc_len = c.u32("descriptor length");
    ModelFile mf;
    mf.descriptor = c.bytes(desc_len, "descriptor");
    try {
        utf8_decode(mf.descriptor);
    } catch (const Error& e) {
        throw ModelFormatError(ModelFormatError::Kind::BadDescriptor,
                               std::string("model descriptor is not valid UTF-8: ") + e.what());
    }

    uint32_t count = c.u32("tensor count");
    mf.tensors.reserve(count);
    for (uint32_t ti = 0; ti < count; ++ti) {
        uint32_t name_len = c.u32("tensor name length");
        std::string name = c.bytes(name_len, "tensor name");
        uint32_t rank = c.u32("rank of '" + name + "'");
        if (rank < 1 || rank > 4)
            throw ModelFormatError(ModelFormatError::Kind::ShapeMismatch,
                                   "tensor '" + name + "' has rank " + std::to_string(rank) +
                                       "; supported ranks are 1..4");
        std::vector<int> dims(rank);
        uint64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            uint32_t v = c.u32("dim of '" + name + "'");
            if (v == 0 || v > (1u << 28))
                throw ModelFormatError(ModelFormatError::Kind::ShapeMismatch,
                                       "tensor '" + name + "' has invalid dimension " +
                                           std::to_string(v));
            dims[d] = static_cast<int>(v);
            numel *= v;
        }
        c.need(numel * 4, "data of '" + name + "'");
        Tensor<float> t(dims);
        for (size_t i = 0; i < t.numel(); ++i) {
            uint32_t v = c.u32("data of '" + name + "'");
            float f;
            std::memcpy(&f, &v, 4);
            t.v[i] = f;
        }
        mf.tensors.emplace_back(std::move(name), std::move(t));
    }
    return mf;
}

// Copies tensors from a loaded file into a network's parameter list, matching
// by name and checking shapes. Missing, extra, or mis-shaped tensors are
// reported as shape errors naming the offender.
inline void load_into(const ModelFile& mf, std::vector<Param<float>>& params) {
    if (mf.tensors.size() != params.size())
        throw ModelFormatError(ModelFormatError::Kind::ShapeMismatch,
                               "model file holds " + std::to_string(mf.tensors.size()) +
                                   " tensors but the network expects " +
                                   std::to_string(params.size()));
    for (auto& p : params) {
        const Tensor<float>* found = nullptr;
        for (const auto& [name, t] : mf.tensors)
            if (name == p.name) {
                found = &t;
                break;
            }
        if (!found)
            throw ModelFormatError(ModelFormatError::Kind::ShapeMismatch,
                                   "model file lacks tensor '" + p.name + "'");
        if (!found->same_shape(*p.value))
            throw ModelFormatError(ModelFormatError::Kind::ShapeMismatch,
                                   "tensor '" + p.name + "' has shape " + found->shape_str() +
                                       " but the network expects " + p.value->shape_str());
        p.value->v = found->v;
    }
}

} // namespace diakrit
