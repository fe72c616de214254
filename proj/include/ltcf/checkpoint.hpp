#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ltcf/errors.hpp"
#include "ltcf/tensor.hpp"

namespace ltcf {

/// Checkpoint container: a plain-text header (magic, version, one-line config,
/// name+shape table) followed by the raw little-endian float32 payload in
/// table order. Model weights and extractor weights share this format.
struct CheckpointData {
    int version = 1;
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

inline constexpr const char* kCheckpointMagic = "LTCF-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

namespace ckpt_detail {

inline void write_f32_le(std::ostream& os, const float* data, size_t n) {
    // x86/ARM little-endian hosts write bytes directly; keep a portable path
    // for exotic targets.
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

}  // namespace ckpt_detail

inline void save_checkpoint_file(const std::string& path, const std::string& config_json,
                                 const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write checkpoint: " + path);
    os << kCheckpointMagic << " v" << kCheckpointVersion << "\n";
    os << "config " << config_json << "\n";
    os << "params " << tensors.size() << "\n";
    for (const auto& [name, t] : tensors) {
        os << name;
        for (size_t i = 0; i < t->shape.size(); ++i) os << (i ? "x" : " ") << t->shape[i];
        os << "\n";
    }
    os << "DATA\n";
    for (const auto& [name, t] : tensors) {
        ckpt_detail::write_f32_le(os, t->data.data(), t->numel());
    }
    if (!os) throw IoError("short write while saving checkpoint: " + path);
}

inline CheckpointData load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read checkpoint: " + path);

    std::string line;
    if (!std::getline(is, line)) throw CheckpointCorruptError("empty checkpoint: " + path);
    {
        std::istringstream hs(line);
        std::string magic, ver;
        hs >> magic >> ver;
        if (magic != kCheckpointMagic) {
            throw CheckpointCorruptError("bad checkpoint magic in " + path);
        }
        if (ver != "v" + std::to_string(kCheckpointVersion)) {
            throw CheckpointVersionError("unsupported checkpoint version '" + ver + "' in " +
                                         path);
        }
    }

    CheckpointData ck;
    if (!std::getline(is, line) || line.rfind("config ", 0) != 0) {
        throw CheckpointCorruptError("missing config line in " + path);
    }
    ck.config_json = line.substr(7);

    if (!std::getline(is, line) || line.rfind("params ", 0) != 0) {
        throw CheckpointCorruptError("missing params line in " + path);
    }
    const long count = std::strtol(line.c_str() + 7, nullptr, 10);
    if (count < 0) throw CheckpointCorruptError("negative param count in " + path);

    std::vector<std::pair<std::string, std::vector<int>>> table;
    for (long i = 0; i < count; ++i) {
        if (!std::getline(is, line)) throw CheckpointCorruptError("truncated param table in " + path);
        std::istringstream ls(line);
        std::string name, dims;
        ls >> name >> dims;
        if (name.empty() || dims.empty()) {
            throw CheckpointCorruptError("malformed param table entry '" + line + "'");
        }
        std::vector<int> shape;
        std::istringstream ds(dims);
        std::string tok;
        while (std::getline(ds, tok, 'x')) shape.push_back(std::stoi(tok));
        table.emplace_back(std::move(name), std::move(shape));
    }
    if (!std::getline(is, line) || line != "DATA") {
        throw CheckpointCorruptError("missing DATA marker in " + path);
    }

    for (auto& [name, shape] : table) {
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.numel() * 4));
        if (static_cast<size_t>(is.gcount()) != t.numel() * 4) {
            throw CheckpointCorruptError("truncated tensor data for '" + name + "' in " + path);
        }
        ck.tensors.emplace_back(name, std::move(t));
    }
    return ck;
}

}  // namespace ltcf
