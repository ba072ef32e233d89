#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "toothseg/nn/tensor.hpp"

namespace toothseg::nn {

// Single-file checkpoint: magic, length-prefixed JSON index (tensor names,
// shapes, offsets, plus a free-form "meta" object for model configs), then a
// raw little-endian float32 blob. Round-trips bit-exactly.
struct CheckpointEntry {
    std::string name;
    Tensor tensor;
};

inline constexpr char kCheckpointMagic[8] = {'T', 'S', 'C', 'K', 'P', 'T', '1', '\n'};

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries,
                            const nlohmann::json& meta) {
    nlohmann::json index;
    index["meta"] = meta;
    index["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        nlohmann::json t;
        t["name"] = e.name;
        t["dims"] = e.tensor.dims();
        t["offset"] = offset;
        t["count"] = e.tensor.numel();
        index["tensors"].push_back(t);
        offset += static_cast<std::uint64_t>(e.tensor.numel());
    }
    const std::string header = index.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const std::uint64_t hlen = header.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& e : entries)
        out.write(reinterpret_cast<const char*>(e.tensor.data()),
                  static_cast<std::streamsize>(e.tensor.numel() * sizeof(float)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline std::pair<std::vector<CheckpointEntry>, nlohmann::json> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string header(hlen, '\0');
    in.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
    nlohmann::json index = nlohmann::json::parse(header);
    std::vector<CheckpointEntry> entries;
    for (const auto& t : index.at("tensors")) {
        CheckpointEntry e;
        e.name = t.at("name").get<std::string>();
        Dims dims = t.at("dims").get<Dims>();
        e.tensor = Tensor(dims);
        in.read(reinterpret_cast<char*>(e.tensor.data()),
                static_cast<std::streamsize>(e.tensor.numel() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated checkpoint data: " + path);
        entries.push_back(std::move(e));
    }
    return {std::move(entries), index.at("meta")};
}

}  // namespace toothseg::nn
