#include "clsp/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace clsp {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'S', 'P', 'C', 'K', 'P', 'T'};

using ordered_json = nlohmann::ordered_json;

struct DirEntry {
    std::string name;
    int rows, cols;
    std::uint64_t offset;
    bool trainable;
};

void append_tensor(ordered_json& dir, const std::string& name, const nn::Mat<float>& m,
                   bool trainable, std::uint64_t& offset) {
    ordered_json e;
    e["name"] = name;
    e["shape"] = {m.rows, m.cols};
    e["dtype"] = "f32";
    e["offset"] = offset;
    e["trainable"] = trainable;
    dir.push_back(std::move(e));
    offset += m.size() * sizeof(float);
}

void write_raw(std::ofstream& out, const nn::Mat<float>& m) {
    out.write(reinterpret_cast<const char*>(m.a.data()),
              static_cast<std::streamsize>(m.size() * sizeof(float)));
}

} // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
    ordered_json dir = ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& t : ckpt.params.tensors) append_tensor(dir, t.name, t.m, t.trainable, offset);
    for (std::size_t i = 0; i < ckpt.params.tensors.size(); ++i) {
        if (!ckpt.params.tensors[i].trainable) continue;
        append_tensor(dir, "adam.m." + ckpt.params.tensors[i].name, ckpt.adam.m[i], false, offset);
        append_tensor(dir, "adam.v." + ckpt.params.tensors[i].name, ckpt.adam.v[i], false, offset);
    }

    ordered_json header;
    header["format"] = "clsp-checkpoint";
    header["version"] = ModelCheckpoint::kFormatVersion;
    header["model"] = ordered_json::parse(ckpt.model.to_json());
    header["tokenizer"] = ordered_json::parse(ckpt.tokenizer.to_json());
    header["train_step"] = ckpt.train_step;
    header["adam_step"] = ckpt.adam.step;
    header["tensors"] = std::move(dir);
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = ModelCheckpoint::kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    for (const auto& t : ckpt.params.tensors) write_raw(out, t.m);
    for (std::size_t i = 0; i < ckpt.params.tensors.size(); ++i) {
        if (!ckpt.params.tensors[i].trainable) continue;
        write_raw(out, ckpt.adam.m[i]);
        write_raw(out, ckpt.adam.v[i]);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != ModelCheckpoint::kFormatVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

    const auto header = ordered_json::parse(header_str);
    ModelCheckpoint ckpt;
    ckpt.model = nn::ModelConfig::from_json(header.at("model").dump());
    ckpt.tokenizer = TokenizerConfig::from_json(header.at("tokenizer").dump());
    ckpt.train_step = header.at("train_step").get<std::int64_t>();

    // Canonical tensor structure, then overwrite every tensor from the file.
    ckpt.params = nn::init_parameters<float>(ckpt.model);
    ckpt.adam = nn::AdamState<float>::zeros_like(ckpt.params);
    ckpt.adam.step = header.at("adam_step").get<std::int64_t>();

    const std::uint64_t payload_start = sizeof(kMagic) + sizeof(version) + sizeof(header_len) + header_len;
    auto read_into = [&](const ordered_json& entry, nn::Mat<float>& m) {
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != m.rows || shape[1] != m.cols)
            throw std::runtime_error("checkpoint tensor shape mismatch for " +
                                     entry.at("name").get<std::string>());
        if (entry.at("dtype").get<std::string>() != "f32")
            throw std::runtime_error("unsupported tensor dtype");
        in.seekg(static_cast<std::streamoff>(payload_start + entry.at("offset").get<std::uint64_t>()));
        in.read(reinterpret_cast<char*>(m.a.data()),
                static_cast<std::streamsize>(m.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated checkpoint payload");
    };

    for (const auto& entry : header.at("tensors")) {
        const auto name = entry.at("name").get<std::string>();
        if (name.starts_with("adam.m.")) {
            const int i = ckpt.params.find(name.substr(7));
            if (i < 0) throw std::runtime_error("checkpoint references unknown tensor " + name);
            read_into(entry, ckpt.adam.m[i]);
        } else if (name.starts_with("adam.v.")) {
            const int i = ckpt.params.find(name.substr(7));
            if (i < 0) throw std::runtime_error("checkpoint references unknown tensor " + name);
            read_into(entry, ckpt.adam.v[i]);
        } else {
            const int i = ckpt.params.find(name);
            if (i < 0) throw std::runtime_error("checkpoint references unknown tensor " + name);
            read_into(entry, ckpt.params.tensors[i].m);
        }
    }
    return ckpt;
}

} // namespace clsp
