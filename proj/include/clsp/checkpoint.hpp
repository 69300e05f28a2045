#ifndef CLSP_CHECKPOINT_HPP
#define CLSP_CHECKPOINT_HPP

#include <cstdint>
#include <string>

#include "clsp/encoding.hpp"
#include "clsp/transformer.hpp"

namespace clsp {

// Self-describing model container: 8-byte magic, little-endian u32 format
// version and u64 header length, a JSON header (model config, tokenizer,
// tensor directory with name/shape/dtype/offset, optimizer step), then raw
// little-endian float32 tensor data at the listed offsets. Save/load round
// trips are bit-exact.
struct ModelCheckpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    nn::ModelConfig model;
    TokenizerConfig tokenizer;
    nn::Parameters<float> params;
    nn::AdamState<float> adam;
    std::int64_t train_step = 0;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

} // namespace clsp

#endif
