#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qv/nn/model.hpp"

namespace qv::nn {

// Checkpoint layout (little-endian): "QVMD", u16 version, the model spec,
// then per layer the weight and bias arrays followed by both Adam moments
// and the Adam step counter. Arrays are u64 length + f64 values.

std::vector<std::uint8_t> encode_model(const TrainedModel& model);

/// Throws FormatError on a bad magic, unknown version, truncation, trailing
/// bytes, or parameter arrays that disagree with the decoded spec.
TrainedModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace qv::nn
