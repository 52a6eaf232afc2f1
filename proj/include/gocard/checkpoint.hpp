#pragma once

#include <map>
#include <string>
#include <vector>

#include "gocard/layers.hpp"
#include "gocard/models.hpp"
#include "gocard/tensor.hpp"

namespace gocard {

// Weight container: "GCRD" magic, a u32 format version, then one record per
// tensor (u32 name length, name bytes, u32 rank, u32 dims, little-endian f32
// payload). Values are stored as f32; re-saving a loaded file is bit-exact.
inline constexpr std::uint32_t kWeightFormatVersion = 1;

void write_weights(const std::string& path, const std::vector<ParamRef>& tensors);
std::map<std::string, Tensor> read_weights(const std::string& path);

// Strict by-name restore: the file must carry exactly the network's parameter
// set with matching shapes.
void save_weights(const std::string& path, const Sequential& net);
void load_weights(const std::string& path, Sequential& net);

// Detection checkpoints carry the anchor table alongside the parameters so a
// decoded model is self-contained.
void save_weights(const std::string& path, const DetectionModel& model);
void load_weights(const std::string& path, DetectionModel& model);

}  // namespace gocard
