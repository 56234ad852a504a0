#pragma once

// Weight file layout (all integers little-endian):
//   "MFFW" | u8 version | 3 reserved bytes | u32 entry count
//   per entry: u16 name length | name | u8 rank | rank x u32 dims | u64 payload offset
//   payload: f32 values of every entry, in manifest order
//
// The entry "config" holds the network configuration; "adam.m.*", "adam.v.*"
// and "adam.step" are present when optimizer state was saved.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lsc/nn/adam.hpp"
#include "lsc/nn/mff_net.hpp"

namespace lsc::nn {

inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct CheckpointData {
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data);
/// Throws CheckpointError on bad magic, version, truncation or inconsistent offsets.
CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes);

CheckpointData snapshot(MffNet<float>& net, Adam<float>* optimizer = nullptr);
/// Rebuilds a network from its config entry and copies every parameter and buffer.
MffNet<float> restore_network(const CheckpointData& data);
/// Throws CheckpointError when optimizer state is absent or does not match.
void restore_optimizer(const CheckpointData& data, MffNet<float>& net, Adam<float>& optimizer);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace lsc::nn
