#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lsc/volume.hpp"

namespace lsc {

// MVOL layout, little-endian:
//   0..3   magic "MVOL"
//   4      version (1)
//   5      dtype (1 = f32, 2 = u8)
//   6..7   reserved, zero
//   8..19  dims, three u32
//   20..31 spacing mm, three f32
//   32..43 origin mm, three f32
//   44..47 reserved, zero
//   48..   payload, x fastest

inline constexpr std::size_t kMvolHeaderSize = 48;
inline constexpr std::uint8_t kMvolVersion = 1;

enum class MvolDtype : std::uint8_t { F32 = 1, U8 = 2 };

class MvolError : public std::runtime_error {
 public:
  enum class Code {
    BadMagic,
    BadVersion,
    BadDtype,
    BadDims,
    BadSpacing,
    BadLabel,
    Truncated,
    TrailingData,
    Io,
  };

  MvolError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

using MvolObject = std::variant<Volume, LabelMask>;

std::vector<std::uint8_t> encode_mvol(const Volume& vol);
std::vector<std::uint8_t> encode_mvol(const LabelMask& mask);
MvolObject decode_mvol(std::span<const std::uint8_t> bytes);

void write_mvol(const Volume& vol, const std::filesystem::path& path);
void write_mvol(const LabelMask& mask, const std::filesystem::path& path);
MvolObject read_mvol(const std::filesystem::path& path);

/// read_mvol that additionally requires the f32 (volume) or u8 (mask) dtype.
Volume read_volume(const std::filesystem::path& path);
LabelMask read_mask(const std::filesystem::path& path);

}  // namespace lsc
