#include "lsc/mvol.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lsc {
namespace {

static_assert(std::endian::native == std::endian::little,
              "MVOL encoding assumes a little-endian host");
static_assert(sizeof(float) == 4);

template <class T>
void put(std::vector<std::uint8_t>& out, std::size_t at, T value) {
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> in, std::size_t at) {
  T value;
  std::memcpy(&value, in.data() + at, sizeof(T));
  return value;
}

std::vector<std::uint8_t> encode_header(const GridGeometry& g, MvolDtype dtype,
                                        std::size_t payload_bytes) {
  std::vector<std::uint8_t> out(kMvolHeaderSize + payload_bytes, 0);
  std::memcpy(out.data(), "MVOL", 4);
  out[4] = kMvolVersion;
  out[5] = static_cast<std::uint8_t>(dtype);
  put(out, 8, g.dims.nx);
  put(out, 12, g.dims.ny);
  put(out, 16, g.dims.nz);
  for (int a = 0; a < 3; ++a) put(out, 20 + 4 * a, g.spacing[a]);
  for (int a = 0; a < 3; ++a) put(out, 32 + 4 * a, g.origin[a]);
  return out;
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw MvolError(MvolError::Code::Io, "cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw MvolError(MvolError::Code::Io, "write failed: " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_mvol(const Volume& vol) {
  auto out = encode_header(vol.geometry(), MvolDtype::F32, vol.size() * sizeof(float));
  std::memcpy(out.data() + kMvolHeaderSize, vol.values().data(), vol.size() * sizeof(float));
  return out;
}

std::vector<std::uint8_t> encode_mvol(const LabelMask& mask) {
  auto out = encode_header(mask.geometry(), MvolDtype::U8, mask.size());
  std::memcpy(out.data() + kMvolHeaderSize, mask.values().data(), mask.size());
  return out;
}

MvolObject decode_mvol(std::span<const std::uint8_t> bytes) {
  using Code = MvolError::Code;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "MVOL", 4) != 0) {
    throw MvolError(Code::BadMagic, "bad magic: expected \"MVOL\"");
  }
  if (bytes.size() < kMvolHeaderSize) {
    throw MvolError(Code::Truncated, "truncated header: " + std::to_string(bytes.size()) + " bytes");
  }
  if (bytes[4] != kMvolVersion) {
    throw MvolError(Code::BadVersion, "unsupported version " + std::to_string(bytes[4]));
  }
  const std::uint8_t dtype = bytes[5];
  if (dtype != static_cast<std::uint8_t>(MvolDtype::F32) &&
      dtype != static_cast<std::uint8_t>(MvolDtype::U8)) {
    throw MvolError(Code::BadDtype, "unknown dtype code " + std::to_string(dtype));
  }

  GridGeometry g;
  g.dims = {get<std::uint32_t>(bytes, 8), get<std::uint32_t>(bytes, 12),
            get<std::uint32_t>(bytes, 16)};
  for (int a = 0; a < 3; ++a) g.spacing[a] = get<float>(bytes, 20 + 4 * a);
  for (int a = 0; a < 3; ++a) g.origin[a] = get<float>(bytes, 32 + 4 * a);

  if (g.dims.nx == 0 || g.dims.ny == 0 || g.dims.nz == 0) {
    throw MvolError(Code::BadDims, "dims must all be >= 1");
  }
  for (float s : g.spacing) {
    if (!std::isfinite(s) || s <= 0.0f) {
      throw MvolError(Code::BadSpacing, "spacing must be finite and > 0");
    }
  }
  for (float o : g.origin) {
    if (!std::isfinite(o)) throw MvolError(Code::BadSpacing, "origin must be finite");
  }

  const std::size_t elem = dtype == static_cast<std::uint8_t>(MvolDtype::F32) ? 4 : 1;
  const std::size_t expected = g.dims.count() * elem;
  const std::size_t payload = bytes.size() - kMvolHeaderSize;
  if (payload < expected) {
    throw MvolError(Code::Truncated, "truncated payload: expected " + std::to_string(expected) +
                                         " bytes, found " + std::to_string(payload));
  }
  if (payload > expected) {
    throw MvolError(Code::TrailingData, "payload has " + std::to_string(payload - expected) +
                                            " trailing bytes");
  }

  const auto* src = bytes.data() + kMvolHeaderSize;
  if (elem == 4) {
    std::vector<float> values(g.dims.count());
    std::memcpy(values.data(), src, expected);
    return Volume(g, std::move(values));
  }
  std::vector<std::uint8_t> labels(src, src + expected);
  for (std::uint8_t v : labels) {
    if (v > 1) throw MvolError(Code::BadLabel, "label value " + std::to_string(v) + " not in {0,1}");
  }
  return LabelMask(g, std::move(labels));
}

void write_mvol(const Volume& vol, const std::filesystem::path& path) {
  write_bytes(encode_mvol(vol), path);
}

void write_mvol(const LabelMask& mask, const std::filesystem::path& path) {
  write_bytes(encode_mvol(mask), path);
}

MvolObject read_mvol(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MvolError(MvolError::Code::Io, "cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode_mvol(bytes);
}

Volume read_volume(const std::filesystem::path& path) {
  auto obj = read_mvol(path);
  if (auto* v = std::get_if<Volume>(&obj)) return std::move(*v);
  throw MvolError(MvolError::Code::BadDtype, path.string() + ": expected f32 volume, found u8 mask");
}

LabelMask read_mask(const std::filesystem::path& path) {
  auto obj = read_mvol(path);
  if (auto* m = std::get_if<LabelMask>(&obj)) return std::move(*m);
  throw MvolError(MvolError::Code::BadDtype, path.string() + ": expected u8 mask, found f32 volume");
}

}  // namespace lsc
