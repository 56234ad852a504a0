#include "lsc/raw_stack.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <vector>

namespace lsc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::runtime_error("raw stack sidecar missing key '" + key + "'");
  return it->second;
}

template <class T>
void append_slice(const std::vector<char>& bytes, std::vector<float>& out) {
  const std::size_t n = bytes.size() / sizeof(T);
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
    out.push_back(static_cast<float>(v));
  }
}

}  // namespace

std::map<std::string, std::string> read_key_value_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

Volume import_raw_stack(const std::filesystem::path& dir) {
  const auto kv = read_key_value_file(dir / "stack.txt");
  GridGeometry g;
  g.dims.nx = static_cast<std::uint32_t>(std::stoul(require(kv, "nx")));
  g.dims.ny = static_cast<std::uint32_t>(std::stoul(require(kv, "ny")));
  g.spacing = {std::stof(require(kv, "spacing_x")), std::stof(require(kv, "spacing_y")),
               std::stof(require(kv, "spacing_z"))};
  const char* origin_keys[] = {"origin_x", "origin_y", "origin_z"};
  for (int a = 0; a < 3; ++a) {
    if (auto it = kv.find(origin_keys[a]); it != kv.end()) g.origin[a] = std::stof(it->second);
  }
  const std::string dtype = require(kv, "dtype");
  std::size_t elem = 0;
  if (dtype == "u8") elem = 1;
  else if (dtype == "i16" || dtype == "u16") elem = 2;
  else if (dtype == "f32") elem = 4;
  else throw std::runtime_error("raw stack: unsupported dtype '" + dtype + "'");

  std::vector<std::filesystem::path> slices;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".raw") slices.push_back(entry.path());
  }
  if (slices.empty()) throw std::runtime_error("raw stack: no .raw slices in " + dir.string());
  std::sort(slices.begin(), slices.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
  g.dims.nz = static_cast<std::uint32_t>(slices.size());

  const std::size_t slice_bytes = std::size_t{g.dims.nx} * g.dims.ny * elem;
  std::vector<float> values;
  values.reserve(g.dims.count());
  for (const auto& path : slices) {
    std::ifstream is(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() != slice_bytes) {
      throw std::runtime_error("raw stack: slice " + path.filename().string() + " has " +
                               std::to_string(bytes.size()) + " bytes, expected " +
                               std::to_string(slice_bytes));
    }
    if (dtype == "u8") append_slice<std::uint8_t>(bytes, values);
    else if (dtype == "i16") append_slice<std::int16_t>(bytes, values);
    else if (dtype == "u16") append_slice<std::uint16_t>(bytes, values);
    else append_slice<float>(bytes, values);
  }
  return {g, std::move(values)};
}

}  // namespace lsc
