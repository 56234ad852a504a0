#include "lsc/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lsc::nn {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'F', 'F', 'W'};

template <class U>
void put(std::vector<std::uint8_t>& out, U v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <class U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint truncated in manifest");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

template <class V>
std::vector<std::uint32_t> dims_of(const V& shape) {
  return {shape.begin(), shape.end()};
}

void copy_into(const CheckpointEntry& e, Param<float>& p) {
  if (e.values.size() != p.size()) {
    throw CheckpointError("checkpoint entry '" + e.name + "' has " + std::to_string(e.values.size()) +
                          " values, expected " + std::to_string(p.size()));
  }
  p.value = e.values;
}

}  // namespace

const CheckpointEntry* CheckpointData::find(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put<std::uint8_t>(out, kCheckpointVersion);
  out.insert(out.end(), 3, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(data.entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : data.entries) {
    if (e.name.size() > 0xFFFF) throw CheckpointError("checkpoint entry name too long");
    if (product(e.dims) != e.values.size()) {
      throw CheckpointError("checkpoint entry '" + e.name + "' dims disagree with value count");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint32_t>(out, d);
    put<std::uint64_t>(out, offset);
    offset += e.values.size() * sizeof(float);
  }
  for (const auto& e : data.entries) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(e.values.data());
    out.insert(out.end(), p, p + e.values.size() * sizeof(float));
  }
  return out;
}

CheckpointData decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a weight file: bad magic");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.get<std::uint8_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported weight file version " + std::to_string(version));
  }
  r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  r.get<std::uint8_t>();
  const auto count = r.get<std::uint32_t>();
  CheckpointData data;
  std::vector<std::uint64_t> offsets;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.str(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint8_t>();
    for (int k = 0; k < rank; ++k) e.dims.push_back(r.get<std::uint32_t>());
    offsets.push_back(r.get<std::uint64_t>());
    data.entries.push_back(std::move(e));
  }
  const std::size_t payload_start = 4 + r.pos();
  const std::size_t payload_size = bytes.size() - payload_start;
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < data.entries.size(); ++i) {
    auto& e = data.entries[i];
    const std::size_t n = product(e.dims);
    if (offsets[i] != expected) throw CheckpointError("checkpoint entry '" + e.name + "' has a bad offset");
    if (offsets[i] + n * sizeof(float) > payload_size) {
      throw CheckpointError("checkpoint truncated in payload of '" + e.name + "'");
    }
    e.values.resize(n);
    std::memcpy(e.values.data(), bytes.data() + payload_start + offsets[i], n * sizeof(float));
    expected += n * sizeof(float);
  }
  if (expected != payload_size) throw CheckpointError("checkpoint has trailing bytes");
  return data;
}

CheckpointData snapshot(MffNet<float>& net, Adam<float>* optimizer) {
  CheckpointData data;
  const NetworkConfig& c = net.config();
  CheckpointEntry cfg{"config", {}, {float(c.in_channels), float(c.stem_channels), float(c.growth),
                                     float(c.dense_layers), float(c.c1), float(c.c2), float(c.c3)}};
  for (double l : c.lambda) cfg.values.push_back(float(l));
  cfg.dims = {std::uint32_t(cfg.values.size())};
  data.entries.push_back(std::move(cfg));

  const auto params = net.parameters();
  for (const auto& p : params) data.entries.push_back({p.name, dims_of(p.param->shape), p.param->value});
  for (const auto& b : net.buffers()) data.entries.push_back({b.name, dims_of(b.param->shape), b.param->value});
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto dims = dims_of(params[i].param->shape);
      data.entries.push_back({"adam.m." + params[i].name, dims, optimizer->first_moments()[i]});
      data.entries.push_back({"adam.v." + params[i].name, dims, optimizer->second_moments()[i]});
    }
    data.entries.push_back({"adam.step", {1}, {float(optimizer->steps())}});
  }
  return data;
}

MffNet<float> restore_network(const CheckpointData& data) {
  const CheckpointEntry* cfg = data.find("config");
  if (!cfg || cfg->values.size() < 7) throw CheckpointError("checkpoint has no network config");
  NetworkConfig c;
  c.in_channels = int(cfg->values[0]);
  c.stem_channels = int(cfg->values[1]);
  c.growth = int(cfg->values[2]);
  c.dense_layers = int(cfg->values[3]);
  c.c1 = int(cfg->values[4]);
  c.c2 = int(cfg->values[5]);
  c.c3 = int(cfg->values[6]);
  c.lambda.assign(cfg->values.begin() + 7, cfg->values.end());
  MffNet<float> net(c, 0);
  auto load = [&](const std::vector<NamedParam<float>>& list) {
    for (const auto& p : list) {
      const CheckpointEntry* e = data.find(p.name);
      if (!e) throw CheckpointError("checkpoint is missing '" + p.name + "'");
      copy_into(*e, *p.param);
    }
  };
  load(net.parameters());
  load(net.buffers());
  return net;
}

void restore_optimizer(const CheckpointData& data, MffNet<float>& net, Adam<float>& optimizer) {
  const CheckpointEntry* step = data.find("adam.step");
  if (!step || step->values.size() != 1) throw CheckpointError("checkpoint has no optimizer state");
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const CheckpointEntry* m = data.find("adam.m." + params[i].name);
    const CheckpointEntry* v = data.find("adam.v." + params[i].name);
    if (!m || !v || m->values.size() != params[i].param->size() || v->values.size() != params[i].param->size()) {
      throw CheckpointError("checkpoint optimizer state does not match '" + params[i].name + "'");
    }
    optimizer.first_moments()[i] = m->values;
    optimizer.second_moments()[i] = v->values;
  }
  optimizer.set_steps(std::int64_t(step->values[0]));
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto bytes = encode_checkpoint(data);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw CheckpointError("failed writing '" + path.string() + "'");
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace lsc::nn
