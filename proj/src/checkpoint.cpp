#include "gocard/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "gocard/errors.hpp"

namespace gocard {

namespace {

constexpr char kMagic[4] = {'G', 'C', 'R', 'D'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

float get_f32_or_throw(std::istream& in, const std::string& name) {
  std::uint32_t bits;
  if (!get_u32(in, bits)) throw ParseError("weight file truncated inside tensor '" + name + "'");
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void write_weights(const std::string& path, const std::vector<ParamRef>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  put_u32(out, kWeightFormatVersion);
  for (const auto& t : tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    const Shape& shape = t.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.tensor.values()) put_f32(out, static_cast<float>(v));
  }
  if (!out) throw DataError("failed writing weights to '" + path + "'");
}

std::map<std::string, Tensor> read_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError("'" + path + "' is not a weight file (bad magic)");
  }
  std::uint32_t version;
  if (!get_u32(in, version)) throw ParseError("weight file truncated before version");
  if (version != kWeightFormatVersion) {
    throw ParseError("unsupported weight format version " + std::to_string(version));
  }
  std::map<std::string, Tensor> result;
  for (;;) {
    std::uint32_t name_len;
    if (!get_u32(in, name_len)) break;  // clean EOF between records
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw ParseError("weight file truncated inside a tensor name");
    }
    std::uint32_t rank;
    if (!get_u32(in, rank)) throw ParseError("weight file truncated inside tensor '" + name + "'");
    Shape shape(rank);
    long long numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t d;
      if (!get_u32(in, d)) throw ParseError("weight file truncated inside tensor '" + name + "'");
      shape[i] = static_cast<int>(d);
      numel *= shape[i];
    }
    std::vector<double> data(static_cast<std::size_t>(numel));
    for (auto& v : data) v = static_cast<double>(get_f32_or_throw(in, name));
    if (result.count(name)) throw ParseError("duplicate tensor '" + name + "' in weight file");
    result.emplace(name, Tensor::from_data(std::move(shape), std::move(data)));
  }
  return result;
}

void save_weights(const std::string& path, const Sequential& net) {
  write_weights(path, net.parameters());
}

namespace {

void restore_params(const std::string& path, const std::vector<ParamRef>& params,
                    std::map<std::string, Tensor>& stored) {
  for (const auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) {
      throw DataError("checkpoint '" + path + "' is missing tensor '" + p.name + "'");
    }
    if (it->second.shape() != p.tensor.shape()) {
      throw DataError("checkpoint tensor '" + p.name + "' has shape " +
                      shape_str(it->second.shape()) + ", model expects " +
                      shape_str(p.tensor.shape()));
    }
    Tensor dst_handle = p.tensor;  // shared handle, mutation reaches the layer
    std::span<double> dst = dst_handle.mutable_values();
    std::span<const double> src = it->second.values();
    std::copy(src.begin(), src.end(), dst.begin());
    stored.erase(it);
  }
  if (!stored.empty()) {
    throw DataError("checkpoint '" + path + "' carries unknown tensor '" +
                    stored.begin()->first + "'");
  }
}

}  // namespace

void load_weights(const std::string& path, Sequential& net) {
  auto stored = read_weights(path);
  restore_params(path, net.parameters(), stored);
}

void save_weights(const std::string& path, const DetectionModel& model) {
  std::vector<ParamRef> tensors = model.net.parameters();
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(model.anchors.size()) * 2);
  for (const auto& [w, h] : model.anchors.pairs) {
    flat.push_back(w);
    flat.push_back(h);
  }
  tensors.push_back({"anchors", Tensor::from_data({model.anchors.size(), 2}, std::move(flat))});
  write_weights(path, tensors);
}

void load_weights(const std::string& path, DetectionModel& model) {
  auto stored = read_weights(path);
  auto it = stored.find("anchors");
  if (it == stored.end()) throw DataError("detection checkpoint '" + path + "' lacks anchors");
  const Tensor& a = it->second;
  if (a.rank() != 2 || a.shape()[1] != 2) {
    throw DataError("anchors tensor must be (A, 2), got " + shape_str(a.shape()));
  }
  AnchorSet anchors;
  for (int i = 0; i < a.shape()[0]; ++i) {
    anchors.pairs.emplace_back(a.at({i, 0}), a.at({i, 1}));
  }
  anchors.validate();
  stored.erase(it);
  restore_params(path, model.net.parameters(), stored);
  model.anchors = std::move(anchors);
}

}  // namespace gocard
