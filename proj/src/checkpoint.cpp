#include "wan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace wan::models {

namespace {

constexpr char kMagic[8] = {'W', 'A', 'N', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ofstream& out, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  check(in.good(), "checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_f32(std::ofstream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(out.is_open(), "checkpoint: cannot open for writing: " + path);
  out.write(kMagic, 8);
  write_u64(out, records.size());
  for (const auto& [name, t] : records) {
    check(t.defined(), "checkpoint: undefined tensor: " + name);
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, t.shape().size());
    for (int64_t d : t.shape()) write_u64(out, static_cast<uint64_t>(d));
    for (double v : t.values()) write_f32(out, static_cast<float>(v));
  }
  check(out.good(), "checkpoint: write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.is_open(), "checkpoint: cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  check(in.good() && std::memcmp(magic, kMagic, 8) == 0,
        "checkpoint: bad magic in " + path);
  const uint64_t count = read_u64(in);
  NamedTensors records;
  records.reserve(count);
  for (uint64_t r = 0; r < count; ++r) {
    const uint64_t name_len = read_u64(in);
    check(name_len <= 4096, "checkpoint: unreasonable name length");
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    check(in.good(), "checkpoint: truncated name");
    const uint64_t rank = read_u64(in);
    check(rank <= 8, "checkpoint: unreasonable rank");
    Shape shape;
    for (uint64_t i = 0; i < rank; ++i) shape.push_back(static_cast<int64_t>(read_u64(in)));
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.values()) {
      unsigned char buf[4];
      in.read(reinterpret_cast<char*>(buf), 4);
      check(in.good(), "checkpoint: truncated values");
      uint32_t bits = 0;
      for (int i = 0; i < 4; ++i) bits |= static_cast<uint32_t>(buf[i]) << (8 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
    records.emplace_back(std::move(name), std::move(t));
  }
  return records;
}

void load_into(const NamedTensors& records, const NamedTensors& params,
               const std::string& prefix) {
  std::map<std::string, Tensor> by_name;
  for (const auto& [name, t] : records)
    if (name.rfind(prefix, 0) == 0) by_name.emplace(name, t);
  check(by_name.size() == params.size(),
        "checkpoint: record count under prefix '" + prefix + "' (" +
            std::to_string(by_name.size()) + ") does not match parameter count (" +
            std::to_string(params.size()) + ")");
  for (const auto& [name, param] : params) {
    auto it = by_name.find(name);
    check(it != by_name.end(), "checkpoint: missing record: " + name);
    check(it->second.shape() == param.shape(), "checkpoint: shape mismatch for " + name);
    Tensor dst = param;
    dst.values() = it->second.values();
  }
}

int64_t infer_base_filters(const NamedTensors& records) {
  for (const auto& [name, t] : records)
    if (name == "generator/enc1/conv1/weight") return t.dim(0);
  throw ContractViolation("checkpoint: no generator record found");
}

uint64_t file_content_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.is_open(), "cannot open for hashing: " + path);
  uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

}  // namespace wan::models
