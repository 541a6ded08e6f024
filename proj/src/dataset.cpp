#include "wan/dataset.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "wan/common.hpp"
#include "wan/data.hpp"
#include "wan/pnm.hpp"

namespace wan::dataset {
namespace {

constexpr const char* kHeader = "path,split,weak_label,mask_path";

std::atomic<int64_t> g_mask_reads{0};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

bool known_split(const std::string& s) {
  return s == "train" || s == "val" || s == "test";
}

}  // namespace

Manifest read_manifest(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path);

  Manifest m;
  m.root = std::filesystem::path(csv_path).parent_path().string();
  if (m.root.empty()) m.root = ".";

  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "empty manifest " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check(line == kHeader, "manifest header must be `" + std::string(kHeader) + "` in " + csv_path);

  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    check(f.size() == 4, "manifest row needs 4 fields: " + line);
    ManifestEntry e;
    e.path = f[0];
    e.split = f[1];
    e.mask_path = f[3];
    check(!e.path.empty(), "manifest row with empty path");
    check(known_split(e.split), "unknown split `" + e.split + "` in " + csv_path);
    check(seen.insert(e.path).second, "file referenced twice: " + e.path);
    if (f[2].empty()) {
      e.weak_label = -1;
    } else {
      check(f[2] == "0" || f[2] == "1", "weak_label must be 0 or 1, got `" + f[2] + "`");
      e.weak_label = f[2] == "1" ? 1 : 0;
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::string& csv_path, const std::vector<ManifestEntry>& entries) {
  std::unordered_set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    check(!e.path.empty(), "manifest row with empty path");
    check(known_split(e.split), "unknown split `" + e.split + "`");
    check(e.weak_label == -1 || e.weak_label == 0 || e.weak_label == 1,
          "weak_label out of range");
    check(seen.insert(e.path).second, "file referenced twice: " + e.path);
  }
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot write " + csv_path);
  out << kHeader << '\n';
  for (const ManifestEntry& e : entries) {
    out << e.path << ',' << e.split << ',';
    if (e.weak_label >= 0) out << e.weak_label;
    out << ',' << e.mask_path << '\n';
  }
  if (!out) throw IoError("short write to " + csv_path);
}

std::vector<ManifestEntry> split_entries(const Manifest& m, const std::string& split) {
  check(known_split(split), "unknown split `" + split + "`");
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : m.entries)
    if (e.split == split) out.push_back(e);
  return out;
}

Tensor load_image(const Manifest& m, const ManifestEntry& e) {
  pnm::Image img = pnm::read_pnm((std::filesystem::path(m.root) / e.path).string());
  check(img.channels == 3, "image must be a 3-channel PPM: " + e.path);
  return data::normalize(img);
}

Tensor load_mask(const Manifest& m, const ManifestEntry& e) {
  check(!e.mask_path.empty(), "entry has no mask: " + e.path);
  g_mask_reads.fetch_add(1, std::memory_order_relaxed);
  pnm::Image img = pnm::read_pnm((std::filesystem::path(m.root) / e.mask_path).string());
  return data::mask_from_pnm(img);
}

int64_t mask_reads() { return g_mask_reads.load(std::memory_order_relaxed); }

Tensor stack(const std::vector<Tensor>& samples) {
  check(!samples.empty(), "cannot stack zero samples");
  const std::vector<int64_t>& s0 = samples[0].shape();
  std::vector<int64_t> shape;
  shape.push_back(static_cast<int64_t>(samples.size()));
  shape.insert(shape.end(), s0.begin(), s0.end());
  Tensor out = Tensor::zeros(shape);
  const size_t stride = samples[0].values().size();
  for (size_t i = 0; i < samples.size(); ++i) {
    check(samples[i].shape() == s0, "stacked samples must share a shape");
    std::copy(samples[i].values().begin(), samples[i].values().end(),
              out.values().begin() + static_cast<ptrdiff_t>(i * stride));
  }
  return out;
}

}  // namespace wan::dataset
