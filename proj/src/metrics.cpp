#include "wan/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wan/common.hpp"

namespace wan::metrics {
namespace {

constexpr const char* kHeader = "dataset,split,method,iou,f1,tp,fp,fn,tn,checkpoint_hash";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

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

}  // namespace

ConfusionCounts confusion(const Tensor& pred_prob, const Tensor& mask, double threshold) {
  check(pred_prob.shape() == mask.shape(), "confusion needs matching shapes");
  ConfusionCounts c;
  const std::vector<double>& p = pred_prob.values();
  const std::vector<double>& m = mask.values();
  for (size_t i = 0; i < p.size(); ++i) {
    check(m[i] == 0.0 || m[i] == 1.0, "mask must be binary");
    const bool pred = p[i] >= threshold;
    const bool truth = m[i] == 1.0;
    if (pred && truth)
      ++c.tp;
    else if (pred && !truth)
      ++c.fp;
    else if (!pred && truth)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double iou(const ConfusionCounts& c) {
  const uint64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

double f1(const ConfusionCounts& c) {
  const uint64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

EvalReport evaluate_dataset(const models::Generator& gen, const dataset::Manifest& m,
                            const std::string& split, int64_t batch_size) {
  check(batch_size >= 1, "batch_size must be at least 1");
  std::vector<dataset::ManifestEntry> entries = dataset::split_entries(m, split);
  check(!entries.empty(), "split `" + split + "` has no samples to evaluate");

  NoGradGuard no_grad;
  EvalReport r;
  r.split = split;
  for (size_t start = 0; start < entries.size(); start += static_cast<size_t>(batch_size)) {
    const size_t stop = std::min(entries.size(), start + static_cast<size_t>(batch_size));
    std::vector<Tensor> images, masks;
    for (size_t i = start; i < stop; ++i) {
      check(!entries[i].mask_path.empty(), "cannot evaluate unmasked sample " + entries[i].path);
      images.push_back(dataset::load_image(m, entries[i]));
      masks.push_back(dataset::load_mask(m, entries[i]));
    }
    Tensor seg = gen.forward(dataset::stack(images)).seg;
    r.counts += confusion(seg, dataset::stack(masks));
  }
  r.iou_value = iou(r.counts);
  r.f1_value = f1(r.counts);
  return r;
}

void append_eval_report(const std::string& csv_path, const EvalReport& r) {
  const bool fresh = !std::filesystem::exists(csv_path);
  std::ofstream out(csv_path, std::ios::app);
  if (!out) throw IoError("cannot write " + csv_path);
  if (fresh) out << kHeader << '\n';
  out << r.dataset << ',' << r.split << ',' << r.method << ',' << format_double(r.iou_value)
      << ',' << format_double(r.f1_value) << ',' << r.counts.tp << ',' << r.counts.fp << ','
      << r.counts.fn << ',' << r.counts.tn << ',' << r.checkpoint_hash << '\n';
  if (!out) throw IoError("short write to " + csv_path);
}

std::vector<EvalReport> read_eval_reports(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw IoError("cannot open " + csv_path);
  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "empty report " + csv_path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  check(line == kHeader, "report header must be `" + std::string(kHeader) + "`");

  std::vector<EvalReport> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv_line(line);
    check(f.size() == 10, "report row needs 10 fields: " + line);
    EvalReport r;
    r.dataset = f[0];
    r.split = f[1];
    r.method = f[2];
    try {
      r.iou_value = std::stod(f[3]);
      r.f1_value = std::stod(f[4]);
      r.counts.tp = std::stoull(f[5]);
      r.counts.fp = std::stoull(f[6]);
      r.counts.fn = std::stoull(f[7]);
      r.counts.tn = std::stoull(f[8]);
    } catch (const std::exception&) {
      throw ContractViolation("non-numeric report row: " + line);
    }
    r.checkpoint_hash = f[9];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace wan::metrics
