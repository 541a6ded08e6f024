#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wan/dataset.hpp"
#include "wan/models.hpp"
#include "wan/tensor.hpp"

namespace wan::metrics {

struct ConfusionCounts {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// prediction counts as positive when prob >= threshold (ties positive)
ConfusionCounts confusion(const Tensor& pred_prob, const Tensor& mask, double threshold = 0.5);

double iou(const ConfusionCounts& c);  // tp/(tp+fp+fn), 1.0 when that sum is 0
double f1(const ConfusionCounts& c);   // 2tp/(2tp+fp+fn), 1.0 when 0

struct EvalReport {
  std::string dataset;
  std::string split;
  std::string method;
  ConfusionCounts counts;
  double iou_value = 0.0;
  double f1_value = 0.0;
  std::string checkpoint_hash;
};

// pixel counts pooled over the whole split (micro-average), metrics computed
// once at the end; every entry in the split must carry a mask
EvalReport evaluate_dataset(const models::Generator& gen, const dataset::Manifest& m,
                            const std::string& split, int64_t batch_size = 8);

// CSV schema: dataset,split,method,iou,f1,tp,fp,fn,tn,checkpoint_hash
void append_eval_report(const std::string& csv_path, const EvalReport& r);
std::vector<EvalReport> read_eval_reports(const std::string& csv_path);

}  // namespace wan::metrics
