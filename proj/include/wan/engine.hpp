#pragma once

#include <string>
#include <vector>

#include "wan/config.hpp"
#include "wan/dataset.hpp"
#include "wan/models.hpp"

namespace wan::engine {

// per-step scalar log; unused columns stay 0 and are dropped at serialization
struct RunRow {
  int64_t step = 0;
  double seg = 0.0;
  double adv = 0.0;
  double disc = 0.0;
  double hd = 0.0;
};

// -1 marks a side that was not evaluated (IoU itself lives in [0,1])
struct EvalSnapshot {
  int64_t step = 0;
  double source_iou = -1.0;
  double target_iou = -1.0;
};

struct RunResult {
  std::vector<RunRow> rows;
  std::vector<EvalSnapshot> evals;
};

// supervised minimization of the segmentation loss on the source train split;
// batches are drawn with replacement from substream(seed, "source_batches")
RunResult train_source(const config::AdaptConfig& cfg, models::Generator& gen,
                       const dataset::Manifest& source,
                       const dataset::Manifest* target_for_eval = nullptr);

// alternating per-batch schedule: one discriminator step on detached
// representations, one generator step on seg (+ weak-label head in WAN modes),
// then a separate adversarial update of the generator when lambda_adv > 0.
// Target masks are never read; a mask-read audit enforces that at runtime.
RunResult adapt(const config::AdaptConfig& cfg, models::Generator& gen,
                models::Discriminator& disc, models::DetectionHead* head,
                const dataset::Manifest& source, const dataset::Manifest& target);

// supervised continuation on the target train split (upper bound)
RunResult finetune(const config::AdaptConfig& cfg, models::Generator& gen,
                   const dataset::Manifest& target,
                   const dataset::Manifest* source_for_eval = nullptr);

struct Retention {
  double iou_before = 0.0;
  double iou_after = 0.0;
  double relative_drop = 0.0;  // (before - after) / before, 0 when before is 0
};

Retention evaluate_retention(const models::Generator& before, const models::Generator& after,
                             const dataset::Manifest& source, const std::string& split,
                             int64_t batch_size);

// CSV columns depend on the mode: seg only for supervised runs, + adv/disc for
// adversarial runs, + hd for WAN runs
std::string losses_csv_header(config::Mode mode);
void write_losses_csv(const std::string& path, config::Mode mode,
                      const std::vector<RunRow>& rows);
void write_eval_csv(const std::string& path, const std::vector<EvalSnapshot>& evals);

// run manifest: the serialized effective config plus checkpoint_file and
// checkpoint_hash lines; parse_run_manifest() inverts write_run_manifest()
struct RunManifest {
  config::AdaptConfig config;
  std::string checkpoint_file;
  std::string checkpoint_hash;
};
void write_run_manifest(const std::string& path, const config::AdaptConfig& cfg,
                        const std::string& checkpoint_file, const std::string& checkpoint_hash);
RunManifest parse_run_manifest(const std::string& path);

std::string hash_hex(uint64_t hash);

}  // namespace wan::engine
