#include "wan/engine.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include "wan/common.hpp"
#include "wan/losses.hpp"
#include "wan/metrics.hpp"
#include "wan/ops.hpp"
#include "wan/optim.hpp"

namespace wan::engine {
namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<Tensor> param_values(const models::NamedTensors& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

AdamConfig adam_config(const config::AdaptConfig& cfg, double lr) {
  AdamConfig a;
  a.lr = lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.weight_decay = cfg.weight_decay;
  return a;
}

struct SourceBatch {
  Tensor images;
  Tensor masks;
};

struct TargetBatch {
  Tensor images;
  Tensor weak;  // [B,1], defined only when weak labels were requested
};

std::vector<size_t> draw_indices(Rng& rng, size_t n, int64_t k) {
  std::vector<size_t> out;
  out.reserve(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i)
    out.push_back(static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(n))));
  return out;
}

SourceBatch load_source_batch(const dataset::Manifest& m,
                              const std::vector<dataset::ManifestEntry>& entries,
                              const std::vector<size_t>& idx) {
  std::vector<Tensor> images, masks;
  for (size_t i : idx) {
    images.push_back(dataset::load_image(m, entries[i]));
    masks.push_back(dataset::load_mask(m, entries[i]));
  }
  return {dataset::stack(images), dataset::stack(masks)};
}

TargetBatch load_target_batch(const dataset::Manifest& m,
                              const std::vector<dataset::ManifestEntry>& entries,
                              const std::vector<size_t>& idx, bool want_weak) {
  std::vector<Tensor> images;
  std::vector<double> weak;
  for (size_t i : idx) {
    images.push_back(dataset::load_image(m, entries[i]));
    if (want_weak) weak.push_back(entries[i].weak_label == 1 ? 1.0 : 0.0);
  }
  TargetBatch b;
  b.images = dataset::stack(images);
  if (want_weak)
    b.weak = Tensor::from_data({static_cast<int64_t>(idx.size()), 1}, std::move(weak));
  return b;
}

// periodic val-split snapshot; sides without a val split are skipped
void maybe_eval(int64_t step, const config::AdaptConfig& cfg, const models::Generator& gen,
                const dataset::Manifest* src, const dataset::Manifest* tgt, RunResult& out,
                int64_t* own_mask_reads) {
  if (cfg.eval_every <= 0 || step % cfg.eval_every != 0) return;
  EvalSnapshot snap;
  snap.step = step;
  const int64_t before = dataset::mask_reads();
  if (src != nullptr && !dataset::split_entries(*src, "val").empty())
    snap.source_iou = metrics::evaluate_dataset(gen, *src, "val", cfg.batch_size).iou_value;
  if (tgt != nullptr && !dataset::split_entries(*tgt, "val").empty())
    snap.target_iou = metrics::evaluate_dataset(gen, *tgt, "val", cfg.batch_size).iou_value;
  if (own_mask_reads != nullptr) *own_mask_reads += dataset::mask_reads() - before;
  out.evals.push_back(snap);
}

RunResult supervised_loop(const config::AdaptConfig& cfg, models::Generator& gen,
                          const dataset::Manifest& train_m, const char* stream_tag,
                          const dataset::Manifest* eval_src, const dataset::Manifest* eval_tgt) {
  std::vector<dataset::ManifestEntry> entries = dataset::split_entries(train_m, "train");
  check(!entries.empty(), "train split is empty");
  for (const auto& e : entries)
    check(!e.mask_path.empty(), "unlabeled sample in supervised stream: " + e.path);

  AdamOptimizer adam(param_values(gen.named_parameters()),
                     adam_config(cfg, cfg.lr_generator));
  Rng stream(Rng::substream(cfg.seed, stream_tag));

  RunResult out;
  for (int64_t step = 1; step <= cfg.max_steps; ++step) {
    SourceBatch batch =
        load_source_batch(train_m, entries, draw_indices(stream, entries.size(), cfg.batch_size));
    adam.zero_grad();
    Tensor loss = losses::seg_loss(gen.forward(batch.images).seg, batch.masks);
    backward(loss);
    adam.step();
    out.rows.push_back({step, loss.item(), 0.0, 0.0, 0.0});
    maybe_eval(step, cfg, gen, eval_src, eval_tgt, out, nullptr);
  }
  return out;
}

}  // namespace

RunResult train_source(const config::AdaptConfig& cfg, models::Generator& gen,
                       const dataset::Manifest& source,
                       const dataset::Manifest* target_for_eval) {
  return supervised_loop(cfg, gen, source, "source_batches", &source, target_for_eval);
}

RunResult finetune(const config::AdaptConfig& cfg, models::Generator& gen,
                   const dataset::Manifest& target, const dataset::Manifest* source_for_eval) {
  return supervised_loop(cfg, gen, target, "target_batches", source_for_eval, &target);
}

RunResult adapt(const config::AdaptConfig& cfg, models::Generator& gen,
                models::Discriminator& disc, models::DetectionHead* head,
                const dataset::Manifest& source, const dataset::Manifest& target) {
  check(config::is_adversarial(cfg.mode), "adapt requires an adaptation mode");
  const bool wan = config::is_wan(cfg.mode);
  const bool latent = config::is_latent(cfg.mode);
  if (wan) check(head != nullptr, "WAN modes need a detection head");

  std::vector<dataset::ManifestEntry> src_entries = dataset::split_entries(source, "train");
  std::vector<dataset::ManifestEntry> tgt_entries = dataset::split_entries(target, "train");
  check(!src_entries.empty(), "source train split is empty");
  check(!tgt_entries.empty(), "target train split is empty");
  for (const auto& e : src_entries)
    check(!e.mask_path.empty(), "unlabeled sample in source stream: " + e.path);
  if (wan)
    for (const auto& e : tgt_entries)
      check(e.weak_label == 0 || e.weak_label == 1,
            "WAN modes need a weak label on every target sample, missing for " + e.path);

  // the audit: every mask read below is tallied; any untallied read means a
  // target train mask slipped through somewhere
  const int64_t audit_start = dataset::mask_reads();
  int64_t own_reads = 0;

  models::NamedTensors gen_named = gen.named_parameters();
  std::vector<Tensor> gen_params = param_values(gen_named);
  std::vector<Tensor> gen_and_head = gen_params;
  if (wan)
    for (Tensor& t : param_values(head->named_parameters())) gen_and_head.push_back(t);
  std::vector<Tensor> disc_params = param_values(disc.named_parameters());

  // the adversarial optimizer owns exactly the parameters its loss can reach:
  // the whole generator for output-space scores, encoder plus bottleneck for
  // latent scores (the decoder sits behind the representation there)
  std::vector<Tensor> adv_params;
  for (auto& [name, t] : gen_named)
    if (!latent || name.rfind("generator/enc", 0) == 0 ||
        name.rfind("generator/bottleneck", 0) == 0)
      adv_params.push_back(t);

  AdamOptimizer adam_gen(gen_and_head, adam_config(cfg, cfg.lr_generator));
  AdamOptimizer adam_disc(disc_params, adam_config(cfg, cfg.lr_discriminator));
  std::optional<AdamOptimizer> adam_adv;
  if (cfg.lambda_adv > 0.0)
    adam_adv.emplace(adv_params, adam_config(cfg, cfg.lr_adversarial));

  Rng src_stream(Rng::substream(cfg.seed, "source_batches"));
  Rng tgt_stream(Rng::substream(cfg.seed, "target_batches"));

  auto representation = [&](const Tensor& images) {
    return latent ? gen.forward_latent(images) : gen.forward(images).seg;
  };

  RunResult out;
  for (int64_t step = 1; step <= cfg.max_steps; ++step) {
    SourceBatch src = load_source_batch(
        source, src_entries, draw_indices(src_stream, src_entries.size(), cfg.batch_size));
    own_reads += cfg.batch_size;
    TargetBatch tgt = load_target_batch(
        target, tgt_entries, draw_indices(tgt_stream, tgt_entries.size(), cfg.batch_size), wan);

    RunRow row;
    row.step = step;

    // discriminator step on detached representations
    Tensor rep_src, rep_tgt;
    {
      NoGradGuard ng;
      rep_src = representation(src.images);
      rep_tgt = representation(tgt.images);
    }
    adam_disc.zero_grad();
    Tensor d_loss = losses::disc_loss(disc.forward(rep_src), disc.forward(rep_tgt));
    backward(d_loss);
    adam_disc.step();
    row.disc = d_loss.item();

    // generator step: segmentation on source, weak-label head on target
    adam_gen.zero_grad();
    models::GeneratorOutput src_out = gen.forward(src.images);
    Tensor seg_term = losses::seg_loss(src_out.seg, src.masks);
    row.seg = seg_term.item();
    Tensor total = seg_term;
    if (wan) {
      models::GeneratorOutput tgt_out = gen.forward(tgt.images);
      Tensor hd_term =
          losses::weak_label_loss(head->forward(tgt_out.latent, tgt_out.last_decoder), tgt.weak);
      row.hd = hd_term.item();
      losses::LossWeights w;
      w.alpha_hd = cfg.alpha_hd;
      total = losses::generator_loss(seg_term, hd_term, w);
    }
    backward(total);
    adam_gen.step();

    // adversarial update on a fresh target forward so the gradient reflects
    // the parameters the optimizer just wrote; skipped entirely at lambda 0,
    // which is what makes the degenerate mode coincide with train_source
    if (cfg.lambda_adv > 0.0) {
      for (Tensor& p : disc_params) p.set_requires_grad(false);
      adam_adv->zero_grad();
      Tensor a_loss = losses::adv_loss(disc.forward(representation(tgt.images)));
      row.adv = a_loss.item();
      backward(ops::scale(a_loss, cfg.lambda_adv));
      adam_adv->step();
      for (Tensor& p : disc_params) p.set_requires_grad(true);
    }

    out.rows.push_back(row);
    maybe_eval(step, cfg, gen, &source, &target, out, &own_reads);
  }

  check(dataset::mask_reads() == audit_start + own_reads,
        "mask-read audit failed: a target mask was read during adaptation");
  return out;
}

Retention evaluate_retention(const models::Generator& before, const models::Generator& after,
                             const dataset::Manifest& source, const std::string& split,
                             int64_t batch_size) {
  Retention r;
  r.iou_before = metrics::evaluate_dataset(before, source, split, batch_size).iou_value;
  r.iou_after = metrics::evaluate_dataset(after, source, split, batch_size).iou_value;
  r.relative_drop =
      r.iou_before == 0.0 ? 0.0 : (r.iou_before - r.iou_after) / r.iou_before;
  return r;
}

std::string losses_csv_header(config::Mode mode) {
  if (!config::is_adversarial(mode)) return "step,seg_loss";
  if (!config::is_wan(mode)) return "step,seg_loss,adv_loss,disc_loss";
  return "step,seg_loss,adv_loss,disc_loss,hd_loss";
}

void write_losses_csv(const std::string& path, config::Mode mode,
                      const std::vector<RunRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << losses_csv_header(mode) << '\n';
  const bool adversarial = config::is_adversarial(mode);
  const bool wan = config::is_wan(mode);
  for (const RunRow& r : rows) {
    out << r.step << ',' << format_double(r.seg);
    if (adversarial) out << ',' << format_double(r.adv) << ',' << format_double(r.disc);
    if (wan) out << ',' << format_double(r.hd);
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

void write_eval_csv(const std::string& path, const std::vector<EvalSnapshot>& evals) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "step,source_iou,target_iou\n";
  for (const EvalSnapshot& e : evals) {
    out << e.step << ',';
    if (e.source_iou >= 0.0) out << format_double(e.source_iou);
    out << ',';
    if (e.target_iou >= 0.0) out << format_double(e.target_iou);
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

void write_run_manifest(const std::string& path, const config::AdaptConfig& cfg,
                        const std::string& checkpoint_file,
                        const std::string& checkpoint_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << config::serialize_config(cfg);
  out << "checkpoint_file=" << checkpoint_file << '\n';
  out << "checkpoint_hash=" << checkpoint_hash << '\n';
  if (!out) throw IoError("short write to " + path);
}

RunManifest parse_run_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  RunManifest m;
  std::string config_text, line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("checkpoint_file=", 0) == 0)
      m.checkpoint_file = line.substr(16);
    else if (line.rfind("checkpoint_hash=", 0) == 0)
      m.checkpoint_hash = line.substr(16);
    else
      config_text += line + "\n";
  }
  m.config = config::parse_config(config_text);
  return m;
}

std::string hash_hex(uint64_t hash) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace wan::engine
