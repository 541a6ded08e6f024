// Command-line surface: synthesize data, train, adapt, evaluate, report.
// Exit codes: 0 all outputs written, 1 file IO failure, 2 contract violation
// (bad config, bad flags, mismatched shapes).
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wan/checkpoint.hpp"
#include "wan/common.hpp"
#include "wan/config.hpp"
#include "wan/data.hpp"
#include "wan/dataset.hpp"
#include "wan/engine.hpp"
#include "wan/metrics.hpp"
#include "wan/models.hpp"
#include "wan/pnm.hpp"
#include "wan/synth.hpp"

namespace fs = std::filesystem;
using namespace wan;

namespace {

synth::SplitCounts parse_counts(const std::string& text) {
  long long train = 0, val = 0, test = 0;
  char extra = 0;
  const int got = std::sscanf(text.c_str(), "%lld,%lld,%lld%c", &train, &val, &test, &extra);
  check(got == 3, "--counts must be train,val,test integers, got `" + text + "`");
  check(train >= 0 && val >= 0 && test >= 0, "--counts entries must be non-negative");
  check(train + val + test > 0, "--counts must request at least one patch");
  return {train, val, test};
}

// report tables speak in method names; the supervised baseline is the only
// mode whose method name differs from its mode name
std::string method_for(config::Mode mode) {
  return mode == config::Mode::SourceOnly ? "baseline" : config::mode_name(mode);
}

dataset::Manifest read_data_manifest(const std::string& path, const char* which) {
  check(!path.empty(), std::string(which) + " manifest path is empty in the config");
  return dataset::read_manifest(path);
}

models::Generator build_generator(const config::AdaptConfig& cfg) {
  Rng rng(Rng::substream(cfg.seed, "generator_init"));
  return models::Generator(cfg.base_filters, rng);
}

void write_run_outputs(const std::string& out_dir, const config::AdaptConfig& cfg,
                       const models::NamedTensors& records, const engine::RunResult& run) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  const std::string ckpt = (dir / "model.ckpt").string();
  models::save_checkpoint(ckpt, records);
  engine::write_losses_csv((dir / "losses.csv").string(), cfg.mode, run.rows);
  engine::write_eval_csv((dir / "eval.csv").string(), run.evals);
  engine::write_run_manifest((dir / "manifest.txt").string(), cfg, "model.ckpt",
                             engine::hash_hex(models::file_content_hash(ckpt)));
}

int cmd_synth(const std::string& out_dir, const std::string& source_spec_file,
              const std::string& target_spec_file, const std::string& counts_text,
              std::optional<uint64_t> seed) {
  synth::SyntheticDomainSpec src = source_spec_file.empty()
                                       ? synth::default_source_spec()
                                       : synth::parse_spec_file(source_spec_file);
  synth::SyntheticDomainSpec tgt = target_spec_file.empty()
                                       ? synth::default_target_spec()
                                       : synth::parse_spec_file(target_spec_file);
  if (seed) {
    src.seed = *seed;
    tgt.seed = *seed + 1;  // adjacent seeds, disjoint substreams per patch tag
  }
  synth::validate_spec(src);
  synth::validate_spec(tgt);
  const synth::SplitCounts counts = parse_counts(counts_text);

  auto [sm, tm] = synth::synth_generate(src, tgt, counts, out_dir);
  std::cout << "synthetic dataset under " << out_dir << ": " << counts.train << "/" << counts.val
            << "/" << counts.test << " train/val/test patches per domain\n"
            << "  source manifest: " << (fs::path(out_dir) / "source_manifest.csv").string()
            << "\n  target manifest: " << (fs::path(out_dir) / "target_manifest.csv").string()
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_file, const std::string& init_checkpoint,
              const std::string& out_dir) {
  config::AdaptConfig cfg = config::parse_config_file(config_file);
  check(cfg.mode == config::Mode::SourceOnly,
        std::string("train runs mode source_only; use adapt for mode ") +
            config::mode_name(cfg.mode));
  dataset::Manifest source = read_data_manifest(cfg.source_manifest, "source");
  std::optional<dataset::Manifest> target;
  if (!cfg.target_manifest.empty())
    target = dataset::read_manifest(cfg.target_manifest);

  models::Generator gen = build_generator(cfg);
  if (!init_checkpoint.empty()) {
    models::NamedTensors records = models::load_checkpoint(init_checkpoint);
    const int64_t ckpt_base = models::infer_base_filters(records);
    check(ckpt_base == cfg.base_filters,
          "checkpoint was trained with base_filters=" + std::to_string(ckpt_base) +
              ", config says " + std::to_string(cfg.base_filters));
    models::load_into(records, gen.named_parameters(), "generator/");
  }
  engine::RunResult run =
      engine::train_source(cfg, gen, source, target ? &*target : nullptr);
  write_run_outputs(out_dir, cfg, gen.named_parameters(), run);
  std::cout << "trained " << cfg.max_steps << " steps"
            << (run.rows.empty() ? ""
                                 : ", final seg loss " + std::to_string(run.rows.back().seg))
            << ", wrote " << (fs::path(out_dir) / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_adapt(const std::string& config_file, const std::string& init_checkpoint,
              const std::string& out_dir) {
  config::AdaptConfig cfg = config::parse_config_file(config_file);
  check(cfg.mode != config::Mode::SourceOnly,
        "adapt needs an adaptation or finetune mode; use train for source_only");

  models::NamedTensors records = models::load_checkpoint(init_checkpoint);
  const int64_t ckpt_base = models::infer_base_filters(records);
  check(ckpt_base == cfg.base_filters,
        "checkpoint was trained with base_filters=" + std::to_string(ckpt_base) +
            ", config says " + std::to_string(cfg.base_filters));
  models::Generator gen = build_generator(cfg);
  models::load_into(records, gen.named_parameters(), "generator/");

  dataset::Manifest source = read_data_manifest(cfg.source_manifest, "source");
  dataset::Manifest target = read_data_manifest(cfg.target_manifest, "target");

  engine::RunResult run;
  models::NamedTensors out_records = gen.named_parameters();
  if (cfg.mode == config::Mode::Finetune) {
    run = engine::finetune(cfg, gen, target, &source);
  } else {
    Rng disc_rng(Rng::substream(cfg.seed, "discriminator_init"));
    const bool latent = config::is_latent(cfg.mode);
    models::Discriminator disc(
        latent ? models::DiscVariant::LatentSpace : models::DiscVariant::OutputSpace,
        latent ? gen.latent_channels() : 1, disc_rng);
    std::optional<models::DetectionHead> head;
    if (config::is_wan(cfg.mode)) {
      Rng head_rng(Rng::substream(cfg.seed, "head_init"));
      head.emplace(gen.latent_channels(), cfg.base_filters, head_rng);
    }
    run = engine::adapt(cfg, gen, disc, head ? &*head : nullptr, source, target);
    for (const auto& [name, t] : disc.named_parameters()) out_records.emplace_back(name, t);
    if (head)
      for (const auto& [name, t] : head->named_parameters()) out_records.emplace_back(name, t);
  }
  write_run_outputs(out_dir, cfg, out_records, run);
  std::cout << "adapted (" << config::mode_name(cfg.mode) << ") for " << cfg.max_steps
            << " steps, wrote " << (fs::path(out_dir) / "model.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest_file,
             const std::string& split, const std::string& out_csv, const std::string& dump_dir,
             std::string method, std::string dataset_label) {
  models::NamedTensors records = models::load_checkpoint(checkpoint);
  Rng rng(0);  // every weight is overwritten by the checkpoint
  models::Generator gen(models::infer_base_filters(records), rng);
  models::load_into(records, gen.named_parameters(), "generator/");

  if (method.empty()) {
    const fs::path sibling = fs::path(checkpoint).parent_path() / "manifest.txt";
    check(fs::exists(sibling),
          "no run manifest next to the checkpoint; pass --method explicitly");
    method = method_for(engine::parse_run_manifest(sibling.string()).config.mode);
  }
  if (dataset_label.empty()) {
    dataset_label = fs::path(manifest_file).stem().string();
    const std::string suffix = "_manifest";
    if (dataset_label.size() > suffix.size() &&
        dataset_label.rfind(suffix) == dataset_label.size() - suffix.size())
      dataset_label.resize(dataset_label.size() - suffix.size());
  }

  dataset::Manifest m = dataset::read_manifest(manifest_file);
  metrics::EvalReport report = metrics::evaluate_dataset(gen, m, split, 8);
  report.dataset = dataset_label;
  report.split = split;
  report.method = method;
  report.checkpoint_hash = engine::hash_hex(models::file_content_hash(checkpoint));

  // predictions are rendered before anything is written so a failure leaves
  // no partial mask tree behind
  std::vector<std::pair<std::string, pnm::Image>> dumps;
  if (!dump_dir.empty()) {
    NoGradGuard ng;
    std::vector<dataset::ManifestEntry> entries = dataset::split_entries(m, split);
    for (size_t start = 0; start < entries.size(); start += 8) {
      std::vector<Tensor> images;
      for (size_t i = start; i < std::min(start + 8, entries.size()); ++i)
        images.push_back(dataset::load_image(m, entries[i]));
      Tensor seg = gen.forward(dataset::stack(images)).seg;
      const int64_t hw = seg.shape()[2] * seg.shape()[3];
      for (size_t i = 0; i < images.size(); ++i) {
        std::vector<double> hard(static_cast<size_t>(hw));
        for (int64_t p = 0; p < hw; ++p)
          hard[static_cast<size_t>(p)] =
              seg.values()[static_cast<size_t>(i) * hw + static_cast<size_t>(p)] >= 0.5 ? 1.0
                                                                                        : 0.0;
        std::string name = entries[start + i].path;
        std::replace(name.begin(), name.end(), '/', '_');
        name = fs::path(name).stem().string() + ".pgm";
        dumps.emplace_back(
            name, data::mask_to_pnm(Tensor::from_data({1, seg.shape()[2], seg.shape()[3]},
                                                      std::move(hard))));
      }
    }
  }

  metrics::append_eval_report(out_csv, report);
  if (!dump_dir.empty()) {
    fs::create_directories(dump_dir);
    for (const auto& [name, img] : dumps) pnm::write_pnm((fs::path(dump_dir) / name).string(), img);
  }
  std::printf("dataset=%s split=%s method=%s iou=%.4f f1=%.4f appended to %s\n",
              report.dataset.c_str(), report.split.c_str(), report.method.c_str(),
              report.iou_value, report.f1_value, out_csv.c_str());
  if (!dump_dir.empty())
    std::cout << "dumped " << dumps.size() << " predicted masks to " << dump_dir << "\n";
  return 0;
}

int method_rank(const std::string& m) {
  const char* order[] = {"baseline", "osa", "lta", "os_wan", "lt_wan", "finetune"};
  for (int i = 0; i < 6; ++i)
    if (m == order[i]) return i;
  return 6;
}

int cmd_report(const std::string& runs_dir, const std::string& out_md) {
  check(fs::exists(runs_dir), "no such directory: " + runs_dir);
  std::vector<std::string> csvs;
  for (const auto& e : fs::recursive_directory_iterator(runs_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") csvs.push_back(e.path().string());
  std::sort(csvs.begin(), csvs.end());  // directory order is not deterministic

  std::vector<metrics::EvalReport> rows;
  for (const std::string& path : csvs) {
    try {
      std::vector<metrics::EvalReport> some = metrics::read_eval_reports(path);
      rows.insert(rows.end(), some.begin(), some.end());
    } catch (const ContractViolation&) {
      // losses.csv and eval.csv live in the same tree; skip anything that is
      // not an evaluation report
    }
  }
  check(!rows.empty(), "no evaluation reports under " + runs_dir);

  std::map<std::pair<std::string, std::string>, std::vector<metrics::EvalReport>> groups;
  for (const metrics::EvalReport& r : rows) groups[{r.dataset, r.split}].push_back(r);

  char buf[256];
  std::string md = "# Evaluation summary\n";
  for (auto& [key, group] : groups) {
    std::stable_sort(group.begin(), group.end(),
                     [](const metrics::EvalReport& a, const metrics::EvalReport& b) {
                       return method_rank(a.method) < method_rank(b.method) ||
                              (method_rank(a.method) == method_rank(b.method) &&
                               a.method < b.method);
                     });
    md += "\n## " + key.first + " / " + key.second + "\n\n";
    md += "| method | iou | f1 | tp | fp | fn | tn |\n|---|---|---|---|---|---|---|\n";
    for (const metrics::EvalReport& r : group) {
      std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %llu | %llu | %llu | %llu |\n",
                    r.method.c_str(), r.iou_value, r.f1_value,
                    static_cast<unsigned long long>(r.counts.tp),
                    static_cast<unsigned long long>(r.counts.fp),
                    static_cast<unsigned long long>(r.counts.fn),
                    static_cast<unsigned long long>(r.counts.tn));
      md += buf;
    }
  }

  // retention: groups holding a baseline row show how much of its IoU each
  // adapted model kept on the same data
  std::string retention;
  for (auto& [key, group] : groups) {
    const metrics::EvalReport* baseline = nullptr;
    std::map<std::string, const metrics::EvalReport*> last_by_method;
    for (const metrics::EvalReport& r : group) last_by_method[r.method] = &r;
    if (auto it = last_by_method.find("baseline"); it != last_by_method.end())
      baseline = it->second;
    if (baseline == nullptr || last_by_method.size() < 2) continue;
    std::vector<const metrics::EvalReport*> adapted;
    for (const auto& [name, r] : last_by_method)
      if (name != "baseline") adapted.push_back(r);
    std::sort(adapted.begin(), adapted.end(),
              [](const metrics::EvalReport* a, const metrics::EvalReport* b) {
                return method_rank(a->method) < method_rank(b->method) ||
                       (method_rank(a->method) == method_rank(b->method) &&
                        a->method < b->method);
              });
    retention += "\n## Retention on " + key.first + " / " + key.second + "\n\n";
    retention += "| method | iou before | iou after | relative drop |\n|---|---|---|---|\n";
    for (const metrics::EvalReport* r : adapted) {
      const double before = baseline->iou_value;
      const double drop = before == 0.0 ? 0.0 : (before - r->iou_value) / before;
      std::snprintf(buf, sizeof buf, "| %s | %.4f | %.4f | %.4f |\n", r->method.c_str(), before,
                    r->iou_value, drop);
      retention += buf;
    }
  }
  md += retention;

  std::ofstream out(out_md);
  if (!out) throw IoError("cannot write " + out_md);
  out << md;
  if (!out) throw IoError("short write to " + out_md);
  std::cout << "wrote " << out_md << " (" << rows.size() << " evaluation rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised adversarial domain adaptation for built-up segmentation"};
  app.require_subcommand(1);

  std::string out_dir, source_spec, target_spec, counts = "100,20,50";
  uint64_t seed_value = 0;
  CLI::App* synth_cmd = app.add_subcommand("synth", "render a two-domain synthetic dataset");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--source-spec", source_spec, "source domain spec file");
  synth_cmd->add_option("--target-spec", target_spec, "target domain spec file");
  synth_cmd->add_option("--counts", counts, "train,val,test patch counts (default 100,20,50)");
  CLI::Option* seed_opt = synth_cmd->add_option("--seed", seed_value, "override both domain seeds");

  std::string train_config, train_init, train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "supervised source training");
  train_cmd->add_option("--config", train_config, "run config file")->required();
  train_cmd->add_option("--init", train_init, "checkpoint to continue from (default: fresh init)");
  train_cmd->add_option("--out", train_out, "output directory")->required();

  std::string adapt_config, adapt_init, adapt_out;
  CLI::App* adapt_cmd = app.add_subcommand("adapt", "adapt a trained model to a target domain");
  adapt_cmd->add_option("--config", adapt_config, "run config file")->required();
  adapt_cmd->add_option("--init", adapt_init, "initial checkpoint")->required();
  adapt_cmd->add_option("--out", adapt_out, "output directory")->required();

  std::string eval_ckpt, eval_manifest, eval_split = "test", eval_out = "report.csv";
  std::string eval_dump, eval_method, eval_dataset;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "dataset manifest CSV")->required();
  eval_cmd->add_option("--split", eval_split, "split to evaluate (default test)");
  eval_cmd->add_option("--out", eval_out, "report CSV to append to (default report.csv)");
  eval_cmd->add_option("--dump-masks", eval_dump, "directory for predicted masks as PGM");
  eval_cmd->add_option("--method", eval_method,
                       "method label (default: read from the run manifest next to the checkpoint)");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset label (default: manifest stem)");

  std::string report_runs, report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "summarize evaluation reports as markdown");
  report_cmd->add_option("--runs", report_runs, "directory tree holding report CSVs")->required();
  report_cmd->add_option("--out", report_out, "markdown file to write")->required();

  try {
    app.parse(argc, argv);
    if (*synth_cmd)
      return cmd_synth(out_dir, source_spec, target_spec, counts,
                       seed_opt->count() ? std::optional<uint64_t>(seed_value) : std::nullopt);
    if (*train_cmd) return cmd_train(train_config, train_init, train_out);
    if (*adapt_cmd) return cmd_adapt(adapt_config, adapt_init, adapt_out);
    if (*eval_cmd)
      return cmd_eval(eval_ckpt, eval_manifest, eval_split, eval_out, eval_dump, eval_method,
                      eval_dataset);
    if (*report_cmd) return cmd_report(report_runs, report_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // --help exits clean, usage errors are contract errors
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
