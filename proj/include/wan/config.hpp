#pragma once

#include <cstdint>
#include <string>

namespace wan::config {

enum class Mode { SourceOnly, Osa, Lta, OsWan, LtWan, Finetune };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

inline bool is_adversarial(Mode m) {
  return m == Mode::Osa || m == Mode::Lta || m == Mode::OsWan || m == Mode::LtWan;
}
inline bool is_wan(Mode m) { return m == Mode::OsWan || m == Mode::LtWan; }
inline bool is_latent(Mode m) { return m == Mode::Lta || m == Mode::LtWan; }

// effective run configuration; parse_config resolves mode-dependent defaults
// for any field the file leaves unset
struct AdaptConfig {
  Mode mode = Mode::SourceOnly;
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-4;  // 1e-5 for latent modes
  double lr_adversarial = 1e-6;
  double lambda_adv = 0.0;         // 0.1 output-space, 0.01 latent, 0 otherwise
  double alpha_hd = 0.0;           // 0.1 in WAN modes, pinned 0 otherwise
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 1e-6;
  int64_t batch_size = 8;
  int64_t max_steps = 2000;
  uint64_t seed = 1;
  int64_t eval_every = 0;          // 0 disables periodic evaluation
  int64_t base_filters = 32;
  std::string source_manifest;
  std::string target_manifest;

  bool operator==(const AdaptConfig&) const = default;
};

// key=value lines, '#' comments; unknown and duplicate keys are rejected by
// name; parse_config(serialize_config(c)) == c
AdaptConfig parse_config(const std::string& text);
AdaptConfig parse_config_file(const std::string& path);
std::string serialize_config(const AdaptConfig& c);
void validate(const AdaptConfig& c);

}  // namespace wan::config
