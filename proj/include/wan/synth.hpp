#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "wan/common.hpp"
#include "wan/data.hpp"
#include "wan/dataset.hpp"

namespace wan::synth {

enum class Style { Rectangles, Blobs };

// procedural domain description; colors are 8-bit scale means
struct SyntheticDomainSpec {
  Style style = Style::Rectangles;
  std::array<double, 3> background{95.0, 108.0, 88.0};
  std::array<double, 3> structure{205.0, 208.0, 212.0};
  double palette_jitter = 8.0;  // per-channel background and structure tint range
  double density = 2.5;         // expected structures per patch
  int64_t scale_min = 24;
  int64_t scale_max = 64;
  double noise = 5.0;           // per-pixel texture noise
  uint64_t seed = 1;
  int64_t patch_size = 256;

  bool operator==(const SyntheticDomainSpec&) const = default;
};

SyntheticDomainSpec default_source_spec();
SyntheticDomainSpec default_target_spec();

// key=value lines with '#' comments; unknown keys are rejected by name
SyntheticDomainSpec parse_spec(const std::string& text);
SyntheticDomainSpec parse_spec_file(const std::string& path);
std::string serialize_spec(const SyntheticDomainSpec& spec);
void validate_spec(const SyntheticDomainSpec& spec);

struct SplitCounts {
  int64_t train = 0;
  int64_t val = 0;
  int64_t test = 0;
};

// one rendered patch with its true footprint mask (already dilated)
struct RenderedPatch {
  Tensor image;  // 3 x S x S in [0,1]
  Tensor mask;   // 1 x S x S in {0,1}
};

// `force_empty` halves target occupancy so absence labels occur; the rng must
// be a fresh per-patch substream for reproducibility
RenderedPatch render_patch(const SyntheticDomainSpec& spec, Rng& rng, bool force_empty_coin);

// writes <domain>/<split>/patch_NNNNN.{ppm,pgm} plus one manifest per domain
// under out_dir; returns the two manifests with roots set
std::pair<dataset::Manifest, dataset::Manifest> synth_generate(
    const SyntheticDomainSpec& spec_source, const SyntheticDomainSpec& spec_target,
    const SplitCounts& counts, const std::string& out_dir);

}  // namespace wan::synth
