#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "wan/ops.hpp"
#include "wan/tensor.hpp"

namespace wan::models {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct Conv2dLayer {
  Tensor weight;  // [out_ch, in_ch, k, k]
  Tensor bias;    // [out_ch]

  // He-uniform: U(-limit, limit) with limit = sqrt(6 / fan_in), zero bias.
  static Conv2dLayer he_init(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng);
};

struct DenseLayer {
  Tensor weight;  // [in_f, out_f]
  Tensor bias;    // [out_f]

  // Xavier-uniform: U(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
  static DenseLayer xavier_init(int64_t in_f, int64_t out_f, Rng& rng);
};

struct GeneratorOutput {
  Tensor latent;        // bottleneck activation, [N, 16b, H/16, W/16]
  Tensor seg;           // [N, 1, H, W] in (0,1)
  Tensor last_decoder;  // final decoder feature map, [N, b, H, W]
};

// U-Net: 4 encoder levels (two 3x3 same convs + ReLU, 2x2 max-pool), a
// bottleneck, 4 decoder levels (nearest x2 + 3x3 conv, skip concat, two 3x3
// convs), and a 1x1 sigmoid head. Channels double per level from base_filters.
class Generator {
 public:
  Generator(int64_t base_filters, Rng& rng);

  GeneratorOutput forward(const Tensor& images) const;
  // Encoder + bottleneck only; same latent values as forward().
  Tensor forward_latent(const Tensor& images) const;

  int64_t base_filters() const { return base_; }
  int64_t latent_channels() const { return base_ * 16; }
  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters() const;
  int64_t parameter_count() const;

 private:
  struct Block {
    Conv2dLayer conv1, conv2;
  };
  struct UpBlock {
    Conv2dLayer up, conv1, conv2;
  };

  Tensor encode(const Tensor& images, std::array<Tensor, 4>* skips) const;

  int64_t base_;
  std::array<Block, 4> enc_;
  Block bottleneck_;
  std::array<UpBlock, 4> dec_;  // dec_[0] consumes the bottleneck
  Conv2dLayer final_;
};

enum class DiscVariant { OutputSpace, LatentSpace };

// Fully convolutional domain classifier, 5 conv layers, LeakyReLU(0.2)
// between, sigmoid last, no batch norm, no pooling. The output-space variant
// strides down to H/32 internally and nearest-upsamples back to its input
// size; the latent variant is stride 1 throughout, so its output already
// matches its input size.
class Discriminator {
 public:
  Discriminator(DiscVariant variant, int64_t in_channels, Rng& rng);

  Tensor forward(const Tensor& rep) const;

  DiscVariant variant() const { return variant_; }
  int64_t in_channels() const { return in_ch_; }
  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters() const;

 private:
  DiscVariant variant_;
  int64_t in_ch_;
  std::array<Conv2dLayer, 5> layers_;
};

// Weak-label head: latent upscaled x2 and decoder map downscaled x2 (then
// average-pooled to the same grid), concatenated, two convs, GAP, three
// fully-connected layers, sigmoid. One probability per image.
class DetectionHead {
 public:
  DetectionHead(int64_t latent_channels, int64_t decoder_channels, Rng& rng);

  Tensor forward(const Tensor& latent, const Tensor& last_decoder) const;

  std::vector<Tensor> parameters() const;
  NamedTensors named_parameters() const;

 private:
  int64_t latent_ch_, decoder_ch_;
  Conv2dLayer conv1_, conv2_;
  DenseLayer fc1_, fc2_, fc3_;
};

}  // namespace wan::models
