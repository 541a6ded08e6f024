#include "wan/models.hpp"

#include <cmath>

namespace wan::models {

namespace o = wan::ops;

Conv2dLayer Conv2dLayer::he_init(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng) {
  Conv2dLayer layer;
  layer.weight = Tensor::zeros({out_ch, in_ch, k, k}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_ch * k * k));
  for (double& v : layer.weight.values()) v = rng.uniform(-limit, limit);
  layer.bias = Tensor::zeros({out_ch}, true);
  return layer;
}

DenseLayer DenseLayer::xavier_init(int64_t in_f, int64_t out_f, Rng& rng) {
  DenseLayer layer;
  layer.weight = Tensor::zeros({in_f, out_f}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in_f + out_f));
  for (double& v : layer.weight.values()) v = rng.uniform(-limit, limit);
  layer.bias = Tensor::zeros({out_f}, true);
  return layer;
}

namespace {

Tensor conv_same(const Tensor& x, const Conv2dLayer& l, int64_t stride = 1) {
  return o::conv2d(x, l.weight, l.bias, stride, o::Padding::Same);
}

void push_layer(NamedTensors& out, const std::string& prefix, const Conv2dLayer& l) {
  out.emplace_back(prefix + "/weight", l.weight);
  out.emplace_back(prefix + "/bias", l.bias);
}

void push_layer(NamedTensors& out, const std::string& prefix, const DenseLayer& l) {
  out.emplace_back(prefix + "/weight", l.weight);
  out.emplace_back(prefix + "/bias", l.bias);
}

}  // namespace

Generator::Generator(int64_t base_filters, Rng& rng) : base_(base_filters) {
  check(base_ >= 1, "Generator: base_filters must be >= 1");
  int64_t in_ch = 3;
  int64_t ch = base_;
  for (auto& block : enc_) {
    block.conv1 = Conv2dLayer::he_init(in_ch, ch, 3, rng);
    block.conv2 = Conv2dLayer::he_init(ch, ch, 3, rng);
    in_ch = ch;
    ch *= 2;
  }
  bottleneck_.conv1 = Conv2dLayer::he_init(in_ch, ch, 3, rng);
  bottleneck_.conv2 = Conv2dLayer::he_init(ch, ch, 3, rng);
  // Decoder halves channels per level: 16b -> 8b -> 4b -> 2b -> b.
  for (auto& block : dec_) {
    block.up = Conv2dLayer::he_init(ch, ch / 2, 3, rng);
    block.conv1 = Conv2dLayer::he_init(ch, ch / 2, 3, rng);  // skip concat doubles input
    block.conv2 = Conv2dLayer::he_init(ch / 2, ch / 2, 3, rng);
    ch /= 2;
  }
  final_ = Conv2dLayer::he_init(base_, 1, 1, rng);
}

Tensor Generator::encode(const Tensor& images, std::array<Tensor, 4>* skips) const {
  check(images.defined() && images.rank() == 4, "Generator: input must be [N,3,H,W]");
  check(images.dim(1) == 3,
        "Generator: expected 3 input channels, got " + std::to_string(images.dim(1)));
  check(images.dim(2) % 16 == 0 && images.dim(3) % 16 == 0,
        "Generator: spatial extents must be multiples of 16");
  Tensor x = images;
  for (size_t i = 0; i < enc_.size(); ++i) {
    x = o::relu(conv_same(x, enc_[i].conv1));
    x = o::relu(conv_same(x, enc_[i].conv2));
    if (skips) (*skips)[i] = x;
    x = o::max_pool2d(x, 2);
  }
  x = o::relu(conv_same(x, bottleneck_.conv1));
  x = o::relu(conv_same(x, bottleneck_.conv2));
  return x;
}

GeneratorOutput Generator::forward(const Tensor& images) const {
  std::array<Tensor, 4> skips;
  GeneratorOutput out;
  out.latent = encode(images, &skips);

  Tensor x = out.latent;
  for (size_t i = 0; i < dec_.size(); ++i) {
    const Tensor& skip = skips[dec_.size() - 1 - i];
    x = o::relu(conv_same(o::upsample_nearest(x, 2), dec_[i].up));
    x = o::concat_channels(skip, x);
    x = o::relu(conv_same(x, dec_[i].conv1));
    x = o::relu(conv_same(x, dec_[i].conv2));
  }
  out.last_decoder = x;
  out.seg = o::sigmoid(conv_same(x, final_));
  return out;
}

Tensor Generator::forward_latent(const Tensor& images) const { return encode(images, nullptr); }

std::vector<Tensor> Generator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

NamedTensors Generator::named_parameters() const {
  NamedTensors out;
  for (size_t i = 0; i < enc_.size(); ++i) {
    const std::string p = "generator/enc" + std::to_string(i + 1);
    push_layer(out, p + "/conv1", enc_[i].conv1);
    push_layer(out, p + "/conv2", enc_[i].conv2);
  }
  push_layer(out, "generator/bottleneck/conv1", bottleneck_.conv1);
  push_layer(out, "generator/bottleneck/conv2", bottleneck_.conv2);
  for (size_t i = 0; i < dec_.size(); ++i) {
    const std::string p = "generator/dec" + std::to_string(dec_.size() - i);
    push_layer(out, p + "/up", dec_[i].up);
    push_layer(out, p + "/conv1", dec_[i].conv1);
    push_layer(out, p + "/conv2", dec_[i].conv2);
  }
  push_layer(out, "generator/final", final_);
  return out;
}

int64_t Generator::parameter_count() const {
  int64_t n = 0;
  for (const Tensor& t : parameters()) n += t.numel();
  return n;
}

Discriminator::Discriminator(DiscVariant variant, int64_t in_channels, Rng& rng)
    : variant_(variant), in_ch_(in_channels) {
  check(in_ch_ >= 1, "Discriminator: in_channels must be >= 1");
  const bool os = variant_ == DiscVariant::OutputSpace;
  const std::array<int64_t, 5> depths =
      os ? std::array<int64_t, 5>{64, 128, 256, 512, 1}
         : std::array<int64_t, 5>{256, 256, 128, 64, 1};
  const int64_t k = os ? 4 : 3;
  int64_t ch = in_ch_;
  for (size_t i = 0; i < layers_.size(); ++i) {
    layers_[i] = Conv2dLayer::he_init(ch, depths[i], k, rng);
    ch = depths[i];
  }
}

Tensor Discriminator::forward(const Tensor& rep) const {
  check(rep.defined() && rep.rank() == 4, "Discriminator: input must be rank 4");
  check(rep.dim(1) == in_ch_, "Discriminator: expected " + std::to_string(in_ch_) +
                                  " channels, got " + std::to_string(rep.dim(1)));
  const bool os = variant_ == DiscVariant::OutputSpace;
  const int64_t stride = os ? 2 : 1;
  if (os)
    check(rep.dim(2) % 32 == 0 && rep.dim(3) % 32 == 0,
          "Discriminator: output-space input extents must be multiples of 32");
  Tensor x = rep;
  for (size_t i = 0; i < layers_.size(); ++i) {
    x = conv_same(x, layers_[i], stride);
    if (i + 1 < layers_.size()) x = o::leaky_relu(x, 0.2);
  }
  x = o::sigmoid(x);
  if (os) x = o::upsample_nearest(x, 32);
  return x;
}

std::vector<Tensor> Discriminator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

NamedTensors Discriminator::named_parameters() const {
  NamedTensors out;
  for (size_t i = 0; i < layers_.size(); ++i)
    push_layer(out, "discriminator/layer" + std::to_string(i + 1), layers_[i]);
  return out;
}

DetectionHead::DetectionHead(int64_t latent_channels, int64_t decoder_channels, Rng& rng)
    : latent_ch_(latent_channels), decoder_ch_(decoder_channels) {
  check(latent_ch_ >= 1 && decoder_ch_ >= 1, "DetectionHead: channel counts must be >= 1");
  conv1_ = Conv2dLayer::he_init(latent_ch_ + decoder_ch_, 64, 3, rng);
  conv2_ = Conv2dLayer::he_init(64, 32, 3, rng);
  fc1_ = DenseLayer::xavier_init(32, 256, rng);
  fc2_ = DenseLayer::xavier_init(256, 64, rng);
  fc3_ = DenseLayer::xavier_init(64, 1, rng);
}

Tensor DetectionHead::forward(const Tensor& latent, const Tensor& last_decoder) const {
  check(latent.defined() && last_decoder.defined() && latent.rank() == 4 &&
            last_decoder.rank() == 4,
        "DetectionHead: inputs must be rank 4");
  check(latent.dim(0) == last_decoder.dim(0), "DetectionHead: batch mismatch between branches");
  check(latent.dim(1) == latent_ch_ && last_decoder.dim(1) == decoder_ch_,
        "DetectionHead: channel mismatch");
  check(last_decoder.dim(2) == latent.dim(2) * 16 && last_decoder.dim(3) == latent.dim(3) * 16,
        "DetectionHead: branches do not come from one generator pass");

  Tensor up = o::resize_bilinear(latent, 2, 1);
  Tensor down = o::avg_pool2d(o::resize_bilinear(last_decoder, 1, 2), 4);
  Tensor x = o::concat_channels(up, down);
  x = o::relu(conv_same(x, conv1_));
  x = o::relu(conv_same(x, conv2_));
  x = o::global_avg_pool(x);
  x = o::relu(o::dense(x, fc1_.weight, fc1_.bias));
  x = o::relu(o::dense(x, fc2_.weight, fc2_.bias));
  return o::sigmoid(o::dense(x, fc3_.weight, fc3_.bias));
}

std::vector<Tensor> DetectionHead::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

NamedTensors DetectionHead::named_parameters() const {
  NamedTensors out;
  push_layer(out, "detection_head/conv1", conv1_);
  push_layer(out, "detection_head/conv2", conv2_);
  push_layer(out, "detection_head/fc1", fc1_);
  push_layer(out, "detection_head/fc2", fc2_);
  push_layer(out, "detection_head/fc3", fc3_);
  return out;
}

}  // namespace wan::models
