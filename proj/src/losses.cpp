#include "wan/losses.hpp"

#include "wan/ops.hpp"

namespace wan::losses {

namespace o = wan::ops;

namespace {

void check_binary(const Tensor& t, const char* what) {
  for (double v : t.values())
    check(v == 0.0 || v == 1.0, std::string(what) + ": values must be binary");
}

}  // namespace

Tensor seg_loss(const Tensor& seg, const Tensor& mask) {
  check(seg.defined() && mask.defined(), "seg_loss: undefined argument");
  check(seg.shape() == mask.shape(), "seg_loss: shape mismatch");
  check_binary(mask, "seg_loss mask");
  return o::bce(seg, mask);
}

Tensor disc_loss(const Tensor& scores_source, const Tensor& scores_target) {
  check(scores_source.defined() && scores_target.defined(), "disc_loss: undefined argument");
  Tensor ones = Tensor::full(scores_source.shape(), 1.0);
  Tensor zeros = Tensor::zeros(scores_target.shape());
  return o::add(o::bce(scores_source, ones), o::bce(scores_target, zeros));
}

Tensor adv_loss(const Tensor& scores_target) {
  check(scores_target.defined(), "adv_loss: undefined argument");
  Tensor ones = Tensor::full(scores_target.shape(), 1.0);
  return o::bce(scores_target, ones);
}

Tensor weak_label_loss(const Tensor& pred, const Tensor& labels) {
  check(pred.defined() && labels.defined(), "weak_label_loss: undefined argument");
  check(pred.shape() == labels.shape(), "weak_label_loss: shape mismatch");
  check_binary(labels, "weak_label_loss labels");
  return o::bce(pred, labels);
}

Tensor generator_loss(const Tensor& seg_term, const Tensor& hd_term, const LossWeights& w) {
  check(seg_term.defined() && seg_term.numel() == 1, "generator_loss: seg term must be scalar");
  check(hd_term.defined() && hd_term.numel() == 1, "generator_loss: hd term must be scalar");
  return o::add(seg_term, o::scale(hd_term, w.alpha_hd));
}

Tensor combined_loss(const Tensor& seg_term, const Tensor& hd_term, const Tensor& adv_term,
                     const LossWeights& w) {
  check(adv_term.defined() && adv_term.numel() == 1, "combined_loss: adv term must be scalar");
  return o::add(generator_loss(seg_term, hd_term, w), o::scale(adv_term, w.lambda_adv));
}

}  // namespace wan::losses
