#pragma once

#include "wan/tensor.hpp"

namespace wan::losses {

struct LossWeights {
  double lambda_adv = 0.0;
  double alpha_hd = 0.0;
};

// Pixel-wise BCE between segmentation output and a binary mask, averaged over
// every pixel of the batch.
Tensor seg_loss(const Tensor& seg, const Tensor& mask);

// BCE of source scores against 1 plus BCE of target scores against 0; each
// term is a spatial mean, the two are summed.
Tensor disc_loss(const Tensor& scores_source, const Tensor& scores_target);

// -mean(log scores): the generator is rewarded when target representations
// are scored as source. Non-saturating form.
Tensor adv_loss(const Tensor& scores_target);

// Per-image BCE between detection-head outputs and binary weak labels.
Tensor weak_label_loss(const Tensor& pred, const Tensor& labels);

// seg + alpha_hd * hd
Tensor generator_loss(const Tensor& seg_term, const Tensor& hd_term, const LossWeights& w);

// seg + alpha_hd * hd + lambda_adv * adv
Tensor combined_loss(const Tensor& seg_term, const Tensor& hd_term, const Tensor& adv_term,
                     const LossWeights& w);

}  // namespace wan::losses
