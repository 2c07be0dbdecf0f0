#pragma once

#include <cstddef>
#include <vector>

#include "voxalign/tensor.hpp"

namespace voxalign {

// Plain cosine similarity for diagnostics; the training graph realizes the
// same quantity as a dot product of L2-normalized rows.
double cosine_similarity(const std::vector<double>& u,
                         const std::vector<double>& v);

// tau = clamp(exp(raw), 1e-3, 1e3); exponential parametrization keeps the
// temperature positive without projection steps.
struct Temperature {
    Tensor raw;  // scalar leaf

    static Temperature init(double tau0, bool trainable);
    Tensor tau() const;
};

// lambda_i = softplus(raw_i) > 0.
struct LossWeights {
    Tensor raw1, raw2;  // scalar leaves

    static LossWeights init(double lambda1_0, double lambda2_0, bool trainable);
    Tensor lambda1() const;
    Tensor lambda2() const;
};

struct ContrastiveResult {
    Tensor total;      // scalar, (1/2N) * (sum img->text + sum text->img)
    Tensor img_to_text;  // scalar, mean over the batch of per-pair terms
    Tensor text_to_img;
};

// U, V: N x d rows; both directions share one similarity matrix so the
// result is bit-exactly symmetric under swapping U and V. Rows are
// re-normalized internally, making the logits cosine similarities / tau.
ContrastiveResult contrastive_loss(const Tensor& U, const Tensor& V,
                                   const Tensor& tau);

// -mean over rows of log softmax picked at the true class.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

// lambda1 * contrastive + lambda2 * ce; rejects non-finite loss inputs.
Tensor joint_loss(const Tensor& contrastive, const Tensor& ce,
                  const LossWeights& weights);

}  // namespace voxalign
