#include "voxalign/alignment.hpp"

#include <cmath>

#include "voxalign/common.hpp"
#include "voxalign/ops.hpp"

namespace voxalign {

double cosine_similarity(const std::vector<double>& u,
                         const std::vector<double>& v) {
    if (u.size() != v.size()) {
        throw ShapeError("cosine_similarity: length mismatch " +
                         std::to_string(u.size()) + " vs " +
                         std::to_string(v.size()));
    }
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) {
        throw NumericError("cosine_similarity: zero vector");
    }
    return uv / (std::sqrt(uu) * std::sqrt(vv));
}

Temperature Temperature::init(double tau0, bool trainable) {
    if (!(tau0 > 0.0)) throw ConfigError("temperature must be positive");
    Temperature t;
    t.raw = Tensor::scalar(std::log(tau0), trainable);
    return t;
}

Tensor Temperature::tau() const {
    return ops::clamp(ops::exp_op(raw), 1e-3, 1e3);
}

namespace {

// softplus^{-1}(y) = log(e^y - 1)
double inverse_softplus(double y) {
    if (!(y > 0.0)) throw ConfigError("loss weights must be positive");
    return std::log(std::expm1(y));
}

}  // namespace

LossWeights LossWeights::init(double lambda1_0, double lambda2_0,
                              bool trainable) {
    LossWeights w;
    w.raw1 = Tensor::scalar(inverse_softplus(lambda1_0), trainable);
    w.raw2 = Tensor::scalar(inverse_softplus(lambda2_0), trainable);
    return w;
}

Tensor LossWeights::lambda1() const { return ops::softplus(raw1); }
Tensor LossWeights::lambda2() const { return ops::softplus(raw2); }

ContrastiveResult contrastive_loss(const Tensor& U, const Tensor& V,
                                   const Tensor& tau) {
    if (U.rank() != 2 || V.rank() != 2 || U.shape() != V.shape()) {
        throw ShapeError("contrastive_loss: need matching N x d batches, got " +
                         shape_str(U.shape()) + " and " + shape_str(V.shape()));
    }
    const std::size_t n = U.shape()[0];
    if (n == 0) throw ShapeError("contrastive_loss: empty batch");

    Tensor un = ops::l2_normalize_rows(U);
    Tensor vn = ops::l2_normalize_rows(V);
    Tensor sim = ops::div_by_scalar(ops::matmul(un, ops::transpose(vn)), tau);

    // Row i of sim scores image i against every text; row i of sim^T scores
    // text i against every image. The diagonal holds the matched pairs.
    Tensor i2t_sum = ops::sum_all(
        ops::take_diag(ops::log_softmax_rows(sim)));
    Tensor t2i_sum = ops::sum_all(
        ops::take_diag(ops::log_softmax_rows(ops::transpose(sim))));

    const double inv_n = 1.0 / static_cast<double>(n);
    ContrastiveResult r;
    r.img_to_text = ops::scale(i2t_sum, -inv_n);
    r.text_to_img = ops::scale(t2i_sum, -inv_n);
    r.total = ops::scale(ops::add(i2t_sum, t2i_sum), -0.5 * inv_n);
    return r;
}

Tensor cross_entropy(const Tensor& logits,
                     const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: logits must be N x C, got " +
                         shape_str(logits.shape()));
    }
    if (labels.size() != logits.shape()[0]) {
        throw ShapeError("cross_entropy: one label per row required");
    }
    for (std::size_t c : labels) {
        if (c >= logits.shape()[1]) {
            throw ShapeError("cross_entropy: label " + std::to_string(c) +
                             " out of range for " +
                             std::to_string(logits.shape()[1]) + " classes");
        }
    }
    const double inv_n = 1.0 / static_cast<double>(labels.size());
    return ops::scale(
        ops::sum_all(ops::pick_cols(ops::log_softmax_rows(logits), labels)),
        -inv_n);
}

Tensor joint_loss(const Tensor& contrastive, const Tensor& ce,
                  const LossWeights& weights) {
    if (!std::isfinite(contrastive.value()) || !std::isfinite(ce.value())) {
        throw NumericError("joint_loss: non-finite loss input");
    }
    return ops::add(ops::mul(weights.lambda1(), contrastive),
                    ops::mul(weights.lambda2(), ce));
}

}  // namespace voxalign
