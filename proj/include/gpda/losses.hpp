#pragma once

#include <vector>

#include "gpda/autodiff.hpp"
#include "gpda/common.hpp"

namespace gpda::losses {

/// Per-class probability of a source class belonging to the target label
/// space: the mean source-classifier softmax over the target set.
struct ClassWeights {
    std::vector<double> gamma;

    static ClassWeights ones(int classes) {
        return ClassWeights{std::vector<double>(static_cast<std::size_t>(classes), 1.0)};
    }
    int classes() const { return static_cast<int>(gamma.size()); }
};

/// Moving-average feature centroids per class and domain.
struct CentroidBank {
    int classes = 0;
    int dim = 0;
    double momentum = 0.7;
    Mat c_s;                      // classes x dim
    Mat c_t;
    std::vector<std::uint8_t> seen_s;
    std::vector<std::uint8_t> seen_t;

    CentroidBank() = default;
    CentroidBank(int classes_, int dim_, double momentum_)
        : classes(classes_), dim(dim_), momentum(momentum_), c_s(classes_, dim_),
          c_t(classes_, dim_), seen_s(static_cast<std::size_t>(classes_), 0),
          seen_t(static_cast<std::size_t>(classes_), 0) {
        if (momentum_ < 0.0 || momentum_ >= 1.0)
            throw ContractError("CentroidBank: momentum must lie in [0, 1)");
    }
};

struct LossBreakdown {
    double l_s = 0.0;
    double l_t = 0.0;
    double l_d = 0.0;
    double l_cs = 0.0;
    double total = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;

    static LossBreakdown from_parts(double l_s, double l_t, double l_d, double l_cs,
                                    double lambda1, double lambda2) {
        return LossBreakdown{l_s, l_t, l_d, l_cs,
                             l_s + l_t + lambda1 * l_d + lambda2 * l_cs, lambda1, lambda2};
    }
};

/// Unweighted mean cross entropy over the source batch.
ad::Tensor loss_source(const ad::Tensor& logits, const Mat& labels_onehot);

/// (1/n) sum_i gamma_{y_i} CE_i; normalization stays 1/n regardless of the
/// weights.
ad::Tensor loss_target_weighted(const ad::Tensor& logits, const Mat& labels_onehot,
                                const ClassWeights& gamma);

/// Column mean of the target softmax rows; optionally rescaled so the largest
/// entry is 1.
ClassWeights estimate_gamma(const Mat& target_probs, bool normalize);

/// Discriminator-minimized domain loss:
/// (1/n_s) sum_src w_i bce_i + (1/n_t) sum_tgt bce_i. The minimax sign flip
/// for the feature path is realized by the gradient reversal inside
/// discriminate, not here.
ad::Tensor loss_domain(const ad::Tensor& domain_probs, const std::vector<int>& domain_labels,
                       const std::vector<double>& sample_weights, int n_s, int n_t);

/// -sum_k ||c^s_k - c^t_{(k+offset) mod C}||^2 over pairs where both sides
/// have been seen; unseen pairs contribute zero.
double loss_centroid_separation(const CentroidBank& bank, int offset);

/// L_total = L_S + L_T + lambda1 L_D + lambda2 L_CS as a tape scalar.
ad::Tensor total_loss(const ad::Tensor& l_s, const ad::Tensor& l_t, const ad::Tensor& l_d,
                      const ad::Tensor& l_cs, double lambda1, double lambda2);

}  // namespace gpda::losses
