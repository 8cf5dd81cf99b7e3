#pragma once

#include <vector>

#include "gpda/common.hpp"

namespace gpda::graph {

enum class LabelKind { ground_truth, pseudo, unlabeled };

/// Per-node label vectors over the source class space. Ground-truth and hard
/// pseudo rows are one-hot; unlabeled rows are all-zero. Soft pseudo rows keep
/// the full simplex vector.
struct NodeLabels {
    Mat rows;                     // n x C
    std::vector<LabelKind> kind;  // per row

    int size() const { return rows.rows; }
    int classes() const { return rows.cols; }
};

/// Label relational graph over a mini-batch: adjacency from label inner
/// products, self-looped and symmetrically degree-normalized.
struct LabelGraph {
    int n = 0;
    Mat A;                         // n x n, A_ij = <y_i, y_j>
    Mat A_tilde;                   // A + I
    std::vector<double> d_tilde;   // row sums of A_tilde
    Mat P;                         // D^{-1/2} A_tilde D^{-1/2}
};

LabelGraph build_adjacency(const NodeLabels& labels);

/// Hard thresholded pseudo-labels: rows with max probability >= threshold
/// become one-hot at the argmax (ties toward the lowest class index), the
/// rest become unlabeled.
NodeLabels assign_pseudo_labels(const Mat& probs, double threshold);

/// Soft variant: simplex rows kept verbatim as pseudo labels.
NodeLabels soft_pseudo_labels(const Mat& probs);

NodeLabels ground_truth_labels(const std::vector<int>& class_ids, int classes);

NodeLabels concat(const NodeLabels& a, const NodeLabels& b);

}  // namespace gpda::graph
