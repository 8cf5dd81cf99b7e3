#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gpda/common.hpp"

namespace gpda::ad {

class Tape;

struct TensorData {
    Mat value;
    Mat grad;                  // always the same shape as value
    bool requires_grad = false;
    int node_id = -1;          // producing op's node in the tape, -1 for leaves
    const Tape* tape = nullptr;
};

/// Shared handle to a dense 2-D tensor. Leaves are parameters (requires_grad)
/// or constants; everything else is produced by an op and owned by the tape
/// that recorded it.
class Tensor {
  public:
    Tensor() = default;

    static Tensor leaf(Mat v, bool requires_grad) {
        Tensor t;
        t.d_ = std::make_shared<TensorData>();
        t.d_->grad = Mat(v.rows, v.cols);
        t.d_->value = std::move(v);
        t.d_->requires_grad = requires_grad;
        return t;
    }
    static Tensor constant(Mat v) { return leaf(std::move(v), false); }
    static Tensor param(Mat v) { return leaf(std::move(v), true); }

    bool defined() const { return d_ != nullptr; }
    int rows() const { return d_->value.rows; }
    int cols() const { return d_->value.cols; }
    const Mat& value() const { return d_->value; }
    Mat& value() { return d_->value; }
    const Mat& grad() const { return d_->grad; }
    Mat& grad() { return d_->grad; }
    bool requires_grad() const { return d_->requires_grad; }
    int node_id() const { return d_->node_id; }

    void zero_grad() const { d_->grad.fill(0.0); }

    double scalar() const {
        if (rows() != 1 || cols() != 1)
            throw ContractError("Tensor::scalar: tensor is " + d_->value.shape_str() + ", not 1x1");
        return d_->value(0, 0);
    }

    std::shared_ptr<TensorData> data() const { return d_; }

  private:
    std::shared_ptr<TensorData> d_;
};

struct TapeNode {
    const char* op;
    std::vector<int> input_ids;  // node ids of inputs, -1 for leaves
    int output_id;
    std::shared_ptr<TensorData> output;
    std::function<void()> backward;  // accumulates output->grad into input grads
};

/// Computation record: ops appended in execution order, so every node's
/// inputs precede it. Rebuilt from scratch each training step.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current();

    int size() const { return static_cast<int>(nodes_.size()); }
    const TapeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

    int record(const char* op, std::vector<int> input_ids, const Tensor& output,
               std::function<void()> backward);

    /// Reverse sweep from a scalar root. Interior adjoints are recomputed from
    /// scratch each call; leaf gradients accumulate across calls.
    void backward(const Tensor& root);

  private:
    std::vector<TapeNode> nodes_;
};

/// Makes a tape the recording target for ops created in this scope.
class TapeScope {
  public:
    explicit TapeScope(Tape& t);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* prev_;
};

// ---- ops -------------------------------------------------------------
// Each op computes its forward value unconditionally; it records a backward
// rule only when a tape is active and some input requires gradients.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
/// x[n x f] + row[1 x f] broadcast over rows.
Tensor add_row_broadcast(const Tensor& x, const Tensor& row);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
/// Saturates to [lo, hi]; gradient passes only strictly inside the band.
Tensor clamp(const Tensor& a, double lo, double hi);
/// Forward identity; backward multiplies the incoming gradient by -coeff.
Tensor gradient_reversal(const Tensor& a, double coeff);
Tensor sum(const Tensor& a);  // 1x1
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& a, int begin, int end);
/// Mean of the selected rows, 1 x cols.
Tensor mean_rows_subset(const Tensor& a, std::vector<int> row_ids);
/// (1/n) * sum_i weights_i * CE(softmax(logits_i), labels_i), row-max stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, const Mat& labels,
                             const std::vector<double>& weights);
/// sum_i coeff_i * bce(clamp(p_i), target_i); probabilities clamped to
/// [1e-7, 1 - 1e-7].
Tensor bce_sum(const Tensor& probs, const std::vector<double>& targets,
               const std::vector<double>& coeffs);

Tensor detach(const Tensor& a);

/// backward on the current tape; requires an active TapeScope.
void backward(const Tensor& root);

// ---- plain forward helpers (no tape) ----------------------------------

/// Row-wise softmax with max subtraction.
Mat softmax_rows(const Mat& logits);

}  // namespace gpda::ad
