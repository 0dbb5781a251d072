#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "aecf/errors.hpp"
#include "aecf/tensor.hpp"

namespace aecf {

// A tensor value together with its position on a tape. id < 0 means the value
// is a constant: no gradient flows into it and it never appears as a parent.
struct Traced {
  int id = -1;
  Tensor value;

  Traced() = default;
  explicit Traced(Tensor v) : value(std::move(v)) {}
  Traced(int id_, Tensor v) : id(id_), value(std::move(v)) {}

  bool on_tape() const { return id >= 0; }
};

// Result of a backward pass: gradient tensor per watched tape id.
class GradientMap {
 public:
  bool contains(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < grads_.size() && grads_[id].has_value();
  }

  const Tensor& at(int id) const {
    if (!contains(id)) {
      throw UsageError("no gradient for tape id " + std::to_string(id));
    }
    return *grads_[id];
  }

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

// Record of executed primitive operations in execution order. Replaying the
// record backward yields gradients for every watched tensor. Single-threaded;
// independent tapes may run concurrently on shared read-only parameters.
class Tape {
 public:
  // backward fn: upstream gradient of this node's output -> one gradient per
  // parent, in the same order as the parents list.
  using BackwardFn = std::function<std::vector<Tensor>(const Tensor& upstream)>;

  // Marks a tensor as requiring gradient.
  Traced watch(Tensor t) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{{}, nullptr, t.shape()});
    watched_.push_back(id);
    return Traced(id, std::move(t));
  }

  // Records one executed operation and returns its traced output.
  Traced record(Tensor output, std::vector<int> parents, BackwardFn backward) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{std::move(parents), std::move(backward), output.shape()});
    return Traced(id, std::move(output));
  }

  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar loss w.r.t. every watched tensor. Each recorded
  // operation is visited exactly once, in reverse execution order.
  GradientMap backward(const Traced& loss) const {
    if (!loss.on_tape() || static_cast<std::size_t>(loss.id) >= nodes_.size()) {
      throw UsageError("backward: loss tensor is not on this tape");
    }
    if (!loss.value.is_scalar()) {
      throw UsageError("backward: loss must be scalar, got shape " +
                       Tensor::shape_string(loss.value.shape()));
    }

    GradientMap out;
    out.grads_.resize(nodes_.size());
    out.grads_[loss.id] = Tensor::scalar(1.0);

    for (int id = loss.id; id >= 0; --id) {
      const Node& node = nodes_[id];
      if (!out.grads_[id].has_value() || !node.backward) continue;
      const std::vector<Tensor> parent_grads = node.backward(*out.grads_[id]);
      if (parent_grads.size() != node.parents.size()) {
        throw UsageError("backward: op produced " + std::to_string(parent_grads.size()) +
                         " gradients for " + std::to_string(node.parents.size()) + " parents");
      }
      for (std::size_t p = 0; p < node.parents.size(); ++p) {
        accumulate(out.grads_[node.parents[p]], parent_grads[p]);
      }
    }

    // Watched tensors the loss does not depend on get explicit zeros.
    for (int id : watched_) {
      if (!out.grads_[id].has_value()) {
        out.grads_[id] = Tensor(nodes_[id].shape);
      }
    }
    return out;
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
    std::vector<int> shape;
  };

  static void accumulate(std::optional<Tensor>& slot, const Tensor& g) {
    if (!slot.has_value()) {
      slot = g;
      return;
    }
    ensure_same_shape(*slot, g, "gradient accumulation");
    double* a = slot->raw();
    const double* b = g.raw();
    for (std::size_t i = 0; i < g.size(); ++i) a[i] += b[i];
  }

  std::vector<Node> nodes_;
  std::vector<int> watched_;
};

}  // namespace aecf
