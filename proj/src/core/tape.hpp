#pragma once

#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace dasfft {

using Var = int;

// Reverse-mode tape. Each recorded node owns its forward value and a closure
// that scatters this node's gradient into its parents. One tape per training
// step; replay order is creation order reversed.
class Tape {
  public:
    struct Node {
        Tensor val;
        Tensor grad;
        bool has_grad = false;
        std::function<void(Tape&)> back;
    };

    Var push(Tensor val) {
        nodes_.push_back(Node{std::move(val), {}, false, nullptr});
        return static_cast<Var>(nodes_.size()) - 1;
    }
    Var leaf(const Tensor& t) { return push(t); }
    Var leaf(Tensor&& t) { return push(std::move(t)); }

    void set_back(Var v, std::function<void(Tape&)> fn) { nodes_[static_cast<std::size_t>(v)].back = std::move(fn); }

    const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v)].val; }
    bool has_grad(Var v) const { return nodes_[static_cast<std::size_t>(v)].has_grad; }

    // Lazily zero-initialized gradient accumulator.
    Tensor& grad(Var v) {
        Node& n = nodes_[static_cast<std::size_t>(v)];
        if (!n.has_grad) {
            n.grad = Tensor::zeros(n.val.shape);
            n.has_grad = true;
        }
        return n.grad;
    }

    // Seeds d(root)/d(root)=1 (root must be scalar) and runs all recorded
    // backward closures in reverse order.
    void backward(Var root) {
        require(val(root).size() == 1, "backward root must be scalar");
        grad(root).data[0] = 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.has_grad && n.back) n.back(*this);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

  private:
    std::vector<Node> nodes_;
};

}  // namespace dasfft
