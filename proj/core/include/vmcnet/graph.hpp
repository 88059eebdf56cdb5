#pragma once

#include "vmcnet/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace vmcnet {

using ValueId = std::int32_t;

class Graph;

/// Gradients of a scalar loss with respect to the trainable leaves of a
/// Graph. Frozen leaves and constants never get an entry.
class GradMap {
public:
    bool contains(ValueId id) const { return by_id_.count(id) != 0; }
    const Tensor& at(ValueId id) const;
    Tensor& operator[](ValueId id) { return by_id_[id]; }
    std::size_t size() const { return by_id_.size(); }

private:
    std::unordered_map<ValueId, Tensor> by_id_;
};

/// Op tape recorded during a forward pass. Nodes are appended in evaluation
/// order, so node order is a topological order and backward is a single
/// reverse sweep with a fixed accumulation order (bit-exact across runs).
class Graph {
public:
    struct Node;
    /// Returns one gradient tensor per input; an empty (0-element) tensor
    /// means no gradient flows to that input.
    using VjpFn = std::function<std::vector<Tensor>(const Graph&, const Node&, const Tensor& gout)>;

    struct Node {
        std::string op;
        std::vector<ValueId> inputs;
        Tensor value;
        VjpFn vjp;          // null for leaves, constants, non-differentiable ops
        bool leaf = false;
        bool trainable = false;
        std::string name;   // leaf name, for diagnostics
    };

    ValueId leaf(Tensor value, bool trainable, std::string name = {});
    ValueId constant(Tensor value, std::string name = {});
    ValueId record(std::string op, std::vector<ValueId> inputs, Tensor out, VjpFn vjp);

    const Tensor& val(ValueId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Node& node(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }

    /// Reverse-mode sweep from a scalar loss. Visits each node once in
    /// reverse recording order. Throws if loss is not a scalar.
    GradMap backward(ValueId loss) const;

private:
    ValueId push(Node n);
    std::vector<Node> nodes_;
};

} // namespace vmcnet
