#include "vmcnet/graph.hpp"

#include <optional>
#include <stdexcept>

namespace vmcnet {

const Tensor& GradMap::at(ValueId id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
        throw std::out_of_range("no gradient for leaf id " + std::to_string(id) +
                                " (frozen or disconnected from the loss)");
    return it->second;
}

ValueId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Graph::leaf(Tensor value, bool trainable, std::string name) {
    Node n;
    n.op = "leaf";
    n.value = std::move(value);
    n.leaf = true;
    n.trainable = trainable;
    n.name = std::move(name);
    return push(std::move(n));
}

ValueId Graph::constant(Tensor value, std::string name) {
    Node n;
    n.op = "const";
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
}

ValueId Graph::record(std::string op, std::vector<ValueId> inputs, Tensor out, VjpFn vjp) {
    for (ValueId id : inputs)
        if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
            throw std::invalid_argument(op + ": input id out of range");
    if (!out.all_finite())
        throw std::runtime_error(op + ": non-finite value in output");
    Node n;
    n.op = std::move(op);
    n.inputs = std::move(inputs);
    n.value = std::move(out);
    n.vjp = std::move(vjp);
    return push(std::move(n));
}

GradMap Graph::backward(ValueId loss) const {
    const Node& ln = node(loss);
    if (ln.value.numel() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                    shape_str(ln.value.shape()));

    std::vector<std::optional<Tensor>> grads(nodes_.size());
    grads[static_cast<std::size_t>(loss)] = Tensor::full(ln.value.shape(), 1.0, ln.value.dtype());

    auto accumulate = [](std::optional<Tensor>& slot, Tensor&& g) {
        if (!slot) {
            slot = std::move(g);
            return;
        }
        Tensor& acc = *slot;
        if (acc.dtype() == Dtype::f32) {
            auto a = acc.data<float>();
            auto b = g.data<const float>();
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        } else {
            auto a = acc.data<double>();
            auto b = g.data<const double>();
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        }
    };

    for (std::int64_t id = loss; id >= 0; --id) {
        auto& slot = grads[static_cast<std::size_t>(id)];
        if (!slot) continue;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.vjp) continue;
        std::vector<Tensor> gins = n.vjp(*this, n, *slot);
        if (gins.size() != n.inputs.size())
            throw std::logic_error(n.op + ": vjp returned " + std::to_string(gins.size()) +
                                   " gradients for " + std::to_string(n.inputs.size()) +
                                   " inputs");
        for (std::size_t i = 0; i < gins.size(); ++i) {
            if (gins[i].numel() == 0) continue;
            const Node& in = nodes_[static_cast<std::size_t>(n.inputs[i])];
            if (gins[i].shape() != in.value.shape())
                throw std::logic_error(n.op + ": vjp gradient shape " +
                                       shape_str(gins[i].shape()) + " does not match input " +
                                       shape_str(in.value.shape()));
            accumulate(grads[static_cast<std::size_t>(n.inputs[i])], std::move(gins[i]));
        }
    }

    GradMap out;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        if (n.leaf && n.trainable && grads[id]) out[static_cast<ValueId>(id)] = std::move(*grads[id]);
    }
    return out;
}

} // namespace vmcnet
