#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Reverse-mode tape. Constructing a Graph makes it the active tape for the
// current thread (RAII); ops append one node per executed operation, so the
// tape order is the execution order. backward() replays the nodes exactly
// once in reverse. Gradients accumulate additively, so calling backward twice
// without zeroing doubles leaf gradients; that is documented behavior.
template <typename Scalar>
class Graph {
public:
    Graph() : prev_(active_ref()) { active_ref() = this; }
    ~Graph() { active_ref() = prev_; }
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    static Graph* active() { return active_ref(); }

    void record(std::shared_ptr<TensorStorage<Scalar>> output, std::function<void()> node) {
        nodes_.push_back({std::move(output), std::move(node)});
    }

    std::size_t size() const { return nodes_.size(); }

    void backward(const Tensor<Scalar>& loss) {
        check_contract(loss.defined() && loss.numel() == 1,
                       "backward requires a scalar loss tensor");
        check_contract(loss.requires_grad(),
                       "backward requires a loss produced through recorded operations");
        // Interior gradients are per-sweep scratch; only leaves accumulate
        // across repeated backward calls.
        for (auto& n : nodes_)
            if (n.output->has_grad()) n.output->grad.setZero();
        loss.storage()->ensure_grad();
        loss.storage()->grad(0) = Scalar(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->fn();
    }

    void clear() { nodes_.clear(); }

private:
    static Graph*& active_ref() {
        static thread_local Graph* active = nullptr;
        return active;
    }

    struct Node {
        std::shared_ptr<TensorStorage<Scalar>> output;
        std::function<void()> fn;
    };
    std::vector<Node> nodes_;
    Graph* prev_;
};

namespace detail {

// Appends a backward node when recording is on and some input carries grad.
// The node itself re-checks which inputs want gradients.
template <typename Scalar, typename F>
void record_op(Tensor<Scalar>& out, std::initializer_list<const Tensor<Scalar>*> inputs, F&& backward) {
    Graph<Scalar>* g = Graph<Scalar>::active();
    if (!g) return;
    bool any = false;
    for (const Tensor<Scalar>* t : inputs) any = any || (t && t->requires_grad());
    if (!any) return;
    out.set_requires_grad(true);
    g->record(out.storage(), std::forward<F>(backward));
}

}  // namespace detail

}  // namespace nowcast
