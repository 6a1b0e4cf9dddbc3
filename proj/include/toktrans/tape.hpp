#pragma once

#include <functional>
#include <span>
#include <vector>

#include "toktrans/tensor.hpp"

namespace toktrans {

// Recorded-graph reverse-mode autodiff. A Tape owns every node created on
// it; ops append nodes in topological order and backward() sweeps the node
// list in reverse exactly once. Single-owner: not shared across threads.
class Tape {
public:
    using BackwardFn = std::function<std::vector<Tensor>(const Tensor& upstream)>;

    struct Node {
        Tensor value;
        std::vector<int> parents;
        BackwardFn backward;  // empty for leaves
        bool requires_grad = false;
    };

    int leaf(Tensor value);
    int leaf(Tensor value, bool requires_grad);

    // Custom-gradient node: backward maps the upstream gradient of `value`
    // to one gradient per parent (shapes must match the parents' values).
    int custom_op(std::vector<int> parents, Tensor value, BackwardFn backward);

    const Tensor& value(int id) const { return nodes_.at(id).value; }
    bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar root (seeded with 1). Returns per-node
    // gradients; entries for untouched nodes are empty tensors.
    std::vector<Tensor> backward(int root);
    // Same, with an explicit seed matching root's shape.
    std::vector<Tensor> backward(int root, Tensor seed);

private:
    std::vector<Node> nodes_;
};

// ---- core ops ----------------------------------------------------------

int matmul(Tape& t, int a, int b);
int transpose(Tape& t, int a);
int add(Tape& t, int a, int b);
int sub(Tape& t, int a, int b);
int mul(Tape& t, int a, int b);          // elementwise (hadamard)
int scale(Tape& t, int a, double c);
int exp_op(Tape& t, int a);
int log_op(Tape& t, int a);
int gelu(Tape& t, int a);
int sum(Tape& t, int a);                 // -> scalar
int add_row_broadcast(Tape& t, int a, int row);  // a[i,:] + row

// out[..., j] = a[..., j] * v[j]; v is a vector node of length last-dim.
int hadamard_broadcast_last(Tape& t, int a, int v);

int row_softmax(Tape& t, int a);
int layer_norm_rows(Tape& t, int x, int gain, int bias, double eps = 1e-5);
int gather_rows(Tape& t, int table, std::vector<std::size_t> ids);

// Mean over rows 0..targets.size()-1 of -log softmax(logits[row])[target].
// Stabilized by row-max subtraction. Nats.
int softmax_cross_entropy(Tape& t, int logits, std::vector<int> targets);

}  // namespace toktrans
