#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace logitmix {

struct Tensor;

// One recorded operation: the operands it consumed and the adjoint rule that
// scatters the output gradient back into them.
struct GraphNode {
    std::vector<Tensor> parents;
    std::function<void(const Tensor& out)> backward;
};

// Thread-local switch; when off, ops compute values but record no graph.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Dense row-major tensor of doubles. Copies share storage; the graph is
// rebuilt on every forward pass and confined to one thread.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    std::shared_ptr<std::vector<double>> grad;  // allocated iff requires_grad
    std::shared_ptr<GraphNode> node;            // non-null for recorded op outputs
    bool requires_grad = false;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    std::size_t numel() const;
    bool defined() const { return data != nullptr; }

    double value() const;                  // scalar tensors only
    double at(int i) const { return (*data)[static_cast<std::size_t>(i)]; }
    double at(int r, int c) const {
        return (*data)[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) +
                       static_cast<std::size_t>(c)];
    }
    double& mutable_at(int i) { return (*data)[static_cast<std::size_t>(i)]; }

    double grad_at(int i) const { return (*grad)[static_cast<std::size_t>(i)]; }

    void zero_grad();
};

// Reverse-mode sweep from a scalar root. Interior gradients are reset per
// sweep; leaf gradients accumulate across repeated calls.
void backward(const Tensor& loss);

// Elementwise / structural ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor clip(const Tensor& a, double lo, double hi);
Tensor min_elem(const Tensor& a, const Tensor& b);

// Reductions and indexing.
Tensor sum(const Tensor& a);
Tensor add_n(std::span<const Tensor> terms);
Tensor pick(const Tensor& v, int index);
Tensor row(const Tensor& m, int r);
Tensor concat(const Tensor& a, const Tensor& b);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor vec_mat(const Tensor& v, const Tensor& m);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Distributions over a 1-D vector, max-subtracted for stability.
Tensor softmax(const Tensor& z);
Tensor log_softmax(const Tensor& z);

// Throws if any entry is non-finite.
void assert_finite(const Tensor& t, const char* what);

}  // namespace logitmix
