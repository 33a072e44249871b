#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "anyprot/common.hpp"

namespace anyprot {

struct Node;

// Dense row-major 64-bit float tensor with reverse-mode differentiation.
// Values are immutable once produced by an op; copies share storage.
struct Tensor {
    std::vector<int> shape;
    std::shared_ptr<std::vector<double>> data;
    bool requires_grad = false;
    std::shared_ptr<std::vector<double>> grad;  // allocated lazily
    std::shared_ptr<Node> node;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    int64_t numel() const;
    bool defined() const { return static_cast<bool>(data); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;

    double item() const;  // scalar tensors only
    double at(int i) const { return (*data)[static_cast<size_t>(i)]; }
    double at(int i, int j) const { return (*data)[static_cast<size_t>(i) * cols() + j]; }
    double& mut(int i) { return (*data)[static_cast<size_t>(i)]; }
    double& mut(int i, int j) { return (*data)[static_cast<size_t>(i) * cols() + j]; }

    void ensure_grad();  // allocate and zero if missing
    void zero_grad();
};

// One reverse edge in the computation graph. `backward` reads out.grad and
// accumulates into the parents' grads.
struct Node {
    std::vector<Tensor> parents;
    std::function<void(Tensor&)> backward;
};

bool grad_enabled();
void set_grad_enabled(bool enabled);

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
// softmax(q k^T / sqrt(d)) v; strictly-upper-triangular rows masked when causal.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);
Tensor gelu(const Tensor& x);
Tensor tanh_scaled(const Tensor& x, double scale);
Tensor sum(const Tensor& x);
// x (n x d_in) * w (d_in x d_out) + b broadcast over rows
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor slice_cols(const Tensor& a, int begin, int end);
Tensor concat_cols(const std::vector<Tensor>& parts);
// out = base; out[positions[r], :] += rows[r, :]
Tensor scatter_add_rows(const Tensor& base, const Tensor& rows, const std::vector<int>& positions);
Tensor sum_rows_to_vector(const Tensor& a);  // (n x d) -> (d)

// Reverse-mode accumulation from a scalar loss. Parents' grads are
// accumulated, not overwritten; callers zero parameter grads explicitly.
void backward(Tensor& loss);

// Attach a node to `out` when gradients are in play. Exposed so higher level
// modules can define fused ops with hand-written backward rules.
void attach_node(Tensor& out, std::vector<Tensor> parents, std::function<void(Tensor&)> fn);

// ---------------------------------------------------------------------------
// raw kernels, shared by the autograd ops and the no-graph inference path
// ---------------------------------------------------------------------------
namespace kernels {
// out = a (m x k) * b (k x n); `acc` accumulates instead of overwriting
void matmul(const double* a, const double* b, double* out, int m, int k, int n, bool acc = false);
// out = a (m x k) * b^T where b is (n x k)
void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool acc = false);
// out = a^T (k x m -> m x k storage) * b (k x n); a is stored (k x m)
void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool acc = false);
void softmax_row(const double* x, double* out, int n);
void layer_norm_row(const double* x, const double* gain, const double* bias, double* out, int n);
constexpr double kLayerNormEps = 1e-5;
}  // namespace kernels

// ---------------------------------------------------------------------------
// named parameters
// ---------------------------------------------------------------------------

struct ParameterSet {
    std::map<std::string, Tensor> values;  // ordered; iteration order is part of determinism
    std::set<std::string> trainable;

    bool contains(const std::string& name) const { return values.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    void insert(const std::string& name, Tensor t, bool is_trainable);
    // Marks as trainable exactly the parameters matched by any prefix; the rest
    // are frozen (requires_grad cleared).
    void set_trainable_prefixes(const std::vector<std::string>& prefixes);
    void zero_grads();
    int64_t total_scalars() const;
};

// Worst relative FD-vs-reverse-mode error over trainable scalars.
// max_per_tensor = 0 checks every scalar; > 0 checks a seeded sample per tensor.
// Relative error uses denominator max(|ad|, |fd|, 1).
double grad_check(const std::function<Tensor(ParameterSet&)>& f, ParameterSet& params,
                  double step = 1e-5, int max_per_tensor = 0, uint64_t seed = 0);

// Checkpoint: `<prefix>.manifest` (text: name ndim dims... offset trainable)
// plus `<prefix>.bin` (flat little-endian f64 payload). Round trip is
// bit-exact.
void save_checkpoint(const ParameterSet& params, const std::string& prefix);
ParameterSet load_checkpoint(const std::string& prefix);

}  // namespace anyprot
