#include "anyprot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace anyprot {

namespace {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw DimensionError("negative dimension");
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape)
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                             shape_str(b.shape));
}

bool thread_grad_enabled = true;

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(static_cast<size_t>(shape_numel(t.shape)), 0.0);
    t.requires_grad = requires_grad;
    // Grad storage is allocated up front so every copy of this tensor shares
    // it; copies made before allocation would otherwise split accumulation.
    if (requires_grad) t.ensure_grad();
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw DimensionError("from: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(shape));
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<double>>(std::move(values));
    t.requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

int64_t Tensor::numel() const { return shape_numel(shape); }

int Tensor::rows() const {
    if (shape.size() != 2) throw DimensionError("rows: tensor is not 2-d");
    return shape[0];
}

int Tensor::cols() const {
    if (shape.size() != 2) throw DimensionError("cols: tensor is not 2-d");
    return shape[1];
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item: tensor has " + std::to_string(numel()) + " elements");
    return (*data)[0];
}

void Tensor::ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<double>>(data->size(), 0.0);
}

void Tensor::zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
}

bool grad_enabled() { return thread_grad_enabled; }
void set_grad_enabled(bool enabled) { thread_grad_enabled = enabled; }

NoGradGuard::NoGradGuard() : prev_(thread_grad_enabled) { thread_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { thread_grad_enabled = prev_; }

namespace {

bool want_grad(const Tensor& t) {
    return thread_grad_enabled && (t.requires_grad || t.node);
}

bool want_grad(const Tensor& a, const Tensor& b) { return want_grad(a) || want_grad(b); }

}  // namespace

void attach_node(Tensor& out, std::vector<Tensor> parents, std::function<void(Tensor&)> fn) {
    bool any = false;
    for (const Tensor& p : parents) any = any || want_grad(p);
    if (!any) return;
    out.requires_grad = true;
    out.ensure_grad();
    out.node = std::make_shared<Node>();
    out.node->parents = std::move(parents);
    out.node->backward = std::move(fn);
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------
namespace kernels {

void matmul(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
    if (!acc) std::memset(out, 0, sizeof(double) * static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* orow = out + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void matmul_nt(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
    // out (m x n) = a (m x k) * b^T, b stored (n x k)
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* orow = out + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            if (acc)
                orow[j] += s;
            else
                orow[j] = s;
        }
    }
}

void matmul_tn(const double* a, const double* b, double* out, int m, int k, int n, bool acc) {
    // out (m x n) = a^T * b, a stored (k x m), b stored (k x n)
    if (!acc) std::memset(out, 0, sizeof(double) * static_cast<size_t>(m) * n);
    for (int p = 0; p < k; ++p) {
        const double* arow = a + static_cast<size_t>(p) * m;
        const double* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void softmax_row(const double* x, double* out, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - mx);
        z += out[i];
    }
    const double inv = 1.0 / z;
    for (int i = 0; i < n; ++i) out[i] *= inv;
}

void layer_norm_row(const double* x, const double* gain, const double* bias, double* out, int n) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (int i = 0; i < n; ++i) out[i] = (x[i] - mean) * inv * gain[i] + bias[i];
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape);
    const size_t n = a.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
    if (want_grad(a, b))
        attach_node(out, {a, b}, [n](Tensor& o) {
            for (int pi = 0; pi < 2; ++pi) {
                Tensor& p = o.node->parents[pi];
                if (!p.requires_grad && !p.node) continue;
                p.ensure_grad();
                for (size_t i = 0; i < n; ++i) (*p.grad)[i] += (*o.grad)[i];
            }
        });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape);
    const size_t n = a.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] - (*b.data)[i];
    if (want_grad(a, b))
        attach_node(out, {a, b}, [n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            if (pa.requires_grad || pa.node) {
                pa.ensure_grad();
                for (size_t i = 0; i < n; ++i) (*pa.grad)[i] += (*o.grad)[i];
            }
            if (pb.requires_grad || pb.node) {
                pb.ensure_grad();
                for (size_t i = 0; i < n; ++i) (*pb.grad)[i] -= (*o.grad)[i];
            }
        });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape);
    const size_t n = a.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * (*b.data)[i];
    if (want_grad(a, b))
        attach_node(out, {a, b}, [n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            if (pa.requires_grad || pa.node) {
                pa.ensure_grad();
                for (size_t i = 0; i < n; ++i) (*pa.grad)[i] += (*o.grad)[i] * (*pb.data)[i];
            }
            if (pb.requires_grad || pb.node) {
                pb.ensure_grad();
                for (size_t i = 0; i < n; ++i) (*pb.grad)[i] += (*o.grad)[i] * (*pa.data)[i];
            }
        });
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape);
    const size_t n = a.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] + s;
    if (want_grad(a))
        attach_node(out, {a}, [n](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < n; ++i) (*p.grad)[i] += (*o.grad)[i];
        });
    return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
    Tensor out = Tensor::zeros(a.shape);
    const size_t n = a.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = (*a.data)[i] * s;
    if (want_grad(a))
        attach_node(out, {a}, [n, s](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < n; ++i) (*p.grad)[i] += (*o.grad)[i] * s;
        });
    return out;
}

// ---------------------------------------------------------------------------
// matmul / transpose
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw DimensionError("matmul: operands must be 2-d");
    if (a.shape[1] != b.shape[0])
        throw DimensionError("matmul: inner dims " + shape_str(a.shape) + " x " + shape_str(b.shape));
    const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(a.data->data(), b.data->data(), out.data->data(), m, k, n);
    if (want_grad(a, b))
        attach_node(out, {a, b}, [m, k, n](Tensor& o) {
            Tensor& pa = o.node->parents[0];
            Tensor& pb = o.node->parents[1];
            if (pa.requires_grad || pa.node) {
                pa.ensure_grad();
                // dA = dOut * B^T : (m x n) * (n x k), B stored (k x n)
                kernels::matmul_nt(o.grad->data(), pb.data->data(), pa.grad->data(), m, n, k, true);
            }
            if (pb.requires_grad || pb.node) {
                pb.ensure_grad();
                // dB = A^T * dOut : (k x m)^T is A stored (m x k)
                kernels::matmul_tn(pa.data->data(), o.grad->data(), pb.grad->data(), k, m, n, true);
            }
        });
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw DimensionError("transpose: tensor is not 2-d");
    const int m = a.shape[0], n = a.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.mut(j, i) = a.at(i, j);
    if (want_grad(a))
        attach_node(out, {a}, [m, n](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    (*p.grad)[static_cast<size_t>(i) * n + j] += (*o.grad)[static_cast<size_t>(j) * m + i];
        });
    return out;
}

// ---------------------------------------------------------------------------
// softmax / layer norm
// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& x, int axis) {
    if (x.ndim() == 1) {
        if (axis != 0) throw DimensionError("softmax: axis out of range for 1-d input");
        Tensor out = Tensor::zeros(x.shape);
        kernels::softmax_row(x.data->data(), out.data->data(), x.shape[0]);
        if (want_grad(x))
            attach_node(out, {x}, [n = x.shape[0]](Tensor& o) {
                Tensor& p = o.node->parents[0];
                p.ensure_grad();
                const double* s = o.data->data();
                const double* g = o.grad->data();
                double dot = 0.0;
                for (int i = 0; i < n; ++i) dot += s[i] * g[i];
                for (int i = 0; i < n; ++i) (*p.grad)[i] += s[i] * (g[i] - dot);
            });
        return out;
    }
    if (x.ndim() != 2 || axis != 1)
        throw DimensionError("softmax: supported forms are 1-d or 2-d with axis=1");
    const int m = x.shape[0], n = x.shape[1];
    Tensor out = Tensor::zeros(x.shape);
    for (int i = 0; i < m; ++i)
        kernels::softmax_row(x.data->data() + static_cast<size_t>(i) * n,
                             out.data->data() + static_cast<size_t>(i) * n, n);
    if (want_grad(x))
        attach_node(out, {x}, [m, n](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* s = o.data->data() + static_cast<size_t>(i) * n;
                const double* g = o.grad->data() + static_cast<size_t>(i) * n;
                double* pg = p.grad->data() + static_cast<size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += s[j] * g[j];
                for (int j = 0; j < n; ++j) pg[j] += s[j] * (g[j] - dot);
            }
        });
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    const int n = x.ndim() == 1 ? x.shape[0] : x.shape[x.ndim() - 1];
    if (x.ndim() > 2) throw DimensionError("layer_norm: input must be 1-d or 2-d");
    if (gain.ndim() != 1 || gain.shape[0] != n || bias.ndim() != 1 || bias.shape[0] != n)
        throw DimensionError("layer_norm: gain/bias must be 1-d of width " + std::to_string(n));
    const int m = x.ndim() == 1 ? 1 : x.shape[0];
    Tensor out = Tensor::zeros(x.shape);
    for (int i = 0; i < m; ++i)
        kernels::layer_norm_row(x.data->data() + static_cast<size_t>(i) * n, gain.data->data(),
                                bias.data->data(), out.data->data() + static_cast<size_t>(i) * n, n);
    if (want_grad(x) || want_grad(gain) || want_grad(bias))
        attach_node(out, {x, gain, bias}, [m, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            Tensor& pg = o.node->parents[1];
            Tensor& pb = o.node->parents[2];
            const bool need_x = px.requires_grad || px.node;
            const bool need_g = pg.requires_grad || pg.node;
            const bool need_b = pb.requires_grad || pb.node;
            if (need_x) px.ensure_grad();
            if (need_g) pg.ensure_grad();
            if (need_b) pb.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* xr = px.data->data() + static_cast<size_t>(i) * n;
                const double* go = o.grad->data() + static_cast<size_t>(i) * n;
                const double* gv = pg.data->data();
                double mean = 0.0;
                for (int j = 0; j < n; ++j) mean += xr[j];
                mean /= n;
                double var = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double d = xr[j] - mean;
                    var += d * d;
                }
                var /= n;
                const double inv = 1.0 / std::sqrt(var + kernels::kLayerNormEps);
                if (need_g || need_b) {
                    double* gg = need_g ? pg.grad->data() : nullptr;
                    double* gb = need_b ? pb.grad->data() : nullptr;
                    for (int j = 0; j < n; ++j) {
                        const double xhat = (xr[j] - mean) * inv;
                        if (gg) gg[j] += go[j] * xhat;
                        if (gb) gb[j] += go[j];
                    }
                }
                if (need_x) {
                    // dL/dx = inv * (gy - mean(gy) - xhat * mean(gy*xhat)), gy = go*gain
                    double sum_gy = 0.0, sum_gyx = 0.0;
                    for (int j = 0; j < n; ++j) {
                        const double xhat = (xr[j] - mean) * inv;
                        const double gy = go[j] * gv[j];
                        sum_gy += gy;
                        sum_gyx += gy * xhat;
                    }
                    const double mg = sum_gy / n, mgx = sum_gyx / n;
                    double* gx = px.grad->data() + static_cast<size_t>(i) * n;
                    for (int j = 0; j < n; ++j) {
                        const double xhat = (xr[j] - mean) * inv;
                        const double gy = go[j] * gv[j];
                        gx[j] += inv * (gy - mg - xhat * mgx);
                    }
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// attention (composite: relies on the ops above for gradients)
// ---------------------------------------------------------------------------

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
    if (q.ndim() != 2 || k.ndim() != 2 || v.ndim() != 2)
        throw DimensionError("attention: operands must be 2-d");
    if (q.shape[1] != k.shape[1])
        throw DimensionError("attention: q/k width mismatch");
    if (k.shape[0] != v.shape[0])
        throw DimensionError("attention: k/v length mismatch");
    const int tq = q.shape[0], tk = k.shape[0], d = q.shape[1];
    Tensor scores = mul_scalar(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    if (causal) {
        if (tq != tk) throw DimensionError("attention: causal mask needs square scores");
        // Additive mask; exp(-1e300 - finite) underflows to exactly 0.
        Tensor mask = Tensor::zeros({tq, tk});
        for (int i = 0; i < tq; ++i)
            for (int j = i + 1; j < tk; ++j) mask.mut(i, j) = -1e300;
        scores = add(scores, mask);
    }
    Tensor weights = softmax(scores, 1);
    return matmul(weights, v);
}

// ---------------------------------------------------------------------------
// nonlinearities
// ---------------------------------------------------------------------------

Tensor gelu(const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape);
    const size_t n = x.data->size();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (size_t i = 0; i < n; ++i) {
        const double v = (*x.data)[i];
        (*out.data)[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    if (want_grad(x))
        attach_node(out, {x}, [n](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            constexpr double inv_sqrt2 = 0.7071067811865475244;
            constexpr double inv_sqrt2pi = 0.3989422804014326779;
            for (size_t i = 0; i < n; ++i) {
                const double v = (*p.data)[i];
                const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                (*p.grad)[i] += (*o.grad)[i] * (cdf + v * pdf);
            }
        });
    return out;
}

Tensor tanh_scaled(const Tensor& x, double scale) {
    Tensor out = Tensor::zeros(x.shape);
    const size_t n = x.data->size();
    for (size_t i = 0; i < n; ++i) (*out.data)[i] = scale * std::tanh((*x.data)[i]);
    if (want_grad(x))
        attach_node(out, {x}, [n, scale](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (size_t i = 0; i < n; ++i) {
                const double t = std::tanh((*p.data)[i]);
                (*p.grad)[i] += (*o.grad)[i] * scale * (1.0 - t * t);
            }
        });
    return out;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : *x.data) s += v;
    Tensor out = Tensor::scalar(s);
    if (want_grad(x))
        attach_node(out, {x}, [](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            const double g = (*o.grad)[0];
            for (double& pg : *p.grad) pg += g;
        });
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 2 || w.ndim() != 2) throw DimensionError("linear: x and w must be 2-d");
    if (x.shape[1] != w.shape[0]) throw DimensionError("linear: width mismatch");
    const int m = x.shape[0], k = x.shape[1], n = w.shape[1];
    if (b.ndim() != 1 || b.shape[0] != n) throw DimensionError("linear: bias width mismatch");
    Tensor out = Tensor::zeros({m, n});
    kernels::matmul(x.data->data(), w.data->data(), out.data->data(), m, k, n);
    for (int i = 0; i < m; ++i) {
        double* orow = out.data->data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) orow[j] += (*b.data)[j];
    }
    if (want_grad(x) || want_grad(w) || want_grad(b))
        attach_node(out, {x, w, b}, [m, k, n](Tensor& o) {
            Tensor& px = o.node->parents[0];
            Tensor& pw = o.node->parents[1];
            Tensor& pb = o.node->parents[2];
            if (px.requires_grad || px.node) {
                px.ensure_grad();
                kernels::matmul_nt(o.grad->data(), pw.data->data(), px.grad->data(), m, n, k, true);
            }
            if (pw.requires_grad || pw.node) {
                pw.ensure_grad();
                kernels::matmul_tn(px.data->data(), o.grad->data(), pw.grad->data(), k, m, n, true);
            }
            if (pb.requires_grad || pb.node) {
                pb.ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const double* grow = o.grad->data() + static_cast<size_t>(i) * n;
                    for (int j = 0; j < n; ++j) (*pb.grad)[j] += grow[j];
                }
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// gather / scatter / reshaping
// ---------------------------------------------------------------------------

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    if (table.ndim() != 2) throw DimensionError("embedding_rows: table must be 2-d");
    const int v = table.shape[0], d = table.shape[1];
    for (int id : ids)
        if (id < 0 || id >= v)
            throw DimensionError("embedding_rows: id " + std::to_string(id) + " out of range " +
                                 std::to_string(v));
    Tensor out = Tensor::zeros({static_cast<int>(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r)
        std::memcpy(out.data->data() + r * d, table.data->data() + static_cast<size_t>(ids[r]) * d,
                    sizeof(double) * d);
    if (want_grad(table))
        attach_node(out, {table}, [ids, d](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (size_t r = 0; r < ids.size(); ++r) {
                const double* grow = o.grad->data() + r * d;
                double* prow = p.grad->data() + static_cast<size_t>(ids[r]) * d;
                for (int j = 0; j < d; ++j) prow[j] += grow[j];
            }
        });
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no parts");
    const int d = parts[0].cols();
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != 2 || p.cols() != d) throw DimensionError("concat_rows: column mismatch");
        total += p.rows();
    }
    Tensor out = Tensor::zeros({total, d});
    int at = 0;
    bool any = false;
    std::vector<int> offsets;
    for (const Tensor& p : parts) {
        offsets.push_back(at);
        std::memcpy(out.data->data() + static_cast<size_t>(at) * d, p.data->data(),
                    sizeof(double) * p.data->size());
        at += p.rows();
        any = any || want_grad(p);
    }
    if (any)
        attach_node(out, parts, [offsets, d](Tensor& o) {
            for (size_t pi = 0; pi < o.node->parents.size(); ++pi) {
                Tensor& p = o.node->parents[pi];
                if (!p.requires_grad && !p.node) continue;
                p.ensure_grad();
                const double* gsrc = o.grad->data() + static_cast<size_t>(offsets[pi]) * d;
                for (size_t i = 0; i < p.grad->size(); ++i) (*p.grad)[i] += gsrc[i];
            }
        });
    return out;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
    if (a.ndim() != 2) throw DimensionError("slice_rows: tensor is not 2-d");
    if (begin < 0 || end > a.rows() || begin > end) throw DimensionError("slice_rows: bad range");
    const int d = a.cols();
    Tensor out = Tensor::zeros({end - begin, d});
    std::memcpy(out.data->data(), a.data->data() + static_cast<size_t>(begin) * d,
                sizeof(double) * out.data->size());
    if (want_grad(a))
        attach_node(out, {a}, [begin, d](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            double* pg = p.grad->data() + static_cast<size_t>(begin) * d;
            for (size_t i = 0; i < o.grad->size(); ++i) pg[i] += (*o.grad)[i];
        });
    return out;
}

Tensor slice_cols(const Tensor& a, int begin, int end) {
    if (a.ndim() != 2) throw DimensionError("slice_cols: tensor is not 2-d");
    if (begin < 0 || end > a.cols() || begin > end) throw DimensionError("slice_cols: bad range");
    const int m = a.rows(), d = a.cols(), w = end - begin;
    Tensor out = Tensor::zeros({m, w});
    for (int i = 0; i < m; ++i)
        std::memcpy(out.data->data() + static_cast<size_t>(i) * w,
                    a.data->data() + static_cast<size_t>(i) * d + begin, sizeof(double) * w);
    if (want_grad(a))
        attach_node(out, {a}, [m, d, w, begin](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double* grow = o.grad->data() + static_cast<size_t>(i) * w;
                double* prow = p.grad->data() + static_cast<size_t>(i) * d + begin;
                for (int j = 0; j < w; ++j) prow[j] += grow[j];
            }
        });
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no parts");
    const int m = parts[0].rows();
    int total = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != 2 || p.rows() != m) throw DimensionError("concat_cols: row mismatch");
        total += p.cols();
    }
    Tensor out = Tensor::zeros({m, total});
    int at = 0;
    bool any = false;
    std::vector<int> offsets;
    for (const Tensor& p : parts) {
        offsets.push_back(at);
        const int w = p.cols();
        for (int i = 0; i < m; ++i)
            std::memcpy(out.data->data() + static_cast<size_t>(i) * total + at,
                        p.data->data() + static_cast<size_t>(i) * w, sizeof(double) * w);
        at += w;
        any = any || want_grad(p);
    }
    if (any)
        attach_node(out, parts, [offsets, m, total](Tensor& o) {
            for (size_t pi = 0; pi < o.node->parents.size(); ++pi) {
                Tensor& p = o.node->parents[pi];
                if (!p.requires_grad && !p.node) continue;
                p.ensure_grad();
                const int w = p.cols();
                for (int i = 0; i < m; ++i) {
                    const double* grow = o.grad->data() + static_cast<size_t>(i) * total + offsets[pi];
                    double* prow = p.grad->data() + static_cast<size_t>(i) * w;
                    for (int j = 0; j < w; ++j) prow[j] += grow[j];
                }
            }
        });
    return out;
}

Tensor scatter_add_rows(const Tensor& base, const Tensor& rows, const std::vector<int>& positions) {
    if (base.ndim() != 2 || rows.ndim() != 2) throw DimensionError("scatter_add_rows: 2-d only");
    if (base.cols() != rows.cols()) throw DimensionError("scatter_add_rows: column mismatch");
    if (rows.rows() != static_cast<int>(positions.size()))
        throw DimensionError("scatter_add_rows: positions/rows mismatch");
    const int d = base.cols();
    for (int pos : positions)
        if (pos < 0 || pos >= base.rows()) throw DimensionError("scatter_add_rows: position out of range");
    Tensor out = Tensor::zeros(base.shape);
    std::memcpy(out.data->data(), base.data->data(), sizeof(double) * base.data->size());
    for (size_t r = 0; r < positions.size(); ++r) {
        const double* src = rows.data->data() + r * d;
        double* dst = out.data->data() + static_cast<size_t>(positions[r]) * d;
        for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
    if (want_grad(base) || want_grad(rows))
        attach_node(out, {base, rows}, [positions, d](Tensor& o) {
            Tensor& pb = o.node->parents[0];
            Tensor& pr = o.node->parents[1];
            if (pb.requires_grad || pb.node) {
                pb.ensure_grad();
                for (size_t i = 0; i < o.grad->size(); ++i) (*pb.grad)[i] += (*o.grad)[i];
            }
            if (pr.requires_grad || pr.node) {
                pr.ensure_grad();
                for (size_t r = 0; r < positions.size(); ++r) {
                    const double* gsrc = o.grad->data() + static_cast<size_t>(positions[r]) * d;
                    double* gdst = pr.grad->data() + r * d;
                    for (int j = 0; j < d; ++j) gdst[j] += gsrc[j];
                }
            }
        });
    return out;
}

Tensor sum_rows_to_vector(const Tensor& a) {
    if (a.ndim() != 2) throw DimensionError("sum_rows_to_vector: tensor is not 2-d");
    const int m = a.rows(), d = a.cols();
    Tensor out = Tensor::zeros({d});
    for (int i = 0; i < m; ++i) {
        const double* row = a.data->data() + static_cast<size_t>(i) * d;
        for (int j = 0; j < d; ++j) (*out.data)[j] += row[j];
    }
    if (want_grad(a))
        attach_node(out, {a}, [m, d](Tensor& o) {
            Tensor& p = o.node->parents[0];
            p.ensure_grad();
            for (int i = 0; i < m; ++i) {
                double* prow = p.grad->data() + static_cast<size_t>(i) * d;
                for (int j = 0; j < d; ++j) prow[j] += (*o.grad)[j];
            }
        });
    return out;
}

// ---------------------------------------------------------------------------
// backward engine
// ---------------------------------------------------------------------------

void backward(Tensor& loss) {
    if (loss.numel() != 1) throw DimensionError("backward: loss must be scalar");
    loss.ensure_grad();
    (*loss.grad)[0] = 1.0;
    if (!loss.node) return;

    // Iterative post-order over the node DAG; visit each node once.
    std::vector<Tensor> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Tensor, size_t>> stack;  // tensor, next-parent index
    stack.emplace_back(loss, 0);
    seen.insert(loss.node.get());
    while (!stack.empty()) {
        auto& [t, idx] = stack.back();
        if (idx < t.node->parents.size()) {
            Tensor& p = t.node->parents[idx++];
            if (p.node && !seen.count(p.node.get())) {
                seen.insert(p.node.get());
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(t);
            stack.pop_back();
        }
    }
    // order is post-order (parents before children); run reversed.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor& t = *it;
        t.ensure_grad();
        t.node->backward(t);
    }
}

// ---------------------------------------------------------------------------
// ParameterSet
// ---------------------------------------------------------------------------

Tensor& ParameterSet::at(const std::string& name) {
    auto it = values.find(name);
    if (it == values.end()) throw InputError("parameter not found: " + name);
    return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = values.find(name);
    if (it == values.end()) throw InputError("parameter not found: " + name);
    return it->second;
}

void ParameterSet::insert(const std::string& name, Tensor t, bool is_trainable) {
    if (values.count(name)) throw InputError("duplicate parameter: " + name);
    t.requires_grad = is_trainable;
    if (is_trainable) t.ensure_grad();
    values.emplace(name, std::move(t));
    if (is_trainable) trainable.insert(name);
}

void ParameterSet::set_trainable_prefixes(const std::vector<std::string>& prefixes) {
    trainable.clear();
    for (auto& [name, t] : values) {
        bool on = false;
        for (const std::string& p : prefixes)
            if (name.rfind(p, 0) == 0) { on = true; break; }
        t.requires_grad = on;
        if (on) {
            t.ensure_grad();
            trainable.insert(name);
        }
    }
}

void ParameterSet::zero_grads() {
    for (auto& [name, t] : values) t.zero_grad();
}

int64_t ParameterSet::total_scalars() const {
    int64_t n = 0;
    for (const auto& [name, t] : values) n += t.numel();
    return n;
}

// ---------------------------------------------------------------------------
// finite-difference gradient checking
// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(ParameterSet&)>& f, ParameterSet& params, double step,
                  int max_per_tensor, uint64_t seed) {
    params.zero_grads();
    Tensor loss = f(params);
    backward(loss);

    double worst = 0.0;
    int tensor_idx = 0;
    for (const std::string& name : params.trainable) {
        Tensor& t = params.at(name);
        t.ensure_grad();
        const int64_t n = t.numel();
        std::vector<int64_t> picks;
        if (max_per_tensor <= 0 || n <= max_per_tensor) {
            picks.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) picks[static_cast<size_t>(i)] = i;
        } else {
            Rng rng(hash_combine(seed, static_cast<uint64_t>(tensor_idx) + 0x9e37));
            std::set<int64_t> chosen;
            while (static_cast<int>(chosen.size()) < max_per_tensor)
                chosen.insert(static_cast<int64_t>(rng.below(static_cast<uint64_t>(n))));
            picks.assign(chosen.begin(), chosen.end());
        }
        for (int64_t i : picks) {
            const double orig = (*t.data)[static_cast<size_t>(i)];
            double lo, hi;
            {
                NoGradGuard ng;
                (*t.data)[static_cast<size_t>(i)] = orig + step;
                hi = f(params).item();
                (*t.data)[static_cast<size_t>(i)] = orig - step;
                lo = f(params).item();
                (*t.data)[static_cast<size_t>(i)] = orig;
            }
            const double fd = (hi - lo) / (2.0 * step);
            const double ad = (*t.grad)[static_cast<size_t>(i)];
            const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1.0});
            worst = std::max(worst, rel);
        }
        ++tensor_idx;
    }
    return worst;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

namespace {

// Payload bytes are little-endian f64. On a big-endian host we'd need a swap;
// all supported targets are little-endian, so verify once at startup.
void require_little_endian() {
    const uint32_t probe = 1;
    if (*reinterpret_cast<const uint8_t*>(&probe) != 1)
        throw NumericError("checkpoint format requires a little-endian host");
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::string& prefix) {
    require_little_endian();
    std::ofstream manifest(prefix + ".manifest");
    if (!manifest) throw IoError("cannot write " + prefix + ".manifest");
    std::ofstream blob(prefix + ".bin", std::ios::binary);
    if (!blob) throw IoError("cannot write " + prefix + ".bin");
    int64_t offset = 0;
    for (const auto& [name, t] : params.values) {
        manifest << name << " " << t.ndim();
        for (int d : t.shape) manifest << " " << d;
        manifest << " " << offset << " " << (params.trainable.count(name) ? 1 : 0) << "\n";
        blob.write(reinterpret_cast<const char*>(t.data->data()),
                   static_cast<std::streamsize>(sizeof(double) * t.data->size()));
        offset += t.numel();
    }
    if (!manifest.good() || !blob.good()) throw IoError("checkpoint write failed: " + prefix);
}

ParameterSet load_checkpoint(const std::string& prefix) {
    require_little_endian();
    std::ifstream manifest(prefix + ".manifest");
    if (!manifest) throw IoError("cannot read " + prefix + ".manifest");
    std::ifstream blob(prefix + ".bin", std::ios::binary);
    if (!blob) throw IoError("cannot read " + prefix + ".bin");

    ParameterSet params;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string name;
        int ndim = 0;
        if (!(ss >> name >> ndim) || ndim < 0)
            throw IoError("malformed checkpoint manifest line: " + line);
        std::vector<int> shape(static_cast<size_t>(ndim));
        for (int& d : shape)
            if (!(ss >> d)) throw IoError("malformed checkpoint manifest line: " + line);
        int64_t offset = 0;
        int trainable = 0;
        if (!(ss >> offset >> trainable))
            throw IoError("malformed checkpoint manifest line: " + line);
        Tensor t = Tensor::zeros(shape);
        blob.seekg(static_cast<std::streamoff>(offset * static_cast<int64_t>(sizeof(double))));
        blob.read(reinterpret_cast<char*>(t.data->data()),
                  static_cast<std::streamsize>(sizeof(double) * t.data->size()));
        if (blob.gcount() != static_cast<std::streamsize>(sizeof(double) * t.data->size()))
            throw IoError("checkpoint payload truncated for " + name);
        params.insert(name, std::move(t), trainable != 0);
    }
    return params;
}

}  // namespace anyprot
