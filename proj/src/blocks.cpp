#include "anyprot/blocks.hpp"

#include <cmath>
#include <vector>

namespace anyprot {

void init_linear(ParameterSet& ps, const std::string& prefix, int d_in, int d_out, Rng& rng) {
    if (d_in <= 0 || d_out <= 0) throw InputError("linear dims must be positive: " + prefix);
    Tensor w = Tensor::zeros({d_in, d_out}, true);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (int64_t i = 0; i < w.numel(); ++i) w.mut(static_cast<int>(i)) = scale * rng.gauss();
    ps.insert(prefix + ".w", w, true);
    ps.insert(prefix + ".b", Tensor::zeros({d_out}, true), true);
}

Tensor linear_at(const ParameterSet& ps, const std::string& prefix, const Tensor& x) {
    return linear(x, ps.at(prefix + ".w"), ps.at(prefix + ".b"));
}

void init_layer_norm(ParameterSet& ps, const std::string& prefix, int d) {
    Tensor g = Tensor::full({d}, 1.0, true);
    ps.insert(prefix + ".g", g, true);
    ps.insert(prefix + ".b", Tensor::zeros({d}, true), true);
}

Tensor layer_norm_at(const ParameterSet& ps, const std::string& prefix, const Tensor& x) {
    return layer_norm(x, ps.at(prefix + ".g"), ps.at(prefix + ".b"));
}

void init_table(ParameterSet& ps, const std::string& name, int rows, int cols, Rng& rng,
                double scale) {
    Tensor t = Tensor::zeros({rows, cols}, true);
    for (int64_t i = 0; i < t.numel(); ++i) t.mut(static_cast<int>(i)) = scale * rng.gauss();
    ps.insert(name, t, true);
}

Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                           bool causal) {
    if (q.shape.size() != 2 || k.shape.size() != 2 || v.shape.size() != 2)
        throw DimensionError("attention expects 2-d q/k/v");
    const int d = static_cast<int>(q.shape[1]);
    if (n_heads <= 0 || d % n_heads != 0)
        throw DimensionError("width " + std::to_string(d) + " not divisible into " +
                             std::to_string(n_heads) + " heads");
    if (n_heads == 1) return attention(q, k, v, causal);
    const int dh = d / n_heads;
    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
        int lo = h * dh, hi = (h + 1) * dh;
        heads.push_back(
            attention(slice_cols(q, lo, hi), slice_cols(k, lo, hi), slice_cols(v, lo, hi), causal));
    }
    return concat_cols(heads);
}

void init_transformer_block(ParameterSet& ps, const std::string& prefix, int d, int d_mlp,
                            Rng& rng) {
    init_layer_norm(ps, prefix + ".ln1", d);
    init_linear(ps, prefix + ".attn.wq", d, d, rng);
    init_linear(ps, prefix + ".attn.wk", d, d, rng);
    init_linear(ps, prefix + ".attn.wv", d, d, rng);
    init_linear(ps, prefix + ".attn.wo", d, d, rng);
    init_layer_norm(ps, prefix + ".ln2", d);
    init_linear(ps, prefix + ".mlp.w1", d, d_mlp, rng);
    init_linear(ps, prefix + ".mlp.w2", d_mlp, d, rng);
}

Tensor transformer_block(const ParameterSet& ps, const std::string& prefix, const Tensor& x,
                         int n_heads, bool causal) {
    Tensor a = layer_norm_at(ps, prefix + ".ln1", x);
    Tensor o = multihead_attention(linear_at(ps, prefix + ".attn.wq", a),
                                   linear_at(ps, prefix + ".attn.wk", a),
                                   linear_at(ps, prefix + ".attn.wv", a), n_heads, causal);
    Tensor h = add(x, linear_at(ps, prefix + ".attn.wo", o));
    Tensor m = layer_norm_at(ps, prefix + ".ln2", h);
    return add(h, linear_at(ps, prefix + ".mlp.w2", gelu(linear_at(ps, prefix + ".mlp.w1", m))));
}

Tensor sinusoidal_positions(int n, int d) {
    if (n <= 0 || d <= 0 || d % 2 != 0)
        throw DimensionError("sinusoidal positions need n > 0 and even d");
    Tensor t = Tensor::zeros({n, d}, false);
    for (int p = 0; p < n; ++p)
        for (int i = 0; i < d / 2; ++i) {
            double rate = std::pow(10000.0, -2.0 * i / static_cast<double>(d));
            t.mut(p, 2 * i) = std::sin(p * rate);
            t.mut(p, 2 * i + 1) = std::cos(p * rate);
        }
    return t;
}

}  // namespace anyprot
