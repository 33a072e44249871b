#include "anyprot/abstractor.hpp"

#include <cmath>

#include "anyprot/blocks.hpp"

namespace anyprot {

void init_abstractor_params(ParameterSet& ps, const std::string& which, int d_enc,
                            const ModelConfig& cfg, Rng& rng) {
    const std::string base = "abstractor." + which;
    init_table(ps, base + ".t_abs", cfg.n_abs, d_enc, rng,
               1.0 / std::sqrt(static_cast<double>(d_enc)));
    for (int l = 0; l < cfg.abs_layers; ++l) {
        const std::string p = base + ".layer" + std::to_string(l);
        init_linear(ps, p + ".q", d_enc, cfg.d_h_abs, rng);
        init_layer_norm(ps, p + ".q_ln", cfg.d_h_abs);
        init_linear(ps, p + ".k", d_enc, cfg.d_h_abs, rng);
        init_layer_norm(ps, p + ".k_ln", cfg.d_h_abs);
        init_linear(ps, p + ".v", d_enc, cfg.d_h_abs, rng);
        init_layer_norm(ps, p + ".v_ln", cfg.d_h_abs);
        init_linear(ps, p + ".out", cfg.d_h_abs, cfg.d_h_abs, rng);
        init_layer_norm(ps, p + ".mlp_ln", cfg.d_h_abs);
        init_linear(ps, p + ".mlp.w1", cfg.d_h_abs, 4 * cfg.d_h_abs, rng);
        init_linear(ps, p + ".mlp.w2", 4 * cfg.d_h_abs, cfg.d_h_abs, rng);
    }
    init_linear(ps, base + ".final", cfg.d_h_abs, cfg.d_h, rng);
}

Tensor abstract(const ParameterSet& ps, const std::string& which, const ModelConfig& cfg,
                const Tensor& f_enc) {
    const std::string base = "abstractor." + which;
    const Tensor& t_abs = ps.at(base + ".t_abs");
    if (f_enc.shape.size() != 2)
        throw DimensionError("abstractor input must be a 2-d matrix");
    if (f_enc.shape[0] < 1) throw DimensionError("abstractor input needs at least one row");
    if (f_enc.shape[1] != t_abs.shape[1])
        throw DimensionError("abstractor '" + which + "' expects encoder width " +
                             std::to_string(t_abs.shape[1]) + ", got " +
                             std::to_string(f_enc.shape[1]));
    for (int64_t i = 0; i < f_enc.numel(); ++i)
        if (!std::isfinite(f_enc.at(static_cast<int>(i))))
            throw NumericError("abstractor input has a non-finite value");

    // residual accumulator starts at zero, so layer 0 contributes Linear(O)
    Tensor f_abs = Tensor::zeros({cfg.n_abs, cfg.d_h_abs}, false);
    for (int l = 0; l < cfg.abs_layers; ++l) {
        const std::string p = base + ".layer" + std::to_string(l);
        // queries always come from the constant learnable tokens
        Tensor q = layer_norm_at(ps, p + ".q_ln", linear_at(ps, p + ".q", t_abs));
        Tensor k = layer_norm_at(ps, p + ".k_ln", linear_at(ps, p + ".k", f_enc));
        Tensor v = layer_norm_at(ps, p + ".v_ln", linear_at(ps, p + ".v", f_enc));
        Tensor o = attention(q, k, v, /*causal=*/false);
        f_abs = add(f_abs, linear_at(ps, p + ".out", o));
        Tensor m = layer_norm_at(ps, p + ".mlp_ln", f_abs);
        f_abs = add(f_abs, linear_at(ps, p + ".mlp.w2", gelu(linear_at(ps, p + ".mlp.w1", m))));
    }
    return linear_at(ps, base + ".final", f_abs);
}

}  // namespace anyprot
