#pragma once

#include <string>

#include "anyprot/common.hpp"
#include "anyprot/tensor.hpp"

namespace anyprot {

// Parameter factories + forwards for the building blocks shared by the
// language model trunk and the stand-in encoders. Names are hierarchical
// ("<prefix>.w", "<prefix>.attn.wq", ...) so stage freezing can match on
// prefixes.

void init_linear(ParameterSet& ps, const std::string& prefix, int d_in, int d_out, Rng& rng);
Tensor linear_at(const ParameterSet& ps, const std::string& prefix, const Tensor& x);

void init_layer_norm(ParameterSet& ps, const std::string& prefix, int d);
Tensor layer_norm_at(const ParameterSet& ps, const std::string& prefix, const Tensor& x);

// rows ~ N(0, scale^2)
void init_table(ParameterSet& ps, const std::string& name, int rows, int cols, Rng& rng,
                double scale);

// q/k/v split into n_heads column groups, attended separately, reconcatenated.
Tensor multihead_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                           bool causal);

// Pre-norm transformer block: x += Wo*MHA(LN1(x)); x += MLP(LN2(x)).
// Creates "<prefix>.ln1|attn.wq..wo|ln2|mlp.w1..b2".
void init_transformer_block(ParameterSet& ps, const std::string& prefix, int d, int d_mlp,
                            Rng& rng);
Tensor transformer_block(const ParameterSet& ps, const std::string& prefix, const Tensor& x,
                         int n_heads, bool causal);

// Fixed sin/cos position features, (n x d), never trained.
Tensor sinusoidal_positions(int n, int d);

}  // namespace anyprot
