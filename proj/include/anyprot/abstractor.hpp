#pragma once

#include <string>

#include "anyprot/config.hpp"
#include "anyprot/tensor.hpp"

namespace anyprot {

// Cross-attention resampler: condenses a variable-length encoder output
// (n_r x d_enc) into a fixed set of n_abs tokens in the LM width d_h.
// Queries come from learnable tokens, keys/values from the encoder rows; the
// running state accumulates through residual adds from a zero start. One
// instance per conditioning modality ("abstractor.seq.*", "abstractor.struct.*").

void init_abstractor_params(ParameterSet& ps, const std::string& which, int d_enc,
                            const ModelConfig& cfg, Rng& rng);

Tensor abstract(const ParameterSet& ps, const std::string& which, const ModelConfig& cfg,
                const Tensor& f_enc);

}  // namespace anyprot
