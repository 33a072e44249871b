#pragma once

#include <string>
#include <vector>

#include "anyprot/config.hpp"
#include "anyprot/geometry.hpp"
#include "anyprot/tensor.hpp"

namespace anyprot {

// Frozen stand-in encoders: a small bidirectional transformer over residues
// ("encoder.seq.*") and a distance-only message-passing net over CA graphs
// ("encoder.struct.*"). Randomly initialized, never updated by the training
// stages; an optional masked-reconstruction warm-up can run before freezing.

int residue_index(char aa);  // position in the residue alphabet, InputError otherwise

void init_encoder_params(ParameterSet& ps, const ModelConfig& cfg, Rng& rng);

// n_r x d_enc_seq; deterministic given parameters
Tensor encode_sequence(const ParameterSet& ps, const ModelConfig& cfg, const std::string& aa);

// n_r x d_enc_struct; exactly invariant under rigid motion of the input
Tensor encode_structure(const ParameterSet& ps, const ModelConfig& cfg, const Backbone& b);

// Masked residue reconstruction on the sequence encoder (plain SGD, tied
// output head). Returns {initial loss, final loss} averaged over a window.
std::pair<double, double> prewarm_sequence_encoder(ParameterSet& ps, const ModelConfig& cfg,
                                                   const std::vector<std::string>& sequences,
                                                   int steps, double lr, Rng& rng);

}  // namespace anyprot
