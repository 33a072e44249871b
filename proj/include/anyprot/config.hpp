#pragma once

namespace anyprot {

// Architecture hyperparameters. Defaults are the desk-scale configuration;
// every knob is overridable from the run config file.
struct ModelConfig {
    int vocab_size = 0;  // filled in from the vocabulary

    // language model trunk
    int d_h = 128;
    int n_layers = 4;
    int n_heads = 4;
    int max_positions = 256;

    // modality abstractors
    int n_abs = 64;
    int d_h_abs = 32;
    int abs_layers = 2;

    // angle embedding for structure tokens
    int n_bins = 64;
    int d_b = 128;
    bool paper_literal_lerp = false;   // keep the as-published interpolation weights
    bool mean_pool_angle_embed = false;  // mean instead of sum over the six slots

    // frozen stand-in encoders
    int d_enc_seq = 384;
    int enc_layers = 2;
    int enc_heads = 4;
    int d_enc_struct = 128;
    int n_rbf = 8;
    double rbf_rmax = 16.0;
    int struct_rounds = 2;
    int prewarm_steps = 0;  // optional masked-reconstruction warm-up before freezing

    // angle head: outputs live in [-(pi+eps_range), pi+eps_range]
    double eps_range = 0.1;
};

}  // namespace anyprot
