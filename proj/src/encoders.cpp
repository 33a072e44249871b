#include "anyprot/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>

#include "anyprot/blocks.hpp"
#include "anyprot/losses.hpp"
#include "anyprot/tokenizer.hpp"

namespace anyprot {

int residue_index(char aa) {
    const char* p = std::strchr(kResidueAlphabet, aa);
    if (aa == '\0' || p == nullptr)
        throw InputError(std::string("unknown residue letter '") + aa + "'");
    return static_cast<int>(p - kResidueAlphabet);
}

void init_encoder_params(ParameterSet& ps, const ModelConfig& cfg, Rng& rng) {
    init_table(ps, "encoder.seq.tok", 20, cfg.d_enc_seq, rng,
               1.0 / std::sqrt(static_cast<double>(cfg.d_enc_seq)));
    for (int l = 0; l < cfg.enc_layers; ++l)
        init_transformer_block(ps, "encoder.seq.block" + std::to_string(l), cfg.d_enc_seq,
                               4 * cfg.d_enc_seq, rng);

    init_table(ps, "encoder.struct.init", 1, cfg.d_enc_struct, rng,
               1.0 / std::sqrt(static_cast<double>(cfg.d_enc_struct)));
    for (int r = 0; r < cfg.struct_rounds; ++r) {
        std::string p = "encoder.struct.round" + std::to_string(r);
        init_linear(ps, p + ".msg1", cfg.d_enc_struct + cfg.n_rbf, cfg.d_enc_struct, rng);
        init_linear(ps, p + ".msg2", cfg.d_enc_struct, cfg.d_enc_struct, rng);
        init_layer_norm(ps, p + ".ln", cfg.d_enc_struct);
    }
}

Tensor encode_sequence(const ParameterSet& ps, const ModelConfig& cfg, const std::string& aa) {
    if (aa.empty()) throw InputError("cannot encode an empty sequence");
    if (static_cast<int>(aa.size()) > cfg.max_positions)
        throw InputError("sequence length " + std::to_string(aa.size()) + " exceeds limit " +
                         std::to_string(cfg.max_positions));
    std::vector<int> ids;
    ids.reserve(aa.size());
    for (char c : aa) ids.push_back(residue_index(c));
    Tensor x = add(embedding_rows(ps.at("encoder.seq.tok"), ids),
                   sinusoidal_positions(static_cast<int>(ids.size()), cfg.d_enc_seq));
    for (int l = 0; l < cfg.enc_layers; ++l)
        x = transformer_block(ps, "encoder.seq.block" + std::to_string(l), x, cfg.enc_heads,
                              /*causal=*/false);
    return x;
}

namespace {

// k nearest CA neighbors of every residue, ties broken by index
std::vector<std::vector<int>> knn_by_ca(const Backbone& b, int k) {
    const int n = static_cast<int>(b.residues.size());
    std::vector<std::vector<int>> out(static_cast<size_t>(n));
    std::vector<std::pair<double, int>> cand(static_cast<size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        cand.clear();
        for (int j = 0; j < n; ++j)
            if (j != i)
                cand.push_back({(b.residues[static_cast<size_t>(i)].ca -
                                 b.residues[static_cast<size_t>(j)].ca)
                                    .norm(),
                                j});
        std::sort(cand.begin(), cand.end());
        for (int e = 0; e < k; ++e) out[static_cast<size_t>(i)].push_back(cand[static_cast<size_t>(e)].second);
    }
    return out;
}

}  // namespace

Tensor encode_structure(const ParameterSet& ps, const ModelConfig& cfg, const Backbone& b) {
    validate_backbone(b);
    const int n = static_cast<int>(b.residues.size());
    const int k = std::min(8, n - 1);

    auto nbrs = knn_by_ca(b, k);

    // radial-basis features of each edge's CA distance, plain data
    const int nb = cfg.n_rbf;
    const double sigma = cfg.rbf_rmax / nb;
    Tensor rbf = Tensor::zeros({n * k, nb}, false);
    std::vector<int> src(static_cast<size_t>(n) * static_cast<size_t>(k));
    for (int i = 0; i < n; ++i)
        for (int e = 0; e < k; ++e) {
            int j = nbrs[static_cast<size_t>(i)][static_cast<size_t>(e)];
            int row = i * k + e;
            src[static_cast<size_t>(row)] = j;
            double d = (b.residues[static_cast<size_t>(i)].ca - b.residues[static_cast<size_t>(j)].ca).norm();
            for (int c = 0; c < nb; ++c) {
                double center = cfg.rbf_rmax * (c + 0.5) / nb;
                rbf.mut(row, c) = std::exp(-(d - center) * (d - center) / (2.0 * sigma * sigma));
            }
        }

    // mean-aggregation matrix: h_i gets the average of its k edge messages
    Tensor agg = Tensor::zeros({n, n * k}, false);
    for (int i = 0; i < n; ++i)
        for (int e = 0; e < k; ++e) agg.mut(i, i * k + e) = 1.0 / k;

    std::vector<int> all_init(static_cast<size_t>(n), 0);
    Tensor h = embedding_rows(ps.at("encoder.struct.init"), all_init);
    for (int r = 0; r < cfg.struct_rounds; ++r) {
        std::string p = "encoder.struct.round" + std::to_string(r);
        Tensor feat = concat_cols({embedding_rows(h, src), rbf});
        Tensor msg = linear_at(ps, p + ".msg2", gelu(linear_at(ps, p + ".msg1", feat)));
        h = layer_norm_at(ps, p + ".ln", add(h, matmul(agg, msg)));
    }
    return h;
}

std::pair<double, double> prewarm_sequence_encoder(ParameterSet& ps, const ModelConfig& cfg,
                                                   const std::vector<std::string>& sequences,
                                                   int steps, double lr, Rng& rng) {
    if (sequences.empty()) throw InputError("pre-warm needs at least one sequence");
    if (steps <= 0) throw InputError("pre-warm needs a positive step count");
    for (auto& [name, t] : ps.values)
        if (name.rfind("encoder.seq.", 0) == 0) t.requires_grad = true;

    std::deque<double> window;
    double first = 0.0;
    for (int step = 0; step < steps; ++step) {
        const std::string& aa = sequences[rng.below(sequences.size())];
        const int n = static_cast<int>(aa.size());
        std::vector<int> ids(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = residue_index(aa[static_cast<size_t>(i)]);

        // choose ~15% of positions, at least one, to blank and reconstruct
        int m = std::max(1, n * 15 / 100);
        std::vector<int> pos(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) pos[static_cast<size_t>(i)] = i;
        for (int i = 0; i < m; ++i)
            std::swap(pos[static_cast<size_t>(i)],
                      pos[static_cast<size_t>(i) + rng.below(static_cast<uint64_t>(n - i))]);
        std::vector<int> masked(pos.begin(), pos.begin() + m);
        std::sort(masked.begin(), masked.end());

        Tensor blank = Tensor::full({n, cfg.d_enc_seq}, 1.0, false);
        for (int i : masked)
            for (int c = 0; c < cfg.d_enc_seq; ++c) blank.mut(i, c) = 0.0;

        const Tensor& tok = ps.at("encoder.seq.tok");
        Tensor x = add(mul(embedding_rows(tok, ids), blank), sinusoidal_positions(n, cfg.d_enc_seq));
        for (int l = 0; l < cfg.enc_layers; ++l)
            x = transformer_block(ps, "encoder.seq.block" + std::to_string(l), x, cfg.enc_heads,
                                  false);
        Tensor logits = matmul(embedding_rows(x, masked), transpose(tok));  // tied head
        std::vector<int> targets;
        for (int i : masked) targets.push_back(ids[static_cast<size_t>(i)]);
        Tensor loss = nll_loss(logits, targets, 0);
        double v = loss.item() / m;
        if (step == 0) first = v;
        window.push_back(v);
        if (window.size() > 20) window.pop_front();

        backward(loss);
        for (auto& [name, t] : ps.values) {
            if (name.rfind("encoder.seq.", 0) != 0) continue;
            for (int64_t i = 0; i < t.numel(); ++i)
                t.mut(static_cast<int>(i)) -= lr * (*t.grad)[static_cast<size_t>(i)] / m;
            t.zero_grad();
        }
    }
    double tail = 0.0;
    for (double v : window) tail += v;
    return {first, tail / static_cast<double>(window.size())};
}

}  // namespace anyprot
