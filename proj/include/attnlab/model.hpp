#pragma once

#include "attnlab/attention.hpp"
#include "attnlab/diagnostics.hpp"
#include "attnlab/weights.hpp"

#include <string>
#include <utility>
#include <vector>

namespace attnlab {

// Pre-norm decoder block: x + Attn(LN(x)), then x + FFN(LN(x)) with a
// two-layer ReLU feed-forward.
struct BlockWeights {
    LayerWeights attn;
    Tensor ln1_gamma, ln1_beta;
    Tensor ln2_gamma, ln2_beta;
    Tensor ffn_w1, ffn_b1; // d_model x d_ff
    Tensor ffn_w2, ffn_b2; // d_ff x d_model

    static BlockWeights init(const ModelConfig& cfg, Rng& rng) {
        BlockWeights b;
        b.attn = LayerWeights::init(cfg, rng);
        b.ln1_gamma = Tensor(1, cfg.d_model, true);
        b.ln1_beta = Tensor(1, cfg.d_model, true);
        b.ln2_gamma = Tensor(1, cfg.d_model, true);
        b.ln2_beta = Tensor(1, cfg.d_model, true);
        for (double& v : b.ln1_gamma.data()) v = 1.0;
        for (double& v : b.ln2_gamma.data()) v = 1.0;
        b.ffn_w1 = init_matrix(cfg.d_model, cfg.d_ff, rng);
        b.ffn_b1 = Tensor(1, cfg.d_ff, true);
        b.ffn_w2 = init_matrix(cfg.d_ff, cfg.d_model, rng);
        b.ffn_b2 = Tensor(1, cfg.d_model, true);
        return b;
    }

    std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix) const {
        auto out = attn.named_params(prefix + ".attn");
        out.emplace_back(prefix + ".ln1_gamma", ln1_gamma);
        out.emplace_back(prefix + ".ln1_beta", ln1_beta);
        out.emplace_back(prefix + ".ln2_gamma", ln2_gamma);
        out.emplace_back(prefix + ".ln2_beta", ln2_beta);
        out.emplace_back(prefix + ".ffn_w1", ffn_w1);
        out.emplace_back(prefix + ".ffn_b1", ffn_b1);
        out.emplace_back(prefix + ".ffn_w2", ffn_w2);
        out.emplace_back(prefix + ".ffn_b2", ffn_b2);
        return out;
    }
};

// Inside the stack, sinusoidal PE is added once at the embedding, so the
// per-layer attention must not re-apply it; AGF stays per layer.
inline ModelConfig layer_view(const ModelConfig& cfg) {
    ModelConfig layer = cfg;
    if (layer.pos.kind == PosKind::Sinusoidal) layer.pos = PosScheme::none();
    return layer;
}

inline Tensor block_forward(Graph& g, const Tensor& x, const BlockWeights& b, const ModelConfig& cfg,
                            std::vector<Tensor>* attn_weights = nullptr) {
    AttentionOutput att = attention_forward(g, g.layer_norm_rows(x, b.ln1_gamma, b.ln1_beta),
                                            g.layer_norm_rows(x, b.ln1_gamma, b.ln1_beta), b.attn, cfg);
    if (attn_weights) *attn_weights = att.weights;
    Tensor x1 = g.add(x, att.out);
    Tensor h = g.relu(g.add(g.matmul(g.layer_norm_rows(x1, b.ln2_gamma, b.ln2_beta), b.ffn_w1), b.ffn_b1));
    Tensor ffn = g.add(g.matmul(h, b.ffn_w2), b.ffn_b2);
    return g.add(x1, ffn);
}

struct ModelWeights {
    Tensor embedding; // vocab x d_model
    std::vector<BlockWeights> blocks;
    Tensor lnf_gamma, lnf_beta;
    Tensor w_out; // d_model x vocab

    static ModelWeights init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        Rng rng(Rng::splitmix64(seed ^ 0xa77e17ull));
        ModelWeights m;
        m.embedding = init_matrix(cfg.vocab, cfg.d_model, rng);
        for (int l = 0; l < cfg.n_layers; ++l) m.blocks.push_back(BlockWeights::init(cfg, rng));
        m.lnf_gamma = Tensor(1, cfg.d_model, true);
        m.lnf_beta = Tensor(1, cfg.d_model, true);
        for (double& v : m.lnf_gamma.data()) v = 1.0;
        m.w_out = init_matrix(cfg.d_model, cfg.vocab, rng);
        return m;
    }

    std::vector<std::pair<std::string, Tensor>> named_params() const {
        std::vector<std::pair<std::string, Tensor>> out;
        out.emplace_back("embedding", embedding);
        for (size_t l = 0; l < blocks.size(); ++l) {
            auto bp = blocks[l].named_params("blocks." + std::to_string(l));
            out.insert(out.end(), bp.begin(), bp.end());
        }
        out.emplace_back("lnf_gamma", lnf_gamma);
        out.emplace_back("lnf_beta", lnf_beta);
        out.emplace_back("w_out", w_out);
        return out;
    }

    long param_count() const {
        long n = 0;
        for (const auto& [name, t] : named_params()) n += t.size();
        return n;
    }
};

struct ModelForward {
    Tensor logits;                                 // T x vocab
    std::vector<std::vector<Tensor>> attn_weights; // [layer][head], filled on request
};

inline ModelForward model_forward(Graph& g, const std::vector<int>& tokens, const ModelWeights& m,
                                  const ModelConfig& cfg, bool collect_weights = false) {
    Tensor x = g.take_rows(m.embedding, tokens);
    if (cfg.pos.kind == PosKind::Sinusoidal) x = g.add(x, sinusoidal_pe(static_cast<int>(tokens.size()), cfg.d_model));
    const ModelConfig layer_cfg = layer_view(cfg);
    ModelForward out;
    for (const BlockWeights& b : m.blocks) {
        std::vector<Tensor> weights;
        x = block_forward(g, x, b, layer_cfg, collect_weights ? &weights : nullptr);
        if (collect_weights) out.attn_weights.push_back(std::move(weights));
    }
    out.logits = g.matmul(g.layer_norm_rows(x, m.lnf_gamma, m.lnf_beta), m.w_out);
    return out;
}

// Gradient check of one decoder block against a fixed random contraction.
inline GradCheckReport gradcheck_block(const ModelConfig& cfg, int seq_len, uint64_t seed, double eps = 1e-5,
                                       double threshold = 1e-4) {
    cfg.validate();
    Rng rng(Rng::splitmix64(seed ^ 0xb10cull));
    Rng wrng = rng.fork(1), xrng = rng.fork(2), rrng = rng.fork(3);
    BlockWeights b = BlockWeights::init(cfg, wrng);
    Tensor x = init_matrix(seq_len, cfg.d_model, xrng, true);
    Tensor probe = init_matrix(seq_len, cfg.d_model, rrng, false);
    auto loss_fn = [b, x, probe, cfg](Graph& g) { return g.sum(g.mul(block_forward(g, x, b, cfg), probe)); };
    auto params = b.named_params("block");
    params.emplace_back("x", x);
    return gradcheck(loss_fn, params, eps, threshold, seed);
}

} // namespace attnlab
