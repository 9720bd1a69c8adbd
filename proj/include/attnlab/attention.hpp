#pragma once

#include "attnlab/config.hpp"
#include "attnlab/positional.hpp"
#include "attnlab/tensor.hpp"
#include "attnlab/weights.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attnlab {

// Per-token tensors a decoder would have to keep for this variant.
struct CacheComponent {
    std::string name;
    long elems_per_token = 0;
};

inline std::vector<CacheComponent> cacheable_components(const ModelConfig& cfg) {
    const long h = cfg.heads, g = cfg.groups();
    switch (cfg.variant.kind) {
        case VariantKind::Qkv: return {{"K", h * cfg.d_k}, {"V", h * cfg.d_v}};
        case VariantKind::Mqa:
        case VariantKind::Gqa: return {{"K", g * cfg.d_k}, {"V", g * cfg.d_v}};
        case VariantKind::Qv: return {{"V", h * cfg.d_v}};
        case VariantKind::Qvvv: return {{"V", g * cfg.d_v}};
        case VariantKind::VsharedUniqueK: return {{"K", h * cfg.d_k}, {"V", g * cfg.d_v}};
        case VariantKind::MlaLite: return {{"latent", cfg.variant.d_latent}};
        case VariantKind::QvKa: return {{"V", h * cfg.d_v}, {"ctx", cfg.variant.d_ctx}};
    }
    return {};
}

struct AttentionOutput {
    Tensor out;                            // Tq x d_model
    std::vector<Tensor> weights;           // per head, Tq x Tkv, rows sum to 1
    std::vector<CacheComponent> cacheables;
};

// Shared scaled-dot-product kernel. All variants differ only in how k and v
// are constructed before this call. pos_coeff multiplies the logits inside
// the softmax; with pcm_v it additionally weights each value term.
inline std::pair<Tensor, Tensor> core_attention(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v,
                                                bool causal, const Tensor* pos_coeff, bool pcm_v) {
    if (q.cols() != k.cols())
        throw std::invalid_argument("core_attention: q and k widths disagree (" + shape_str(q.shape()) + " vs " + shape_str(k.shape()) + ")");
    if (k.rows() != v.rows())
        throw std::invalid_argument("core_attention: k and v sequence lengths disagree");
    if (pcm_v && pos_coeff == nullptr)
        throw std::invalid_argument("core_attention: pcm_v needs a position coefficient matrix");
    const int tq = q.rows(), tkv = k.rows();
    if (pos_coeff && (pos_coeff->rows() != tq || pos_coeff->cols() != tkv))
        throw std::invalid_argument("core_attention: pos_coeff shape " + shape_str(pos_coeff->shape()) +
                                    " does not match scores " + std::to_string(tq) + "x" + std::to_string(tkv));
    if (causal && tq != tkv)
        throw std::invalid_argument("core_attention: causal masking requires equal q/kv lengths");

    Tensor scores = g.scale(g.matmul(q, g.transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
    if (pos_coeff) scores = g.mul(scores, *pos_coeff);
    Tensor weights;
    if (causal) {
        Mask m = Mask::causal(tq);
        weights = g.softmax_rows(scores, &m);
    } else {
        weights = g.softmax_rows(scores);
    }
    Tensor value_weights = pcm_v ? g.mul(weights, *pos_coeff) : weights;
    return {g.matmul(value_weights, v), weights};
}

namespace detail {

// Per-head q/k/v streams for one layer; k and v entries may alias one
// tensor across a group.
struct HeadStreams {
    std::vector<Tensor> q, k, v;
};

inline HeadStreams build_streams(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w,
                                 const ModelConfig& cfg) {
    const int h = cfg.heads, ng = cfg.groups();
    HeadStreams s;
    for (int i = 0; i < h; ++i) s.q.push_back(g.matmul(x_q, w.wq.at(i)));

    switch (cfg.variant.kind) {
        case VariantKind::Qkv:
            for (int i = 0; i < h; ++i) {
                s.k.push_back(g.matmul(x_kv, w.wk.at(i)));
                s.v.push_back(g.matmul(x_kv, w.wv.at(i)));
            }
            break;
        case VariantKind::Qv:
            for (int i = 0; i < h; ++i) {
                Tensor vi = g.matmul(x_kv, w.wv.at(i));
                s.k.push_back(vi); // the projected value serves as the score key
                s.v.push_back(vi);
            }
            break;
        case VariantKind::Mqa:
        case VariantKind::Gqa: {
            std::vector<Tensor> gk, gv;
            for (int j = 0; j < ng; ++j) {
                gk.push_back(g.matmul(x_kv, w.wk.at(j)));
                gv.push_back(g.matmul(x_kv, w.wv.at(j)));
            }
            for (int i = 0; i < h; ++i) {
                s.k.push_back(gk[cfg.group_of(i)]);
                s.v.push_back(gv[cfg.group_of(i)]);
            }
            break;
        }
        case VariantKind::Qvvv: {
            std::vector<Tensor> gv;
            for (int j = 0; j < ng; ++j) gv.push_back(g.matmul(x_kv, w.wv.at(j)));
            for (int i = 0; i < h; ++i) {
                s.k.push_back(gv[cfg.group_of(i)]);
                s.v.push_back(gv[cfg.group_of(i)]);
            }
            break;
        }
        case VariantKind::VsharedUniqueK: {
            std::vector<Tensor> gv;
            for (int j = 0; j < ng; ++j) gv.push_back(g.matmul(x_kv, w.wv.at(j)));
            for (int i = 0; i < h; ++i) {
                s.k.push_back(g.matmul(x_kv, w.wk.at(i)));
                s.v.push_back(gv[cfg.group_of(i)]);
            }
            break;
        }
        case VariantKind::MlaLite: {
            Tensor latent = g.matmul(x_kv, w.w_dkv); // the cached compression
            for (int i = 0; i < h; ++i) {
                s.k.push_back(g.matmul(latent, w.w_uk.at(i)));
                s.v.push_back(g.matmul(latent, w.w_uv.at(i)));
            }
            break;
        }
        case VariantKind::QvKa: {
            Tensor ctx = g.matmul(x_kv, w.w_ctx); // shared across heads within the layer
            for (int i = 0; i < h; ++i) {
                Tensor vi = g.matmul(x_kv, w.wv.at(i));
                s.k.push_back(g.matmul(g.concat_last_dim(ctx, vi), w.wk.at(i)));
                s.v.push_back(vi);
            }
            break;
        }
    }
    return s;
}

} // namespace detail

// Full multi-head layer for any variant: positional wiring, per-head core
// attention, head concatenation, output projection.
inline AttentionOutput attention_forward(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w,
                                         const ModelConfig& cfg) {
    cfg.validate();
    if (x_q.cols() != cfg.d_model || x_kv.cols() != cfg.d_model)
        throw std::invalid_argument("attention_forward: inputs must have d_model=" + std::to_string(cfg.d_model) +
                                    " columns, got " + shape_str(x_q.shape()) + " and " + shape_str(x_kv.shape()));

    PositionedInputs pin = apply_positions(g, x_q, x_kv, cfg.pos);
    const Tensor* coeff = pin.pos_coeff ? &*pin.pos_coeff : nullptr;

    detail::HeadStreams s = detail::build_streams(g, pin.x_q, pin.x_kv, w, cfg);

    AttentionOutput out;
    Tensor concat;
    for (int i = 0; i < cfg.heads; ++i) {
        auto [head_out, head_weights] = core_attention(g, s.q[i], s.k[i], s.v[i], cfg.causal, coeff, cfg.pos.pcm_v);
        out.weights.push_back(head_weights);
        concat = i == 0 ? head_out : g.concat_last_dim(concat, head_out);
    }
    out.out = g.matmul(concat, w.wo);
    out.cacheables = cacheable_components(cfg);
    return out;
}

namespace detail {
inline void expect_variant(const ModelConfig& cfg, std::initializer_list<VariantKind> allowed, const char* op) {
    for (VariantKind k : allowed)
        if (cfg.variant.kind == k) return;
    throw std::invalid_argument(std::string(op) + ": config variant is " + variant_name(cfg.variant.kind));
}
} // namespace detail

inline AttentionOutput forward_qkv(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w, const ModelConfig& cfg) {
    detail::expect_variant(cfg, {VariantKind::Qkv}, "forward_qkv");
    return attention_forward(g, x_q, x_kv, w, cfg);
}

inline AttentionOutput forward_qv(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w, const ModelConfig& cfg) {
    detail::expect_variant(cfg, {VariantKind::Qv}, "forward_qv");
    return attention_forward(g, x_q, x_kv, w, cfg);
}

inline AttentionOutput forward_grouped(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w, const ModelConfig& cfg) {
    detail::expect_variant(cfg, {VariantKind::Mqa, VariantKind::Gqa, VariantKind::Qvvv, VariantKind::VsharedUniqueK},
                           "forward_grouped");
    return attention_forward(g, x_q, x_kv, w, cfg);
}

inline AttentionOutput forward_mla_lite(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w, const ModelConfig& cfg) {
    detail::expect_variant(cfg, {VariantKind::MlaLite}, "forward_mla_lite");
    return attention_forward(g, x_q, x_kv, w, cfg);
}

inline AttentionOutput forward_qv_ka(Graph& g, const Tensor& x_q, const Tensor& x_kv, const LayerWeights& w, const ModelConfig& cfg) {
    detail::expect_variant(cfg, {VariantKind::QvKa}, "forward_qv_ka");
    return attention_forward(g, x_q, x_kv, w, cfg);
}

} // namespace attnlab
