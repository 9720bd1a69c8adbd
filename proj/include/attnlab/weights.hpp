#pragma once

#include "attnlab/config.hpp"
#include "attnlab/rng.hpp"
#include "attnlab/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace attnlab {

inline Tensor init_matrix(int rows, int cols, Rng& rng, bool requires_grad = true) {
    Tensor t(rows, cols, requires_grad);
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

// Projection matrices for one attention layer. Exactly the matrices the
// variant demands exist, nothing else:
//   wq           per head,   [d_model x d_k]
//   wk           qkv / vshared_unique_k: per head; gqa / mqa: per group;
//                qv_ka: per head with shape [(d_ctx + d_v) x d_k]; otherwise empty
//   wv           qkv / qv / qv_ka: per head; grouped variants: per group; mla: empty
//   wo           [heads*d_v x d_model]
//   w_ctx        qv_ka only, [d_model x d_ctx]
//   w_dkv        mla only,   [d_model x d_latent]
//   w_uk, w_uv   mla only, per head, [d_latent x d_k] / [d_latent x d_v]
struct LayerWeights {
    std::vector<Tensor> wq;
    std::vector<Tensor> wk;
    std::vector<Tensor> wv;
    Tensor wo;
    Tensor w_ctx;
    Tensor w_dkv;
    std::vector<Tensor> w_uk;
    std::vector<Tensor> w_uv;

    static LayerWeights init(const ModelConfig& cfg, Rng& rng) {
        cfg.validate();
        LayerWeights w;
        const int h = cfg.heads, g = cfg.groups();
        for (int i = 0; i < h; ++i) w.wq.push_back(init_matrix(cfg.d_model, cfg.d_k, rng));
        switch (cfg.variant.kind) {
            case VariantKind::Qkv:
            case VariantKind::VsharedUniqueK:
                for (int i = 0; i < h; ++i) w.wk.push_back(init_matrix(cfg.d_model, cfg.d_k, rng));
                break;
            case VariantKind::Mqa:
            case VariantKind::Gqa:
                for (int j = 0; j < g; ++j) w.wk.push_back(init_matrix(cfg.d_model, cfg.d_k, rng));
                break;
            case VariantKind::QvKa:
                for (int i = 0; i < h; ++i) w.wk.push_back(init_matrix(cfg.variant.d_ctx + cfg.d_v, cfg.d_k, rng));
                break;
            default:
                break; // qv, qvvv, mla carry no standalone key projection
        }
        switch (cfg.variant.kind) {
            case VariantKind::Qkv:
            case VariantKind::Qv:
            case VariantKind::QvKa:
                for (int i = 0; i < h; ++i) w.wv.push_back(init_matrix(cfg.d_model, cfg.d_v, rng));
                break;
            case VariantKind::Mqa:
            case VariantKind::Gqa:
            case VariantKind::Qvvv:
            case VariantKind::VsharedUniqueK:
                for (int j = 0; j < g; ++j) w.wv.push_back(init_matrix(cfg.d_model, cfg.d_v, rng));
                break;
            case VariantKind::MlaLite:
                break;
        }
        if (cfg.variant.kind == VariantKind::QvKa) w.w_ctx = init_matrix(cfg.d_model, cfg.variant.d_ctx, rng);
        if (cfg.variant.kind == VariantKind::MlaLite) {
            w.w_dkv = init_matrix(cfg.d_model, cfg.variant.d_latent, rng);
            for (int i = 0; i < h; ++i) w.w_uk.push_back(init_matrix(cfg.variant.d_latent, cfg.d_k, rng));
            for (int i = 0; i < h; ++i) w.w_uv.push_back(init_matrix(cfg.variant.d_latent, cfg.d_v, rng));
        }
        w.wo = init_matrix(h * cfg.d_v, cfg.d_model, rng);
        return w;
    }

    std::vector<std::pair<std::string, Tensor>> named_params(const std::string& prefix) const {
        std::vector<std::pair<std::string, Tensor>> out;
        auto push_all = [&](const char* name, const std::vector<Tensor>& ts) {
            for (size_t i = 0; i < ts.size(); ++i) out.emplace_back(prefix + "." + name + std::to_string(i), ts[i]);
        };
        push_all("wq", wq);
        push_all("wk", wk);
        push_all("wv", wv);
        if (w_ctx.defined()) out.emplace_back(prefix + ".w_ctx", w_ctx);
        if (w_dkv.defined()) out.emplace_back(prefix + ".w_dkv", w_dkv);
        push_all("w_uk", w_uk);
        push_all("w_uv", w_uv);
        out.emplace_back(prefix + ".wo", wo);
        return out;
    }

    long param_count() const {
        long n = 0;
        for (const auto& [name, t] : named_params("w")) n += t.size();
        return n;
    }
};

// Closed-form attention parameter count per layer; must agree with the
// element count of LayerWeights::init for every variant.
inline long attention_params_per_layer(const ModelConfig& cfg) {
    cfg.validate();
    const long h = cfg.heads, g = cfg.groups();
    const long dm = cfg.d_model, dk = cfg.d_k, dv = cfg.d_v;
    long n = h * dm * dk;  // queries
    n += h * dv * dm;      // output projection
    switch (cfg.variant.kind) {
        case VariantKind::Qkv: n += h * dm * dk + h * dm * dv; break;
        case VariantKind::Qv: n += h * dm * dv; break;
        case VariantKind::Mqa:
        case VariantKind::Gqa: n += g * dm * dk + g * dm * dv; break;
        case VariantKind::Qvvv: n += g * dm * dv; break;
        case VariantKind::VsharedUniqueK: n += h * dm * dk + g * dm * dv; break;
        case VariantKind::MlaLite: n += dm * cfg.variant.d_latent + h * cfg.variant.d_latent * (dk + dv); break;
        case VariantKind::QvKa: n += dm * cfg.variant.d_ctx + h * (cfg.variant.d_ctx + dv) * dk + h * dm * dv; break;
    }
    return n;
}

} // namespace attnlab
