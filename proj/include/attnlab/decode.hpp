#pragma once

#include "attnlab/attention.hpp"

#include <stdexcept>
#include <vector>

namespace attnlab {

// Step-by-step decoder for one attention layer. Between steps it retains
// exactly the per-token tensors the variant declares cacheable:
//   qkv: K_i, V_i    gqa/mqa: group K, V    qv: V_i    qvvv: group V
//   vshared_unique_k: K_i + group V    mla: the latent    qv_ka: V_i + ctx
// Everything else is recomputed from the cache, so agreement with the
// full-sequence forward pass is the cacheability proof.
class AttnDecoder {
  public:
    AttnDecoder(const ModelConfig& cfg, const LayerWeights& w) : cfg_(cfg), w_(w) {
        cfg_.validate();
        if (!cfg_.causal) throw std::invalid_argument("AttnDecoder: step decode requires a causal config");
        const int h = cfg_.heads, g = cfg_.groups();
        switch (cfg_.variant.kind) {
            case VariantKind::Qkv: k_cache_.resize(h); v_cache_.resize(h); break;
            case VariantKind::Mqa:
            case VariantKind::Gqa: k_cache_.resize(g); v_cache_.resize(g); break;
            case VariantKind::Qv: v_cache_.resize(h); break;
            case VariantKind::Qvvv: v_cache_.resize(g); break;
            case VariantKind::VsharedUniqueK: k_cache_.resize(h); v_cache_.resize(g); break;
            case VariantKind::MlaLite: break;
            case VariantKind::QvKa: v_cache_.resize(h); break;
        }
    }

    int position() const { return t_; }
    long total_cached_elems() const { return total_cached_; }

    long cached_elems_per_token() const {
        if (t_ == 0) throw std::logic_error("AttnDecoder: no steps taken yet");
        if (total_cached_ % t_ != 0) throw std::logic_error("AttnDecoder: cache growth is not per-token constant");
        return total_cached_ / t_;
    }

    // Feeds the raw embedding row for the next position; returns the layer
    // output row (1 x d_model).
    Tensor step(const Tensor& x_row) {
        if (x_row.rows() != 1 || x_row.cols() != cfg_.d_model)
            throw std::invalid_argument("AttnDecoder::step: expected a 1x" + std::to_string(cfg_.d_model) + " row");
        Graph g;
        Tensor x = x_row;
        if (cfg_.pos.kind == PosKind::Sinusoidal) x = g.add(x, sinusoidal_pe_row(t_, cfg_.d_model));

        append_cache(g, x);

        Tensor coeff_row;
        const Tensor* coeff = nullptr;
        if (cfg_.pos.kind == PosKind::Agf) {
            coeff_row = agf_pos_coeff_row(t_, cfg_.pos);
            coeff = &coeff_row;
        }

        Tensor concat;
        for (int i = 0; i < cfg_.heads; ++i) {
            Tensor q = g.matmul(x, w_.wq.at(i));
            auto [k, v] = head_kv(g, i);
            auto [head_out, head_w] = core_attention(g, q, k, v, /*causal=*/false, coeff, cfg_.pos.pcm_v);
            concat = i == 0 ? head_out : g.concat_last_dim(concat, head_out);
        }
        ++t_;
        return g.matmul(concat, w_.wo);
    }

  private:
    ModelConfig cfg_;
    LayerWeights w_;
    int t_ = 0;
    long total_cached_ = 0;

    std::vector<std::vector<double>> k_cache_; // per stream, flat rows of d_k
    std::vector<std::vector<double>> v_cache_; // per stream, flat rows of d_v
    std::vector<double> latent_cache_;         // mla, flat rows of d_latent
    std::vector<double> ctx_cache_;            // qv_ka, flat rows of d_ctx

    void append_row(std::vector<double>& cache, const Tensor& row) {
        cache.insert(cache.end(), row.data().begin(), row.data().end());
        total_cached_ += row.size();
    }

    static Tensor from_flat(const std::vector<double>& flat, int rows, int cols) {
        Tensor t(rows, cols);
        t.data() = flat;
        return t;
    }

    void append_cache(Graph& g, const Tensor& x) {
        switch (cfg_.variant.kind) {
            case VariantKind::Qkv:
                for (int i = 0; i < cfg_.heads; ++i) {
                    append_row(k_cache_[i], g.matmul(x, w_.wk.at(i)));
                    append_row(v_cache_[i], g.matmul(x, w_.wv.at(i)));
                }
                break;
            case VariantKind::Mqa:
            case VariantKind::Gqa:
                for (int j = 0; j < cfg_.groups(); ++j) {
                    append_row(k_cache_[j], g.matmul(x, w_.wk.at(j)));
                    append_row(v_cache_[j], g.matmul(x, w_.wv.at(j)));
                }
                break;
            case VariantKind::Qv:
                for (int i = 0; i < cfg_.heads; ++i) append_row(v_cache_[i], g.matmul(x, w_.wv.at(i)));
                break;
            case VariantKind::Qvvv:
                for (int j = 0; j < cfg_.groups(); ++j) append_row(v_cache_[j], g.matmul(x, w_.wv.at(j)));
                break;
            case VariantKind::VsharedUniqueK:
                for (int i = 0; i < cfg_.heads; ++i) append_row(k_cache_[i], g.matmul(x, w_.wk.at(i)));
                for (int j = 0; j < cfg_.groups(); ++j) append_row(v_cache_[j], g.matmul(x, w_.wv.at(j)));
                break;
            case VariantKind::MlaLite:
                append_row(latent_cache_, g.matmul(x, w_.w_dkv));
                break;
            case VariantKind::QvKa:
                append_row(ctx_cache_, g.matmul(x, w_.w_ctx));
                for (int i = 0; i < cfg_.heads; ++i) append_row(v_cache_[i], g.matmul(x, w_.wv.at(i)));
                break;
        }
    }

    // Reconstructs this head's full K and V matrices over positions [0, t_]
    // from the cache alone.
    std::pair<Tensor, Tensor> head_kv(Graph& g, int head) {
        const int n = t_ + 1;
        switch (cfg_.variant.kind) {
            case VariantKind::Qkv:
                return {from_flat(k_cache_[head], n, cfg_.d_k), from_flat(v_cache_[head], n, cfg_.d_v)};
            case VariantKind::Mqa:
            case VariantKind::Gqa: {
                const int j = cfg_.group_of(head);
                return {from_flat(k_cache_[j], n, cfg_.d_k), from_flat(v_cache_[j], n, cfg_.d_v)};
            }
            case VariantKind::Qv: {
                Tensor v = from_flat(v_cache_[head], n, cfg_.d_v);
                return {v, v};
            }
            case VariantKind::Qvvv: {
                Tensor v = from_flat(v_cache_[cfg_.group_of(head)], n, cfg_.d_v);
                return {v, v};
            }
            case VariantKind::VsharedUniqueK:
                return {from_flat(k_cache_[head], n, cfg_.d_k), from_flat(v_cache_[cfg_.group_of(head)], n, cfg_.d_v)};
            case VariantKind::MlaLite: {
                Tensor latent = from_flat(latent_cache_, n, cfg_.variant.d_latent);
                return {g.matmul(latent, w_.w_uk.at(head)), g.matmul(latent, w_.w_uv.at(head))};
            }
            case VariantKind::QvKa: {
                Tensor ctx = from_flat(ctx_cache_, n, cfg_.variant.d_ctx);
                Tensor v = from_flat(v_cache_[head], n, cfg_.d_v);
                return {g.matmul(g.concat_last_dim(ctx, v), w_.wk.at(head)), v};
            }
        }
        throw std::logic_error("AttnDecoder: unreachable");
    }
};

} // namespace attnlab
