#pragma once

#include "attnlab/positional.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace attnlab {

enum class VariantKind { Qkv, Qv, Mqa, Gqa, Qvvv, MlaLite, VsharedUniqueK, QvKa };

inline const char* variant_name(VariantKind k) {
    switch (k) {
        case VariantKind::Qkv: return "qkv";
        case VariantKind::Qv: return "qv";
        case VariantKind::Mqa: return "mqa";
        case VariantKind::Gqa: return "gqa";
        case VariantKind::Qvvv: return "qvvv";
        case VariantKind::MlaLite: return "mla";
        case VariantKind::VsharedUniqueK: return "vshared_unique_k";
        case VariantKind::QvKa: return "qv_ka";
    }
    return "?";
}

inline std::optional<VariantKind> parse_variant(const std::string& s) {
    if (s == "qkv") return VariantKind::Qkv;
    if (s == "qv") return VariantKind::Qv;
    if (s == "mqa") return VariantKind::Mqa;
    if (s == "gqa") return VariantKind::Gqa;
    if (s == "qvvv") return VariantKind::Qvvv;
    if (s == "mla" || s == "mla_lite") return VariantKind::MlaLite;
    if (s == "vshared_unique_k") return VariantKind::VsharedUniqueK;
    if (s == "qv_ka" || s == "qvka") return VariantKind::QvKa;
    return std::nullopt;
}

struct Variant {
    VariantKind kind = VariantKind::Qkv;
    int kv_groups = 1; // gqa / qvvv / vshared_unique_k (mqa is fixed at 1)
    int d_latent = 0;  // mla
    int d_ctx = 0;     // qv_ka

    bool uses_groups() const {
        return kind == VariantKind::Gqa || kind == VariantKind::Qvvv || kind == VariantKind::VsharedUniqueK || kind == VariantKind::Mqa;
    }
    bool operator==(const Variant&) const = default;
};

// Positional schemes a variant can carry. Variants that discard the K
// pathway (or synthesize it from a latent) have nothing to inject PE into,
// so sinusoidal is rejected for them.
inline std::vector<PosKind> supported_pos_kinds(VariantKind k) {
    if (k == VariantKind::Qvvv || k == VariantKind::MlaLite) return {PosKind::None, PosKind::Agf};
    return {PosKind::None, PosKind::Sinusoidal, PosKind::Agf};
}

// Full architectural description; one value of this type drives every
// module in the laboratory.
struct ModelConfig {
    int d_model = 0;
    int heads = 0;
    int d_k = 0;
    int d_v = 0;
    int n_layers = 1;
    int d_ff = 0;
    int vocab = 0;
    Variant variant;
    PosScheme pos;
    bool causal = true;

    bool operator==(const ModelConfig&) const = default;

    // Contiguous head-to-group assignment: head i uses kv group floor(i*g/h).
    static int head_group(int head, int h, int g) { return static_cast<int>((static_cast<long>(head) * g) / h); }
    int group_of(int head) const { return head_group(head, heads, groups()); }

    // Number of distinct kv streams the variant keeps.
    int groups() const {
        switch (variant.kind) {
            case VariantKind::Mqa: return 1;
            case VariantKind::Gqa:
            case VariantKind::Qvvv:
            case VariantKind::VsharedUniqueK: return variant.kv_groups;
            default: return heads;
        }
    }

    void validate() const {
        auto need = [](bool ok, const std::string& msg) {
            if (!ok) throw std::invalid_argument("ModelConfig: " + msg);
        };
        need(d_model >= 1, "d_model must be positive");
        need(heads >= 1, "heads must be positive");
        need(d_k >= 1, "d_k must be positive");
        need(d_v >= 1, "d_v must be positive");
        need(n_layers >= 1, "n_layers must be positive");
        need(d_ff >= 1, "d_ff must be positive");
        need(vocab >= 3, "vocab must be at least 3");
        pos.validate();

        const VariantKind k = variant.kind;
        if (k == VariantKind::Qv || k == VariantKind::Qvvv)
            need(d_k == d_v, std::string(variant_name(k)) + " scores are q.v^T and require d_k == d_v");
        if (k == VariantKind::Mqa)
            need(variant.kv_groups == 1, "mqa requires kv_groups == 1");
        if (k == VariantKind::Gqa || k == VariantKind::Qvvv || k == VariantKind::VsharedUniqueK) {
            need(variant.kv_groups >= 1 && variant.kv_groups <= heads, "kv_groups must lie in [1, heads]");
            need(heads % variant.kv_groups == 0, "kv_groups must divide heads");
        }
        if (!variant.uses_groups())
            need(variant.kv_groups == 1, std::string(variant_name(k)) + " does not take kv_groups");
        if (k == VariantKind::MlaLite) {
            need(variant.d_latent >= 1, "mla requires d_latent >= 1");
            need(variant.d_latent < heads * (d_k + d_v), "mla d_latent must compress: d_latent < heads*(d_k+d_v)");
        } else {
            need(variant.d_latent == 0, std::string(variant_name(k)) + " does not take d_latent");
        }
        if (k == VariantKind::QvKa)
            need(variant.d_ctx >= 1, "qv_ka requires d_ctx >= 1");
        else
            need(variant.d_ctx == 0, std::string(variant_name(k)) + " does not take d_ctx");

        bool pos_ok = false;
        for (PosKind p : supported_pos_kinds(k)) pos_ok = pos_ok || (p == pos.kind);
        need(pos_ok, std::string(variant_name(k)) + " does not support the " + pos_kind_name(pos.kind) +
                         " positional scheme (no K pathway to carry PE)");
    }
};

// Display name in the papers' Mode column style.
inline std::string mode_label(const ModelConfig& cfg) {
    switch (cfg.variant.kind) {
        case VariantKind::Qkv: return "QKV";
        case VariantKind::Qv: return "QV";
        case VariantKind::Mqa: return "MQA";
        case VariantKind::Gqa: return "GQA (g=" + std::to_string(cfg.variant.kv_groups) + ")";
        case VariantKind::Qvvv: return "QvVv (g=" + std::to_string(cfg.variant.kv_groups) + ")";
        case VariantKind::MlaLite: return "MLA (d_latent=" + std::to_string(cfg.variant.d_latent) + ")";
        case VariantKind::VsharedUniqueK: return "V-Shared (g=" + std::to_string(cfg.variant.kv_groups) + ")";
        case VariantKind::QvKa: {
            if (cfg.variant.d_ctx == cfg.d_k) return "QV-Ka (d_ctx = d_head)";
            if (cfg.variant.d_ctx == 2 * cfg.d_k) return "QV-Ka (d_ctx = 2 d_head)";
            return "QV-Ka (d_ctx = " + std::to_string(cfg.variant.d_ctx) + ")";
        }
    }
    return "?";
}

// Display name in the papers' Crafts column style.
inline std::string crafts_label(const PosScheme& pos) {
    switch (pos.kind) {
        case PosKind::None: return "None";
        case PosKind::Sinusoidal: return "Default (Sinusoidal PE)";
        case PosKind::Agf: return pos.pcm_v ? "AGF + PCM-V" : "AGF";
    }
    return "?";
}

} // namespace attnlab
