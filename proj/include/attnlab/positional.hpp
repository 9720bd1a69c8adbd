#pragma once

#include "attnlab/tensor.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

namespace attnlab {

enum class PosKind { None, Sinusoidal, Agf };

inline const char* pos_kind_name(PosKind k) {
    switch (k) {
        case PosKind::None: return "none";
        case PosKind::Sinusoidal: return "sinusoidal";
        case PosKind::Agf: return "agf";
    }
    return "?";
}

// Positional scheme selector. AGF multiplies attention logits by a
// distance-decaying coefficient; pcm_v additionally applies the same
// coefficient to each value term in the output sum.
struct PosScheme {
    PosKind kind = PosKind::None;
    double agf_alpha = 1.0;
    bool pcm_v = false;

    void validate() const {
        if (pcm_v && kind != PosKind::Agf)
            throw std::invalid_argument("PosScheme: pcm_v requires the agf scheme");
        if (kind == PosKind::Agf && !(agf_alpha > 0.0))
            throw std::invalid_argument("PosScheme: agf_alpha must be positive");
    }

    static PosScheme none() { return {}; }
    static PosScheme sinusoidal() { return {PosKind::Sinusoidal, 1.0, false}; }
    static PosScheme agf(double alpha, bool pcm_v = false) { return {PosKind::Agf, alpha, pcm_v}; }

    bool operator==(const PosScheme&) const = default;
};

// One row of the classic sinusoidal table:
// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same).
inline void fill_sinusoidal_row(Tensor& pe, int row, int pos, int d_model) {
    for (int i = 0; i < d_model / 2; ++i) {
        const double rate = std::pow(10000.0, -2.0 * i / d_model);
        pe.at(row, 2 * i) = std::sin(pos * rate);
        pe.at(row, 2 * i + 1) = std::cos(pos * rate);
    }
}

inline Tensor sinusoidal_pe(int seq_len, int d_model) {
    if (seq_len < 1) throw std::invalid_argument("sinusoidal_pe: seq_len must be positive");
    if (d_model < 2 || d_model % 2 != 0)
        throw std::invalid_argument("sinusoidal_pe: d_model must be even and positive, got " + std::to_string(d_model));
    Tensor pe(seq_len, d_model);
    for (int pos = 0; pos < seq_len; ++pos) fill_sinusoidal_row(pe, pos, pos, d_model);
    return pe;
}

inline Tensor sinusoidal_pe_row(int pos, int d_model) {
    if (pos < 0) throw std::invalid_argument("sinusoidal_pe_row: position must be nonnegative");
    if (d_model < 2 || d_model % 2 != 0)
        throw std::invalid_argument("sinusoidal_pe_row: d_model must be even and positive");
    Tensor pe(1, d_model);
    fill_sinusoidal_row(pe, 0, pos, d_model);
    return pe;
}

inline double agf_coeff(int m, int n, double alpha) {
    return std::pow(1.0 + std::abs(m - n), -alpha);
}

// Power-law position coefficient matrix: PosCoeff(m, n) = (1+|m-n|)^-alpha.
// Symmetric Toeplitz with unit diagonal; all entries in (0, 1].
inline Tensor agf_pos_coeff(int seq_len, const PosScheme& scheme) {
    if (scheme.kind != PosKind::Agf)
        throw std::invalid_argument("agf_pos_coeff: scheme kind is not agf");
    scheme.validate();
    if (seq_len < 1) throw std::invalid_argument("agf_pos_coeff: seq_len must be positive");
    Tensor c(seq_len, seq_len);
    for (int m = 0; m < seq_len; ++m)
        for (int n = 0; n < seq_len; ++n) c.at(m, n) = agf_coeff(m, n, scheme.agf_alpha);
    return c;
}

// Coefficient row for decode step t against kv positions [0, t].
inline Tensor agf_pos_coeff_row(int t, const PosScheme& scheme) {
    if (scheme.kind != PosKind::Agf)
        throw std::invalid_argument("agf_pos_coeff_row: scheme kind is not agf");
    Tensor c(1, t + 1);
    for (int n = 0; n <= t; ++n) c.at(0, n) = agf_coeff(t, n, scheme.agf_alpha);
    return c;
}

struct PositionedInputs {
    Tensor x_q;
    Tensor x_kv;
    std::optional<Tensor> pos_coeff; // multiplies logits (and values under pcm_v)
};

// Positional wiring ahead of an attention layer. Sinusoidal adds the PE
// table to both inputs before any projection; AGF leaves inputs alone and
// hands back the coefficient matrix for the attention kernel.
inline PositionedInputs apply_positions(Graph& g, const Tensor& x_q, const Tensor& x_kv, const PosScheme& scheme) {
    scheme.validate();
    switch (scheme.kind) {
        case PosKind::None:
            return {x_q, x_kv, std::nullopt};
        case PosKind::Sinusoidal: {
            Tensor pe_q = sinusoidal_pe(x_q.rows(), x_q.cols());
            if (x_q.same_storage(x_kv)) {
                Tensor both = g.add(x_q, pe_q);
                return {both, both, std::nullopt};
            }
            Tensor pe_kv = sinusoidal_pe(x_kv.rows(), x_kv.cols());
            return {g.add(x_q, pe_q), g.add(x_kv, pe_kv), std::nullopt};
        }
        case PosKind::Agf: {
            if (x_q.rows() != x_kv.rows())
                throw std::invalid_argument("apply_positions: agf requires equal q/kv sequence lengths");
            return {x_q, x_kv, agf_pos_coeff(x_q.rows(), scheme)};
        }
    }
    throw std::logic_error("apply_positions: unreachable");
}

} // namespace attnlab
