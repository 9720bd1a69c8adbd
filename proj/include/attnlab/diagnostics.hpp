#pragma once

#include "attnlab/attention.hpp"
#include "attnlab/rng.hpp"
#include "attnlab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace attnlab {

constexpr long kGradCheckCoordCap = 512;

struct GradCheckEntry {
    std::string param;
    double max_rel_err = 0.0;
    long coords_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> per_param;
    double max_rel_err = 0.0;
    std::string worst_param;
    double eps = 1e-5;
    double threshold = 1e-4;
    bool pass = false;
};

// Central-difference gradient check. loss_fn must rebuild the scalar loss
// from the parameter tensors it captured; analytic gradients come from one
// backward pass, numeric ones from (f(x+e)-f(x-e))/2e per coordinate.
// Tensors above the coordinate cap are probed on a seeded sample.
// fault_scale != 1 corrupts the analytic side; used as the checker's own
// negative control.
inline GradCheckReport gradcheck(const std::function<Tensor(Graph&)>& loss_fn,
                                 const std::vector<std::pair<std::string, Tensor>>& params, double eps = 1e-5,
                                 double threshold = 1e-4, uint64_t seed = 0, double fault_scale = 1.0) {
    GradCheckReport report;
    report.eps = eps;
    report.threshold = threshold;

    for (auto& [name, t] : params) {
        (void)name;
        if (!t.requires_grad()) throw std::invalid_argument("gradcheck: parameter tensors must carry gradients");
        Tensor h = t;
        h.zero_grad();
    }

    double base;
    {
        Graph g;
        Tensor loss = loss_fn(g);
        if (!loss.is_scalar()) throw std::invalid_argument("gradcheck: loss must be scalar");
        base = loss.value();
        if (!std::isfinite(base)) throw std::invalid_argument("gradcheck: non-finite loss");
        g.backward(loss);
    }

    std::vector<std::vector<double>> analytic;
    for (auto& [name, t] : params) {
        (void)name;
        std::vector<double> grad = t.grad();
        if (fault_scale != 1.0)
            for (double& v : grad) v *= fault_scale;
        analytic.push_back(std::move(grad));
    }

    // Value-only evaluation; the local tape is dropped without a backward
    // pass so parameter gradients stay untouched.
    auto eval_loss = [&]() {
        Graph g;
        return loss_fn(g).value();
    };

    for (size_t p = 0; p < params.size(); ++p) {
        const auto& [name, t] = params[p];
        Tensor param = t;
        std::vector<long> coords(static_cast<size_t>(param.size()));
        std::iota(coords.begin(), coords.end(), 0);
        if (param.size() > kGradCheckCoordCap) {
            Rng rng(Rng::splitmix64(seed ^ std::hash<std::string>{}(name)));
            for (long i = 0; i < kGradCheckCoordCap; ++i) {
                const long j = i + rng.uniform_int(static_cast<int>(coords.size() - i));
                std::swap(coords[i], coords[j]);
            }
            coords.resize(kGradCheckCoordCap);
        }

        GradCheckEntry entry;
        entry.param = name;
        entry.coords_checked = static_cast<long>(coords.size());
        for (long c : coords) {
            const double saved = param.data()[c];
            param.data()[c] = saved + eps;
            const double plus = eval_loss();
            param.data()[c] = saved - eps;
            const double minus = eval_loss();
            param.data()[c] = saved;
            const double numeric = (plus - minus) / (2.0 * eps);
            const double a = analytic[p][c];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > entry.max_rel_err) entry.max_rel_err = rel;
        }
        if (entry.max_rel_err >= report.max_rel_err) {
            report.max_rel_err = entry.max_rel_err;
            report.worst_param = name;
        }
        report.per_param.push_back(std::move(entry));
    }
    report.pass = report.max_rel_err < threshold;
    return report;
}

// Mean Shannon entropy (nats) and mean max mass of attention rows. Rows
// must already be normalized over their visible positions.
inline std::pair<double, double> attention_entropy(const Tensor& weights, bool causal) {
    const int tq = weights.rows(), tkv = weights.cols();
    if (causal && tq != tkv) throw std::invalid_argument("attention_entropy: causal expects square weights");
    double entropy_sum = 0.0, max_sum = 0.0;
    for (int i = 0; i < tq; ++i) {
        const int visible = causal ? i + 1 : tkv;
        double row_sum = 0.0, h = 0.0, mx = 0.0;
        for (int j = 0; j < visible; ++j) {
            const double a = weights.at(i, j);
            row_sum += a;
            if (a > 0.0) h -= a * std::log(a);
            mx = std::max(mx, a);
        }
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw std::invalid_argument("attention_entropy: row " + std::to_string(i) + " sums to " +
                                        std::to_string(row_sum) + ", not 1");
        entropy_sum += h;
        max_sum += mx;
    }
    return {entropy_sum / tq, max_sum / tq};
}

struct HeadDiffusion {
    double mean_entropy = 0.0;
    double mean_max_mass = 0.0;
};

// Entropy-based instrument for the deep-matching diffusion hypothesis:
// reported as data, never asserted as pass/fail.
struct DiffusionReport {
    std::string mode;
    std::string crafts;
    uint64_t seed = 0;
    long checkpoint_step = 0;
    std::vector<HeadDiffusion> per_head;
    double mean_entropy = 0.0;
    double mean_max_mass = 0.0;
};

inline std::string render_diffusion_csv(const DiffusionReport& r) {
    std::ostringstream os;
    os << "# seed=" << r.seed << "\n";
    os << "variant,head,mean_entropy_nats,mean_max_mass,checkpoint_step\n";
    char buf[64];
    auto full = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (size_t i = 0; i < r.per_head.size(); ++i)
        os << r.mode << "," << i << "," << full(r.per_head[i].mean_entropy) << "," << full(r.per_head[i].mean_max_mass)
           << "," << r.checkpoint_step << "\n";
    os << r.mode << ",all," << full(r.mean_entropy) << "," << full(r.mean_max_mass) << "," << r.checkpoint_step << "\n";
    return os.str();
}

// Gradient check of one full attention layer: loss is a fixed random
// contraction of the output so every weight participates.
inline GradCheckReport gradcheck_attention_layer(const ModelConfig& cfg, int seq_len, uint64_t seed, double eps = 1e-5,
                                                 double threshold = 1e-4, double fault_scale = 1.0) {
    cfg.validate();
    Rng rng(Rng::splitmix64(seed));
    Rng wrng = rng.fork(1), xrng = rng.fork(2), rrng = rng.fork(3);
    LayerWeights w = LayerWeights::init(cfg, wrng);
    Tensor x = init_matrix(seq_len, cfg.d_model, xrng, true);
    Tensor probe = init_matrix(seq_len, cfg.d_model, rrng, false);

    auto loss_fn = [&, w, x, probe, cfg](Graph& g) {
        AttentionOutput out = attention_forward(g, x, x, w, cfg);
        return g.sum(g.mul(out.out, probe));
    };
    std::vector<std::pair<std::string, Tensor>> params = w.named_params("attn");
    params.emplace_back("x", x);
    return gradcheck(loss_fn, params, eps, threshold, seed, fault_scale);
}

} // namespace attnlab
