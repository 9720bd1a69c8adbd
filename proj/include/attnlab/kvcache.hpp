#pragma once

#include "attnlab/attention.hpp"
#include "attnlab/config.hpp"

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace attnlab {

// Exact steady-state decode cache footprint for one variant. Covers the
// KV-cache only; weights and activations are out of scope.
struct CacheReport {
    VariantKind variant;
    std::string variant_label;
    std::vector<CacheComponent> breakdown;
    long elems_per_token_per_layer = 0;
    int bytes_per_elem = 2;

    long bytes_per_token_per_layer() const { return elems_per_token_per_layer * bytes_per_elem; }

    long total_bytes(long seq_len, int layers, int batch) const {
        return seq_len * layers * batch * bytes_per_token_per_layer();
    }
};

inline CacheReport cache_report(const ModelConfig& cfg, int bytes_per_elem) {
    cfg.validate();
    if (bytes_per_elem < 1) throw std::invalid_argument("cache_report: bytes_per_elem must be positive");
    CacheReport r;
    r.variant = cfg.variant.kind;
    r.variant_label = mode_label(cfg);
    r.breakdown = cacheable_components(cfg);
    for (const auto& c : r.breakdown) r.elems_per_token_per_layer += c.elems_per_token;
    r.bytes_per_elem = bytes_per_elem;
    return r;
}

inline std::string render_cache_csv(const CacheReport& r, long seq_len, int layers, int batch) {
    std::ostringstream os;
    os << "variant,component,elements,bytes_per_token_layer,total_bytes\n";
    for (const auto& c : r.breakdown) {
        const long bytes = c.elems_per_token * r.bytes_per_elem;
        os << variant_name(r.variant) << "," << c.name << "," << c.elems_per_token << "," << bytes << ","
           << bytes * seq_len * layers * batch << "\n";
    }
    os << variant_name(r.variant) << ",total," << r.elems_per_token_per_layer << "," << r.bytes_per_token_per_layer()
       << "," << r.total_bytes(seq_len, layers, batch) << "\n";
    return os.str();
}

inline std::string render_cache_table(const CacheReport& r, long seq_len, int layers, int batch) {
    std::ostringstream os;
    os << "KV-cache report: " << r.variant_label << "  (bytes/elem=" << r.bytes_per_elem << ", T=" << seq_len
       << ", L=" << layers << ", B=" << batch << ")\n";
    os << std::left << std::setw(10) << "component" << std::right << std::setw(10) << "elements" << std::setw(16)
       << "bytes/tok/layer" << std::setw(14) << "total" << "\n";
    for (const auto& c : r.breakdown) {
        const long bytes = c.elems_per_token * r.bytes_per_elem;
        os << std::left << std::setw(10) << c.name << std::right << std::setw(10) << c.elems_per_token << std::setw(16)
           << bytes << std::setw(14) << bytes * seq_len * layers * batch << "\n";
    }
    os << std::left << std::setw(10) << "total" << std::right << std::setw(10) << r.elems_per_token_per_layer
       << std::setw(16) << r.bytes_per_token_per_layer() << std::setw(14) << r.total_bytes(seq_len, layers, batch)
       << "\n";
    return os.str();
}

// The paper's minimal-model worked example: N semantic directions need
// N*N pairings, organized over N layers of N heads; sharing V across the
// queries of one layer shrinks what decoding has to keep.
struct MinimalModelScenario {
    std::string name;
    int shared_vs_per_layer;  // distinct cached V streams per layer
    int queries_per_v;
    long cached_v_total;      // over all layers
    double sharing_ratio;     // unshared / this
};

struct MinimalModelTable {
    int directions = 6;
    int pairings = 36;
    int layers = 6;
    int heads_per_layer = 6;
    std::vector<MinimalModelScenario> scenarios;
};

inline MinimalModelTable minimal_model_table() {
    MinimalModelTable t;
    const int n = t.directions;
    t.pairings = n * n;
    t.layers = n;
    t.heads_per_layer = t.pairings / t.layers;
    auto scenario = [&](std::string name, int vs_per_layer) {
        MinimalModelScenario s;
        s.name = std::move(name);
        s.shared_vs_per_layer = vs_per_layer;
        s.queries_per_v = t.heads_per_layer / vs_per_layer;
        s.cached_v_total = static_cast<long>(vs_per_layer) * t.layers;
        s.sharing_ratio = static_cast<double>(t.heads_per_layer) / vs_per_layer;
        return s;
    };
    t.scenarios.push_back(scenario("scenario-1 (one shared V)", 1));
    t.scenarios.push_back(scenario("scenario-2 (two shared Vs)", 2));
    t.scenarios.push_back(scenario("unshared", t.heads_per_layer));
    return t;
}

inline std::string render_minimal_model(const MinimalModelTable& t, bool csv) {
    std::ostringstream os;
    if (csv) {
        os << "scenario,vs_per_layer,queries_per_v,cached_v_total,sharing_ratio\n";
        for (const auto& s : t.scenarios)
            os << s.name << "," << s.shared_vs_per_layer << "," << s.queries_per_v << "," << s.cached_v_total << ","
               << s.sharing_ratio << "\n";
        return os.str();
    }
    os << "Minimal model: " << t.directions << " expression directions, " << t.pairings << " pairings over "
       << t.layers << " layers x " << t.heads_per_layer << " heads\n";
    os << std::left << std::setw(28) << "scenario" << std::right << std::setw(12) << "V/layer" << std::setw(12)
       << "queries/V" << std::setw(12) << "V total" << std::setw(10) << "sharing" << "\n";
    for (const auto& s : t.scenarios)
        os << std::left << std::setw(28) << s.name << std::right << std::setw(12) << s.shared_vs_per_layer
           << std::setw(12) << s.queries_per_v << std::setw(12) << s.cached_v_total << std::setw(9) << s.sharing_ratio
           << "x\n";
    return os.str();
}

} // namespace attnlab
