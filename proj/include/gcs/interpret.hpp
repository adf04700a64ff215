#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/model.hpp"

namespace gcs {

// Interpretation thresholds on head-averaged attention: an edge above
// edge_integrated counts as an integrated triple; self-loop attention above
// self_cr flags catastrophic remembering, below self_cf catastrophic
// forgetting.
struct InterpretThresholds {
    double edge_integrated = 0.1;
    double self_cr = 0.9;
    double self_cf = 0.1;

    void validate() const {
        if (!(edge_integrated > 0.0 && edge_integrated < 1.0))
            throw UsageError("edge_integrated threshold must be in (0,1)");
        if (!(self_cf > 0.0 && self_cf < self_cr && self_cr < 1.0))
            throw UsageError("need 0 < cf threshold < cr threshold < 1");
    }
};

enum class NodeKiClass { CR, CF, Neither };

inline const char* node_class_name(NodeKiClass c) {
    switch (c) {
    case NodeKiClass::CR: return "CR";
    case NodeKiClass::CF: return "CF";
    default: return "Neither";
    }
}

struct EdgeRow {
    NodeId u = 0, v = 0;
    double attn_uv = 0.0; // head-averaged a_{u->v}
    double attn_vu = 0.0;
    double attn_mean = 0.0;
    bool integrated = false;
    EdgeTopologyClass topology = EdgeTopologyClass::NOne;
};

struct NodeRow {
    NodeId id = 0;
    double self_attn = 0.0;
    NodeKiClass cls = NodeKiClass::Neither;
};

struct AttnHistogram {
    static constexpr std::size_t kBins = 20;
    std::array<std::size_t, kBins> counts{};

    void add(double v) {
        double clamped = std::clamp(v, 0.0, 1.0);
        std::size_t bin = static_cast<std::size_t>(clamped * kBins);
        if (bin == kBins)
            bin = kBins - 1;
        ++counts[bin];
    }
};

struct TopologyGroup {
    std::size_t edge_count = 0;
    std::size_t integrated_count = 0;
    double integrated_pct = 0.0;
    // entities incident to at least one edge of this class (groups overlap)
    std::size_t entity_count = 0;
    std::size_t cr_count = 0, cf_count = 0;
    double cr_pct = 0.0, cf_pct = 0.0;
};

struct ReportSummary {
    std::size_t edge_count = 0, node_count = 0;
    std::size_t integrated_count = 0, cr_count = 0, cf_count = 0;
    double integrated_pct = 0.0, cr_pct = 0.0, cf_pct = 0.0;
    std::array<TopologyGroup, 3> by_topology; // indexed by EdgeTopologyClass
    AttnHistogram edge_attn_hist, self_attn_hist;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string checkpoint_hash;
};

struct InterpretReport {
    static constexpr int kSchemaVersion = 1;
    InterpretThresholds thresholds;
    std::vector<EdgeRow> edges; // one row per graph edge
    std::vector<NodeRow> nodes;
    ReportSummary summary;
    Provenance provenance;
    nlohmann::json cli_config; // reproduction recipe echoed by the CLI; null otherwise
};

inline double percent(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

// Summaries are a pure function of the per-edge and per-node rows; classify
// uses this and report consumers can recompute it as a consistency check.
inline ReportSummary recompute_summary(const std::vector<EdgeRow>& edges,
                                       const std::vector<NodeRow>& nodes) {
    ReportSummary s;
    s.edge_count = edges.size();
    s.node_count = nodes.size();

    std::array<std::vector<char>, 3> in_group;
    for (auto& g : in_group)
        g.assign(nodes.size(), 0);

    for (const auto& e : edges) {
        const auto t = static_cast<std::size_t>(e.topology);
        ++s.by_topology[t].edge_count;
        if (e.integrated) {
            ++s.integrated_count;
            ++s.by_topology[t].integrated_count;
        }
        if (e.u < nodes.size())
            in_group[t][e.u] = 1;
        if (e.v < nodes.size())
            in_group[t][e.v] = 1;
        s.edge_attn_hist.add(e.attn_mean);
    }
    for (const auto& nrow : nodes) {
        if (nrow.cls == NodeKiClass::CR)
            ++s.cr_count;
        else if (nrow.cls == NodeKiClass::CF)
            ++s.cf_count;
        s.self_attn_hist.add(nrow.self_attn);
    }
    s.integrated_pct = percent(s.integrated_count, s.edge_count);
    s.cr_pct = percent(s.cr_count, s.node_count);
    s.cf_pct = percent(s.cf_count, s.node_count);

    for (std::size_t t = 0; t < 3; ++t) {
        auto& g = s.by_topology[t];
        g.integrated_pct = percent(g.integrated_count, g.edge_count);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!in_group[t][i])
                continue;
            ++g.entity_count;
            if (nodes[i].cls == NodeKiClass::CR)
                ++g.cr_count;
            else if (nodes[i].cls == NodeKiClass::CF)
                ++g.cf_count;
        }
        g.cr_pct = percent(g.cr_count, g.entity_count);
        g.cf_pct = percent(g.cf_count, g.entity_count);
    }
    return s;
}

// Attention (eval-mode) -> interpretation report. Undirected edge attention
// is the mean of the two directed coefficients; both are retained for audit.
inline InterpretReport classify(const AttentionRecord& attn, const Graph& g,
                                const InterpretThresholds& th,
                                std::size_t leaf_max_degree = 1, std::size_t center_min_degree = 2,
                                const Provenance& prov = {}) {
    th.validate();
    if (attn.node_count != g.node_count())
        throw DataError("classify: attention record does not match graph");

    InterpretReport rep;
    rep.thresholds = th;
    rep.provenance = prov;
    rep.edges.reserve(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const auto& [u, v] = g.edges()[e];
        EdgeRow row;
        row.u = u;
        row.v = v;
        row.attn_uv = attn.mean_coeff(u, v);
        row.attn_vu = attn.mean_coeff(v, u);
        row.attn_mean = 0.5 * (row.attn_uv + row.attn_vu);
        row.integrated = row.attn_mean > th.edge_integrated;
        row.topology = classify_edge_topology(g, u, v, leaf_max_degree, center_min_degree);
        rep.edges.push_back(row);
    }
    rep.nodes.reserve(g.node_count());
    for (NodeId i = 0; i < g.node_count(); ++i) {
        NodeRow row;
        row.id = i;
        row.self_attn = attn.self_mean(i);
        if (row.self_attn > th.self_cr)
            row.cls = NodeKiClass::CR;
        else if (row.self_attn < th.self_cf)
            row.cls = NodeKiClass::CF;
        rep.nodes.push_back(row);
    }
    rep.summary = recompute_summary(rep.edges, rep.nodes);
    return rep;
}

// Per-item classification entropy across K runs, in bits. p is the fraction
// of runs that flag the item; H(p) = -p log2 p - (1-p) log2 (1-p).
inline std::vector<double> entropy_of_runs(const std::vector<std::vector<char>>& runs) {
    if (runs.size() < 2)
        throw UsageError("entropy_of_runs: need at least 2 runs");
    const std::size_t items = runs.front().size();
    for (const auto& r : runs)
        if (r.size() != items)
            throw DataError("entropy_of_runs: runs are misaligned");
    std::vector<double> out(items);
    const double k = static_cast<double>(runs.size());
    for (std::size_t i = 0; i < items; ++i) {
        std::size_t ones = 0;
        for (const auto& r : runs)
            if (r[i])
                ++ones;
        const double p = static_cast<double>(ones) / k;
        double h = 0.0;
        if (p > 0.0)
            h -= p * std::log2(p);
        if (p < 1.0)
            h -= (1.0 - p) * std::log2(1.0 - p);
        out[i] = h;
    }
    return out;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw DataError("pearson: length mismatch");
    const std::size_t n = x.size();
    if (n < 2)
        throw DataError("pearson: need at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw DataError("pearson: zero-variance input");
    return sxy / std::sqrt(sxx * syy);
}

// Correlation between per-edge attention and external edge weights (e.g.
// aligned-sentence counts). Weights aligned with report.edges.
inline double attention_vs_weight_correlation(const InterpretReport& rep,
                                              std::span<const double> edge_weights) {
    if (edge_weights.size() != rep.edges.size())
        throw DataError("attention_vs_weight_correlation: weight count != edge count");
    std::vector<double> attn(rep.edges.size());
    for (std::size_t i = 0; i < rep.edges.size(); ++i)
        attn[i] = rep.edges[i].attn_mean;
    return pearson(attn, edge_weights);
}

// Parse the edge-list third column as numeric weights.
inline std::vector<double> edge_weights_from_annotations(const Graph& g) {
    if (!g.has_annotations())
        throw DataError("edge_weights_from_annotations: graph has no edge annotations");
    std::vector<double> out(g.edge_count());
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const std::string& s = g.annotations()[e];
        try {
            std::size_t used = 0;
            out[e] = std::stod(s, &used);
            if (used != s.size())
                throw std::invalid_argument(s);
        } catch (const std::exception&) {
            const auto& [u, v] = g.edges()[e];
            throw DataError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                            "): annotation '" + s + "' is not numeric");
        }
    }
    return out;
}

// ---- report JSON (schema version 1) ----

namespace detail {

inline nlohmann::json histogram_to_json(const AttnHistogram& h) {
    nlohmann::json j;
    j["lo"] = 0.0;
    j["hi"] = 1.0;
    j["counts"] = h.counts;
    return j;
}

inline AttnHistogram histogram_from_json(const nlohmann::json& j) {
    AttnHistogram h;
    const auto& counts = j.at("counts");
    if (counts.size() != AttnHistogram::kBins)
        throw DataError("report: bad histogram bin count");
    for (std::size_t i = 0; i < AttnHistogram::kBins; ++i)
        h.counts[i] = counts[i].get<std::size_t>();
    return h;
}

inline nlohmann::json group_to_json(const TopologyGroup& g) {
    return nlohmann::json{{"edge_count", g.edge_count},
                          {"integrated_count", g.integrated_count},
                          {"integrated_pct", g.integrated_pct},
                          {"entity_count", g.entity_count},
                          {"cr_count", g.cr_count},
                          {"cr_pct", g.cr_pct},
                          {"cf_count", g.cf_count},
                          {"cf_pct", g.cf_pct}};
}

inline TopologyGroup group_from_json(const nlohmann::json& j) {
    TopologyGroup g;
    g.edge_count = j.at("edge_count").get<std::size_t>();
    g.integrated_count = j.at("integrated_count").get<std::size_t>();
    g.integrated_pct = j.at("integrated_pct").get<double>();
    g.entity_count = j.at("entity_count").get<std::size_t>();
    g.cr_count = j.at("cr_count").get<std::size_t>();
    g.cr_pct = j.at("cr_pct").get<double>();
    g.cf_count = j.at("cf_count").get<std::size_t>();
    g.cf_pct = j.at("cf_pct").get<double>();
    return g;
}

inline EdgeTopologyClass topology_from_name(const std::string& s) {
    if (s == "1-1")
        return EdgeTopologyClass::OneOne;
    if (s == "N-1")
        return EdgeTopologyClass::NOne;
    if (s == "N-M")
        return EdgeTopologyClass::NM;
    throw DataError("report: unknown topology class '" + s + "'");
}

inline NodeKiClass node_class_from_name(const std::string& s) {
    if (s == "CR")
        return NodeKiClass::CR;
    if (s == "CF")
        return NodeKiClass::CF;
    if (s == "Neither")
        return NodeKiClass::Neither;
    throw DataError("report: unknown node class '" + s + "'");
}

} // namespace detail

inline nlohmann::json report_to_json(const InterpretReport& rep) {
    nlohmann::json j;
    j["schema_version"] = InterpretReport::kSchemaVersion;
    j["kind"] = "gcs-interpret-report";
    j["denominator"] = "undirected-edges";
    j["thresholds"] = {{"edge_integrated", rep.thresholds.edge_integrated},
                       {"self_cr", rep.thresholds.self_cr},
                       {"self_cf", rep.thresholds.self_cf}};
    j["provenance"] = {{"seed", rep.provenance.seed},
                       {"config_hash", rep.provenance.config_hash},
                       {"checkpoint_hash", rep.provenance.checkpoint_hash}};
    if (!rep.cli_config.is_null())
        j["cli_config"] = rep.cli_config;

    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : rep.edges)
        edges.push_back({e.u, e.v, e.attn_uv, e.attn_vu, e.attn_mean, e.integrated,
                         topology_name(e.topology)});
    j["edges"] = std::move(edges);

    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nrow : rep.nodes)
        nodes.push_back({nrow.id, nrow.self_attn, node_class_name(nrow.cls)});
    j["nodes"] = std::move(nodes);

    const auto& s = rep.summary;
    j["summary"] = {{"edge_count", s.edge_count},
                    {"node_count", s.node_count},
                    {"integrated_count", s.integrated_count},
                    {"integrated_pct", s.integrated_pct},
                    {"cr_count", s.cr_count},
                    {"cr_pct", s.cr_pct},
                    {"cf_count", s.cf_count},
                    {"cf_pct", s.cf_pct},
                    {"by_topology",
                     {{"1-1", detail::group_to_json(s.by_topology[0])},
                      {"N-1", detail::group_to_json(s.by_topology[1])},
                      {"N-M", detail::group_to_json(s.by_topology[2])}}},
                    {"edge_attention_histogram", detail::histogram_to_json(s.edge_attn_hist)},
                    {"self_attention_histogram", detail::histogram_to_json(s.self_attn_hist)}};
    return j;
}

inline InterpretReport report_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j.at("schema_version").get<int>() != InterpretReport::kSchemaVersion)
        throw DataError("report: schema version mismatch");
    InterpretReport rep;
    rep.thresholds.edge_integrated = j.at("thresholds").at("edge_integrated").get<double>();
    rep.thresholds.self_cr = j.at("thresholds").at("self_cr").get<double>();
    rep.thresholds.self_cf = j.at("thresholds").at("self_cf").get<double>();
    rep.provenance.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    rep.provenance.config_hash = j.at("provenance").at("config_hash").get<std::string>();
    rep.provenance.checkpoint_hash = j.at("provenance").at("checkpoint_hash").get<std::string>();
    if (j.contains("cli_config"))
        rep.cli_config = j.at("cli_config");

    for (const auto& e : j.at("edges")) {
        EdgeRow row;
        row.u = e.at(0).get<NodeId>();
        row.v = e.at(1).get<NodeId>();
        row.attn_uv = e.at(2).get<double>();
        row.attn_vu = e.at(3).get<double>();
        row.attn_mean = e.at(4).get<double>();
        row.integrated = e.at(5).get<bool>();
        row.topology = detail::topology_from_name(e.at(6).get<std::string>());
        rep.edges.push_back(row);
    }
    for (const auto& njson : j.at("nodes")) {
        NodeRow row;
        row.id = njson.at(0).get<NodeId>();
        row.self_attn = njson.at(1).get<double>();
        row.cls = detail::node_class_from_name(njson.at(2).get<std::string>());
        rep.nodes.push_back(row);
    }

    const auto& s = j.at("summary");
    rep.summary.edge_count = s.at("edge_count").get<std::size_t>();
    rep.summary.node_count = s.at("node_count").get<std::size_t>();
    rep.summary.integrated_count = s.at("integrated_count").get<std::size_t>();
    rep.summary.integrated_pct = s.at("integrated_pct").get<double>();
    rep.summary.cr_count = s.at("cr_count").get<std::size_t>();
    rep.summary.cr_pct = s.at("cr_pct").get<double>();
    rep.summary.cf_count = s.at("cf_count").get<std::size_t>();
    rep.summary.cf_pct = s.at("cf_pct").get<double>();
    rep.summary.by_topology[0] = detail::group_from_json(s.at("by_topology").at("1-1"));
    rep.summary.by_topology[1] = detail::group_from_json(s.at("by_topology").at("N-1"));
    rep.summary.by_topology[2] = detail::group_from_json(s.at("by_topology").at("N-M"));
    rep.summary.edge_attn_hist = detail::histogram_from_json(s.at("edge_attention_histogram"));
    rep.summary.self_attn_hist = detail::histogram_from_json(s.at("self_attention_histogram"));
    return rep;
}

inline void write_report(const InterpretReport& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write report: " + path);
    out << report_to_json(rep).dump(2) << '\n';
    if (!out)
        throw DataError("write failed: " + path);
}

inline InterpretReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON (" + e.what() + ")");
    }
    return report_from_json(j);
}

// 17 significant digits: round-trips any finite double through text.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Per-edge rows for plotting.
inline void write_edge_csv(const InterpretReport& rep, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write csv: " + path);
    out << "u,v,attn_uv,attn_vu,attn_mean,integrated,topology\n";
    for (const auto& e : rep.edges)
        out << e.u << ',' << e.v << ',' << format_double(e.attn_uv) << ','
            << format_double(e.attn_vu) << ',' << format_double(e.attn_mean) << ','
            << (e.integrated ? 1 : 0) << ',' << topology_name(e.topology) << '\n';
    if (!out)
        throw DataError("write failed: " + path);
}

} // namespace gcs
