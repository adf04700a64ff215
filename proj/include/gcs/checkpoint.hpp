#pragma once
#include <cstdint>
#include <fstream>
#include <string>

#include "json.hpp"

#include "gcs/error.hpp"
#include "gcs/matrix.hpp"
#include "gcs/mi.hpp"
#include "gcs/model.hpp"

namespace gcs {

// Checkpoint: simulator weights plus the statistic network, as JSON with
// full-precision decimals. Desk-scale models stay human-diffable this way.

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw DataError("checkpoint: " + what + " is not a nested array");
    Matrix m(j.size(), j[0].size());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (j[i].size() != m.cols())
            throw DataError("checkpoint: ragged rows in " + what);
        for (std::size_t c = 0; c < m.cols(); ++c)
            m(i, c) = j[i][c].get<double>();
    }
    return m;
}

} // namespace detail

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    GcsParams gcs;
    StatNetParams stat;
    std::uint64_t seed = 0;
    nlohmann::json config; // reproduction recipe echoed by the trainer CLI
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
    const auto& p = ck.gcs;
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["kind"] = "gcs-checkpoint";
    j["dim"] = p.dim;
    j["heads"] = p.head_count;
    j["attn_dim"] = p.attn_dim;
    j["temperature"] = p.temperature;
    j["dropout"] = p.dropout_rate;
    j["seed"] = ck.seed;
    j["w_in"] = detail::matrix_to_json(p.w_in);
    j["b_in"] = p.b_in;
    nlohmann::json heads = nlohmann::json::array();
    for (std::size_t h = 0; h < p.head_count; ++h)
        heads.push_back({{"wq", detail::matrix_to_json(p.wq[h])},
                         {"wk", detail::matrix_to_json(p.wk[h])},
                         {"wv", detail::matrix_to_json(p.wv[h])}});
    j["attention_heads"] = std::move(heads);
    j["w_out"] = detail::matrix_to_json(p.w_out);
    j["b_out"] = p.b_out;
    j["stat"] = {{"z_dim", ck.stat.z_dim},
                 {"h_dim", ck.stat.h_dim},
                 {"hidden", ck.stat.hidden},
                 {"w1", detail::matrix_to_json(ck.stat.w1)},
                 {"b1", ck.stat.b1},
                 {"w2", ck.stat.w2},
                 {"b2", ck.stat.b2}};
    if (!ck.config.is_null())
        j["config"] = ck.config;
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != kCheckpointVersion)
        throw DataError("checkpoint: version mismatch");
    Checkpoint ck;
    auto& p = ck.gcs;
    p.dim = j.at("dim").get<std::size_t>();
    p.head_count = j.at("heads").get<std::size_t>();
    p.attn_dim = j.at("attn_dim").get<std::size_t>();
    p.temperature = j.at("temperature").get<double>();
    p.dropout_rate = j.at("dropout").get<double>();
    ck.seed = j.at("seed").get<std::uint64_t>();
    p.w_in = detail::matrix_from_json(j.at("w_in"), "w_in");
    p.b_in = j.at("b_in").get<std::vector<double>>();
    for (const auto& h : j.at("attention_heads")) {
        p.wq.push_back(detail::matrix_from_json(h.at("wq"), "wq"));
        p.wk.push_back(detail::matrix_from_json(h.at("wk"), "wk"));
        p.wv.push_back(detail::matrix_from_json(h.at("wv"), "wv"));
    }
    p.w_out = detail::matrix_from_json(j.at("w_out"), "w_out");
    p.b_out = j.at("b_out").get<std::vector<double>>();
    p.validate();

    const auto& s = j.at("stat");
    ck.stat.z_dim = s.at("z_dim").get<std::size_t>();
    ck.stat.h_dim = s.at("h_dim").get<std::size_t>();
    ck.stat.hidden = s.at("hidden").get<std::size_t>();
    ck.stat.w1 = detail::matrix_from_json(s.at("w1"), "stat.w1");
    ck.stat.b1 = s.at("b1").get<std::vector<double>>();
    ck.stat.w2 = s.at("w2").get<std::vector<double>>();
    ck.stat.b2 = s.at("b2").get<double>();
    ck.stat.validate();

    if (j.contains("config"))
        ck.config = j.at("config");
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(ck).dump(2) << '\n';
    if (!out)
        throw DataError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid JSON (" + e.what() + ")");
    }
    return checkpoint_from_json(j);
}

} // namespace gcs
