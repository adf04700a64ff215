// gcs: knowledge-integration probe toolkit.
//
// Pipeline: synth -> train -> interpret -> report; verify runs the seeded
// verification suites. Every randomized subcommand requires an explicit
// --seed; outputs are byte-deterministic for a fixed seed and platform.
//
// Exit codes: 0 ok, 1 failed verify suite, 2 usage, 3 data error,
// 4 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gcs/baseline.hpp"
#include "gcs/checkpoint.hpp"
#include "gcs/embedding.hpp"
#include "gcs/error.hpp"
#include "gcs/graph.hpp"
#include "gcs/interpret.hpp"
#include "gcs/matrix.hpp"
#include "gcs/mi.hpp"
#include "gcs/model.hpp"
#include "gcs/spectral.hpp"
#include "gcs/synth.hpp"
#include "gcs/trainer.hpp"
#include "gcs/verify.hpp"

namespace fs = std::filesystem;

namespace {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw gcs::DataError("cannot open for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw gcs::DataError("cannot write: " + path);
    out << text;
    if (!out)
        throw gcs::DataError("write failed: " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw gcs::DataError("cannot create output directory " + dir + ": " + ec.message());
}

void write_entropy_csv(const std::string& path, const std::vector<double>& values) {
    std::string text = "entropy_bits\n";
    for (double v : values)
        text += gcs::format_double(v) + "\n";
    write_text(path, text);
}

struct SynthArgs {
    std::string out;
    std::uint64_t seed = 0;
    gcs::PlantedConfig cfg;
};

int cmd_synth(const SynthArgs& a) {
    gcs::PlantedConfig cfg = a.cfg;
    cfg.seed = a.seed;
    gcs::PlantedInstance inst = gen_planted(cfg);
    gcs::verify_planted(inst);
    ensure_dir(a.out);

    gcs::save_edge_list(inst.graph, a.out + "/graph.tsv");
    gcs::save_embeddings(inst.x_base, a.out + "/base.gcse");
    gcs::save_embeddings(inst.x_enh, a.out + "/enhanced.gcse");

    nlohmann::json truth;
    truth["schema_version"] = 1;
    truth["kind"] = "gcs-synth-truth";
    truth["config"] = {{"nodes", cfg.n_nodes},         {"avg_degree", cfg.avg_degree},
                       {"planted_fraction", cfg.planted_fraction},
                       {"cr_fraction", cfg.cr_fraction}, {"cf_fraction", cfg.cf_fraction},
                       {"dim", cfg.dim},               {"beta", cfg.beta},
                       {"sigma", cfg.sigma},           {"seed", cfg.seed}};
    truth["node_count"] = inst.graph.node_count();
    truth["edge_count"] = inst.graph.edge_count();
    nlohmann::json planted = nlohmann::json::array();
    for (std::size_t e = 0; e < inst.graph.edge_count(); ++e)
        if (inst.edge_is_planted[e])
            planted.push_back({inst.graph.edges()[e].first, inst.graph.edges()[e].second});
    truth["planted_edges"] = std::move(planted);
    truth["cr_nodes"] = inst.cr_nodes;
    truth["cf_nodes"] = inst.cf_nodes;
    write_text(a.out + "/truth.json", truth.dump(2) + "\n");

    std::cout << "wrote " << a.out << "/{graph.tsv, base.gcse, enhanced.gcse, truth.json}: "
              << inst.graph.node_count() << " nodes, " << inst.graph.edge_count() << " edges\n";
    return 0;
}

struct TrainArgs {
    std::string graph, base, enhanced, out;
    gcs::TrainConfig cfg;
};

int cmd_train(const TrainArgs& a) {
    const gcs::Graph g = gcs::load_edge_list(a.graph);
    const gcs::Matrix x = gcs::load_embeddings(a.base);
    const gcs::Matrix h = gcs::load_embeddings(a.enhanced);
    const gcs::TrainResult tr = gcs::train(g, x, h, a.cfg);
    ensure_dir(a.out);

    nlohmann::json config = {{"graph", a.graph},
                             {"base", a.base},
                             {"enhanced", a.enhanced},
                             {"seed", a.cfg.seed},
                             {"epochs", a.cfg.epochs},
                             {"lr", a.cfg.lr},
                             {"heads", a.cfg.heads},
                             {"attn_dim", a.cfg.attn_dim},
                             {"temperature", a.cfg.temperature},
                             {"dropout", a.cfg.dropout},
                             {"stat_hidden", a.cfg.stat_hidden},
                             {"subsample", a.cfg.subsample_nodes},
                             {"log_every", a.cfg.log_every}};
    gcs::Checkpoint ck{tr.gcs, tr.stat, a.cfg.seed, config};
    gcs::save_checkpoint(ck, a.out + "/checkpoint.json");

    std::string csv = "step,bound_nats\n";
    for (const auto& [step, bound] : tr.mi_curve)
        csv += std::to_string(step) + "," + gcs::format_double(bound) + "\n";
    write_text(a.out + "/mi_curve.csv", csv);

    const double first = tr.mi_curve.empty() ? 0.0 : tr.mi_curve.front().second;
    const double last = tr.mi_curve.empty() ? 0.0 : tr.mi_curve.back().second;
    std::cout << "trained " << a.cfg.epochs << " epochs; bound " << first << " -> " << last
              << " nats; wrote " << a.out << "/{checkpoint.json, mi_curve.csv}\n";
    return 0;
}

struct InterpretArgs {
    std::string graph, base, model, out;
    gcs::InterpretThresholds th;
    std::size_t leaf_max_degree = 1;
    std::size_t center_min_degree = 2;
};

int cmd_interpret(const InterpretArgs& a) {
    const gcs::Graph g = gcs::load_edge_list(a.graph);
    const gcs::Matrix x = gcs::load_embeddings(a.base);
    const gcs::Checkpoint ck = gcs::load_checkpoint(a.model);
    if (x.cols() != ck.gcs.dim)
        throw gcs::DataError("embedding dim " + std::to_string(x.cols()) +
                             " != checkpoint dim " + std::to_string(ck.gcs.dim));

    // interpretation always runs in eval mode: dropout would break bijectivity
    const gcs::GcsForward fwd = gcs::gcs_forward(ck.gcs, g, x, /*training=*/false);

    nlohmann::json config = {{"graph", a.graph},
                             {"base", a.base},
                             {"model", a.model},
                             {"edge_threshold", a.th.edge_integrated},
                             {"cr_threshold", a.th.self_cr},
                             {"cf_threshold", a.th.self_cf},
                             {"leaf_max_degree", a.leaf_max_degree},
                             {"center_min_degree", a.center_min_degree}};
    gcs::Provenance prov;
    prov.seed = ck.seed;
    prov.config_hash = fnv1a_hex(config.dump());
    prov.checkpoint_hash = hash_file(a.model);

    gcs::InterpretReport rep =
        gcs::classify(fwd.attn, g, a.th, a.leaf_max_degree, a.center_min_degree, prov);
    rep.cli_config = config;
    ensure_dir(a.out);
    gcs::write_report(rep, a.out + "/report.json");
    gcs::write_edge_csv(rep, a.out + "/edges.csv");

    std::cout << "integrated " << rep.summary.integrated_count << "/" << rep.summary.edge_count
              << " edges (" << rep.summary.integrated_pct << "%), CR " << rep.summary.cr_pct
              << "%, CF " << rep.summary.cf_pct << "%; wrote " << a.out
              << "/{report.json, edges.csv}\n";
    return 0;
}

struct BaselineArgs {
    std::string graph, base, enhanced, out;
    int runs = 30;
    std::uint64_t seed = 0;
    gcs::VarianceConfig cfg;
};

int cmd_baseline(const BaselineArgs& a) {
    const gcs::Graph g = gcs::load_edge_list(a.graph);
    const gcs::Matrix x = gcs::load_embeddings(a.base);
    const gcs::Matrix h = gcs::load_embeddings(a.enhanced);
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < a.runs; ++k)
        seeds.push_back(gcs::derive_seed(a.seed, static_cast<std::uint64_t>(k)));
    const gcs::VarianceResult vr = gcs::variance_experiment(g, x, h, seeds, a.cfg);
    ensure_dir(a.out);
    write_entropy_csv(a.out + "/probe_entropy.csv", vr.probe_entropy);
    write_entropy_csv(a.out + "/gcs_entropy.csv", vr.gcs_entropy);
    write_entropy_csv(a.out + "/control_entropy.csv", vr.control_entropy);
    std::cout << "median entropy (bits): probe " << gcs::median(vr.probe_entropy) << ", gcs "
              << gcs::median(vr.gcs_entropy) << ", control " << gcs::median(vr.control_entropy)
              << "; wrote " << a.out << "/{probe,gcs,control}_entropy.csv\n";
    return 0;
}

struct SpectralCheckArgs {
    std::string graph;
    std::size_t nodes = 50;
    std::size_t dim = 8;
    std::uint64_t seed = 0;
};

int cmd_spectral_check(const SpectralCheckArgs& a) {
    gcs::Graph g = a.graph.empty()
                       ? gcs::random_connected_graph(a.nodes, a.nodes / 2, a.seed)
                       : gcs::load_edge_list(a.graph);
    const gcs::Matrix lap = gcs::normalized_laplacian(g);
    const auto dec = gcs::sym_eig(lap);
    const gcs::Matrix x =
        gcs::random_normal_matrix(g.node_count(), a.dim, gcs::derive_seed(a.seed, 7));
    const gcs::Matrix round = gcs::rgft(dec, gcs::gft(dec, x));

    const gcs::Matrix utu = gcs::matmul(gcs::transpose(dec.eigenvectors), dec.eigenvectors);
    double ortho = 0.0;
    for (std::size_t i = 0; i < utu.rows(); ++i)
        for (std::size_t j = 0; j < utu.cols(); ++j)
            ortho = std::max(ortho, std::abs(utu(i, j) - (i == j ? 1.0 : 0.0)));

    nlohmann::json out = {{"n", g.node_count()},
                          {"eigen_range", {dec.eigenvalues.front(), dec.eigenvalues.back()}},
                          {"roundtrip_error", gcs::max_abs_diff(round, x)},
                          {"orthogonality_error", ortho}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_graph_stats(const std::string& path) {
    const gcs::Graph g = gcs::load_edge_list(path);
    nlohmann::json deg;
    for (const auto& [d, count] : gcs::degree_histogram(g))
        deg[std::to_string(d)] = count;
    nlohmann::json ann;
    for (const auto& [label, count] : gcs::annotation_histogram(g))
        ann[label] = count;
    nlohmann::json out = {{"nodes", g.node_count()},
                          {"edges", g.edge_count()},
                          {"self_loops_dropped", g.self_loops_dropped()},
                          {"duplicates_merged", g.duplicates_merged()},
                          {"degree_histogram", deg},
                          {"annotation_histogram", ann}};
    std::cout << out.dump(2) << '\n';
    return 0;
}

int cmd_verify(const std::string& suite) {
    nlohmann::json out;
    bool passed = false;
    if (suite == "spectral") {
        const auto r = gcs::run_spectral_suite();
        out = gcs::to_json(r);
        passed = r.passed;
    } else if (suite == "gradcheck") {
        const auto r = gcs::run_gradcheck_suite();
        out = gcs::to_json(r);
        passed = r.passed;
    } else if (suite == "mi-gaussian") {
        const auto r = gcs::run_mi_gaussian_suite();
        out = gcs::to_json(r);
        passed = r.passed;
    } else if (suite == "planted") {
        const auto r = gcs::run_planted_suite();
        out = gcs::to_json(r);
        passed = r.passed;
    } else if (suite == "variance") {
        const auto r = gcs::run_variance_suite();
        out = gcs::to_json(r);
        passed = r.passed;
    }
    std::cout << out.dump(2) << '\n';
    return passed ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph Convolution Simulator probe toolkit: trains a bijective-MLP / "
                 "graph-attention / bijective-MLP simulator of knowledge integration and "
                 "interprets the learned attention coefficients.",
                 "gcs"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a planted benchmark instance");
    s_synth->add_option("--out", synth.out, "output directory")->required();
    s_synth->add_option("--seed", synth.seed, "RNG seed (required; no wall-clock seeding)")->required();
    s_synth->add_option("--nodes", synth.cfg.n_nodes, "node count before keeping the largest component");
    s_synth->add_option("--avg-degree", synth.cfg.avg_degree, "target average degree (edges per node)");
    s_synth->add_option("--planted-fraction", synth.cfg.planted_fraction, "fraction of edges planted as integrated");
    s_synth->add_option("--cr-fraction", synth.cfg.cr_fraction, "fraction of nodes planted as CR");
    s_synth->add_option("--cf-fraction", synth.cfg.cf_fraction, "fraction of nodes planted as CF");
    s_synth->add_option("--dim", synth.cfg.dim, "embedding dimension");
    s_synth->add_option("--beta", synth.cfg.beta, "self-mixing weight in [0,1]");
    s_synth->add_option("--sigma", synth.cfg.sigma, "noise standard deviation");

    TrainArgs train_args;
    auto* s_train = app.add_subcommand("train", "Train the simulator on base/enhanced embeddings");
    s_train->add_option("--graph", train_args.graph, "edge-list TSV path")->required();
    s_train->add_option("--base", train_args.base, "base embeddings (GCSE) path")->required();
    s_train->add_option("--enhanced", train_args.enhanced, "enhanced embeddings (GCSE) path")->required();
    s_train->add_option("--out", train_args.out, "output directory")->required();
    s_train->add_option("--seed", train_args.cfg.seed, "RNG seed (required; no wall-clock seeding)")->required();
    s_train->add_option("--epochs", train_args.cfg.epochs, "full-batch training epochs (count)");
    s_train->add_option("--lr", train_args.cfg.lr, "Adam learning rate");
    s_train->add_option("--heads", train_args.cfg.heads, "attention head count");
    s_train->add_option("--attn-dim", train_args.cfg.attn_dim, "attention projection dimension");
    s_train->add_option("--temperature", train_args.cfg.temperature, "softmax temperature (> 0)");
    s_train->add_option("--dropout", train_args.cfg.dropout, "MLP dropout rate in [0,1)");
    s_train->add_option("--stat-hidden", train_args.cfg.stat_hidden, "statistic-network hidden width");
    s_train->add_option("--subsample", train_args.cfg.subsample_nodes, "train on a subgraph of this many nodes (0 = full graph)");
    s_train->add_option("--log-every", train_args.cfg.log_every, "record the MI bound every N steps");

    InterpretArgs interp;
    auto* s_interp = app.add_subcommand("interpret", "Classify triples/entities from attention");
    s_interp->add_option("--graph", interp.graph, "edge-list TSV path")->required();
    s_interp->add_option("--base", interp.base, "base embeddings (GCSE) path")->required();
    s_interp->add_option("--model", interp.model, "checkpoint JSON path")->required();
    s_interp->add_option("--out", interp.out, "output directory")->required();
    s_interp->add_option("--edge-threshold", interp.th.edge_integrated, "integrated-triple attention threshold");
    s_interp->add_option("--cr-threshold", interp.th.self_cr, "catastrophic-remembering self-attention threshold");
    s_interp->add_option("--cf-threshold", interp.th.self_cf, "catastrophic-forgetting self-attention threshold");
    s_interp->add_option("--leaf-max-degree", interp.leaf_max_degree, "max degree of a leaf node (topology classes)");
    s_interp->add_option("--center-min-degree", interp.center_min_degree, "min degree of a center node (topology classes)");

    BaselineArgs base_args;
    auto* s_base = app.add_subcommand("baseline", "Linear-probe vs GCS variance experiment");
    s_base->add_option("--graph", base_args.graph, "edge-list TSV path")->required();
    s_base->add_option("--base", base_args.base, "base embeddings (GCSE) path")->required();
    s_base->add_option("--enhanced", base_args.enhanced, "enhanced embeddings (GCSE) path")->required();
    s_base->add_option("--out", base_args.out, "output directory")->required();
    s_base->add_option("--seed", base_args.seed, "RNG seed (required; no wall-clock seeding)")->required();
    s_base->add_option("--runs", base_args.runs, "number of seeded runs (count)");
    s_base->add_option("--neg-per-pos", base_args.cfg.neg_per_pos, "negative samples per edge");
    s_base->add_option("--probe-lr", base_args.cfg.probe_lr, "logistic probe learning rate");
    s_base->add_option("--probe-epochs", base_args.cfg.probe_epochs, "logistic probe epochs (count)");
    s_base->add_option("--epochs", base_args.cfg.gcs.epochs, "GCS training epochs per run (count)");
    s_base->add_option("--heads", base_args.cfg.gcs.heads, "GCS attention head count");
    s_base->add_option("--attn-dim", base_args.cfg.gcs.attn_dim, "GCS attention projection dimension");
    s_base->add_option("--temperature", base_args.cfg.gcs.temperature, "GCS softmax temperature (> 0)");
    s_base->add_option("--dropout", base_args.cfg.gcs.dropout, "GCS dropout rate in [0,1)");
    s_base->add_option("--edge-threshold", base_args.cfg.edge_threshold, "integrated-triple attention threshold");

    std::string suite;
    auto* s_verify = app.add_subcommand("verify", "Run a seeded verification suite");
    s_verify->add_option("--suite", suite, "one of: spectral, gradcheck, mi-gaussian, planted, variance")
        ->required()
        ->check(CLI::IsMember({"spectral", "gradcheck", "mi-gaussian", "planted", "variance"}));

    SpectralCheckArgs spec_args;
    auto* s_spec = app.add_subcommand("spectral-check", "GFT identities on one graph, as JSON");
    s_spec->add_option("--graph", spec_args.graph, "edge-list TSV path (omit for a random graph)");
    s_spec->add_option("--nodes", spec_args.nodes, "random graph size when --graph is omitted");
    s_spec->add_option("--dim", spec_args.dim, "signal dimension for the roundtrip check");
    s_spec->add_option("--seed", spec_args.seed, "RNG seed for the random graph and signal");

    std::string stats_graph;
    auto* s_stats = app.add_subcommand("graph-stats", "Degree/annotation histograms as JSON");
    s_stats->add_option("--graph", stats_graph, "edge-list TSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(s_synth))
            return cmd_synth(synth);
        if (app.got_subcommand(s_train))
            return cmd_train(train_args);
        if (app.got_subcommand(s_interp))
            return cmd_interpret(interp);
        if (app.got_subcommand(s_base))
            return cmd_baseline(base_args);
        if (app.got_subcommand(s_verify))
            return cmd_verify(suite);
        if (app.got_subcommand(s_spec))
            return cmd_spectral_check(spec_args);
        if (app.got_subcommand(s_stats))
            return cmd_graph_stats(stats_graph);
    } catch (const gcs::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const gcs::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const gcs::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
