// haad - one-class human action anomaly detection over skeletal motion clips.
//
// Subcommands: synth, train, eval, sweep, convert. All randomness is derived
// from --seed, so every command is reproducible to the byte on its outputs.

#include "haad/model.hpp"
#include "haad/motion.hpp"
#include "haad/scoring.hpp"
#include "haad/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using haad::motion::DatasetManifest;
using haad::scoring::ScoreReport;
using haad::trainer::TrainConfig;
using haad::trainer::TrainedModel;
using nlohmann::json;

struct RunConfig {
    TrainConfig train;
    int knn_k = 3;
};

void apply_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: parse failure: " + std::string(e.what()));
    }
    for (const auto& [key, value] : doc.items()) {
        if (key == "normal_label") cfg.train.normal_label = value.get<std::string>();
        else if (key == "epochs") cfg.train.epochs = value.get<int>();
        else if (key == "batch_size") cfg.train.batch_size = value.get<int>();
        else if (key == "lr_start") cfg.train.lr_start = value.get<double>();
        else if (key == "lr_end") cfg.train.lr_end = value.get<double>();
        else if (key == "seed") cfg.train.seed = value.get<std::uint64_t>();
        else if (key == "holdout_fraction") cfg.train.holdout_fraction = value.get<double>();
        else if (key == "m") cfg.train.encoder.coefficients = value.get<int>();
        else if (key == "gcn_layers") cfg.train.encoder.layers = value.get<int>();
        else if (key == "hidden") cfg.train.encoder.hidden = value.get<int>();
        else if (key == "d_out") cfg.train.encoder.d_out = value.get<int>();
        else if (key == "fuse_dim") cfg.train.encoder.fuse_dim = value.get<int>();
        else if (key == "flow_layers") cfg.train.flow_layers = value.get<int>();
        else if (key == "use_upper") cfg.train.encoder.use_upper = value.get<bool>();
        else if (key == "use_lower") cfg.train.encoder.use_lower = value.get<bool>();
        else if (key == "knn_k") cfg.knn_k = value.get<int>();
        else throw std::runtime_error("config: unknown key '" + key + "'");
    }
}

double evaluate(const TrainedModel& trained, const DatasetManifest& test,
                haad::scoring::Scheme scheme, int k, ScoreReport* out_report = nullptr) {
    ScoreReport report = haad::scoring::score_dataset(test, trained, scheme, k);
    haad::scoring::compute_auc(report);
    const double auc = report.auc;
    if (out_report) *out_report = std::move(report);
    return auc;
}

std::string format_auc(double auc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", auc);
    return buf;
}

int run(int argc, char** argv) {
    CLI::App app{"one-class human action anomaly detection"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic skeletal dataset");
    std::uint64_t synth_seed = 7;
    int per_class = 30;
    std::uint32_t h_min = 40, h_max = 60;
    double sigma = 0.01;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "root seed");
    synth->add_option("--per-class", per_class, "clips per action class")
        ->check(CLI::PositiveNumber);
    synth->add_option("--h-min", h_min, "minimum clip length in frames");
    synth->add_option("--h-max", h_max, "maximum clip length in frames");
    synth->add_option("--sigma", sigma, "per-frame Gaussian jitter scale");
    synth->add_option("--out", synth_out, "output directory")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a one-class model");
    std::string train_data, normal_label, model_out, config_path;
    RunConfig cfg;
    bool seed_given = false, m_given = false;
    std::uint64_t seed_flag = 0;
    int m_flag = 10, epochs_flag = -1, hidden_flag = -1, layers_flag = -1;
    int d_out_flag = -1, fuse_dim_flag = -1, batch_flag = -1;
    int use_upper_flag = -1, use_lower_flag = -1;
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file (flags win)");
        cmd->add_option("--seed", seed_flag, "root seed")
            ->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--m", m_flag, "retained DCT coefficients")
            ->each([&](const std::string&) { m_given = true; });
        cmd->add_option("--epochs", epochs_flag, "training epochs");
        cmd->add_option("--batch-size", batch_flag, "batch size");
        cmd->add_option("--hidden", hidden_flag, "GCN hidden width");
        cmd->add_option("--gcn-layers", layers_flag, "GCN depth");
        cmd->add_option("--d-out", d_out_flag, "GCN output feature width");
        cmd->add_option("--fuse-dim", fuse_dim_flag, "fused feature width");
        cmd->add_option("--use-upper", use_upper_flag, "enable the upper-body stream (0/1)");
        cmd->add_option("--use-lower", use_lower_flag, "enable the lower-body stream (0/1)");
    };
    train_cmd->add_option("--data", train_data, "training manifest")->required();
    train_cmd->add_option("--normal", normal_label, "normal action label")->required();
    train_cmd->add_option("--out", model_out, "model output path")->required();
    add_train_flags(train_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score a test manifest and report AUC");
    std::string eval_model, eval_data, scheme_name = "knn";
    std::string scores_path = "scores.csv", roc_path = "roc.csv";
    int knn_k_flag = -1;
    eval_cmd->add_option("--model", eval_model, "trained model file")->required();
    eval_cmd->add_option("--data", eval_data, "test manifest")->required();
    eval_cmd->add_option("--scheme", scheme_name, "scoring scheme: knn or nll");
    eval_cmd->add_option("--k", knn_k_flag, "KNN neighbor count");
    eval_cmd->add_option("--scores", scores_path, "per-clip score CSV path");
    eval_cmd->add_option("--roc", roc_path, "ROC CSV path");
    eval_cmd->add_option("--config", config_path, "JSON config file (flags win)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "ablation sweeps over one setting");
    std::string sweep_kind, sweep_data, sweep_test, sweep_out, sweep_values = "2,5,10";
    sweep_cmd->add_option("--kind", sweep_kind, "dct_m, scoring, or parts")->required();
    sweep_cmd->add_option("--data", sweep_data, "training manifest")->required();
    sweep_cmd->add_option("--test", sweep_test, "test manifest")->required();
    sweep_cmd->add_option("--normal", normal_label, "normal action label")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated M values for dct_m");
    sweep_cmd->add_option("--out", sweep_out, "output CSV path")->required();
    add_train_flags(sweep_cmd);

    // convert
    auto* convert_cmd =
        app.add_subcommand("convert", "convert third-party motion dumps to the clip codec");
    std::string convert_in, convert_out_dir, convert_format;
    convert_cmd->add_option("--input", convert_in, "third-party dump")->required();
    convert_cmd->add_option("--format", convert_format, "source format name");
    convert_cmd->add_option("--out", convert_out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }

    auto finish_config = [&]() {
        if (!config_path.empty()) apply_config_file(config_path, cfg);
        if (seed_given) cfg.train.seed = seed_flag;
        if (m_given) cfg.train.encoder.coefficients = m_flag;
        if (epochs_flag > 0) cfg.train.epochs = epochs_flag;
        if (batch_flag > 0) cfg.train.batch_size = batch_flag;
        if (hidden_flag > 0) cfg.train.encoder.hidden = hidden_flag;
        if (layers_flag > 0) cfg.train.encoder.layers = layers_flag;
        if (d_out_flag > 0) cfg.train.encoder.d_out = d_out_flag;
        if (fuse_dim_flag > 0) cfg.train.encoder.fuse_dim = fuse_dim_flag;
        if (use_upper_flag >= 0) cfg.train.encoder.use_upper = use_upper_flag != 0;
        if (use_lower_flag >= 0) cfg.train.encoder.use_lower = use_lower_flag != 0;
        if (knn_k_flag > 0) cfg.knn_k = knn_k_flag;
        if (!normal_label.empty()) cfg.train.normal_label = normal_label;
    };

    if (synth->parsed()) {
        haad::motion::synth_dataset(synth_seed, per_class, h_min, h_max, sigma, synth_out);
        std::cout << (std::filesystem::path(synth_out) / "manifest.json").string() << '\n';
        return 0;
    }

    if (train_cmd->parsed()) {
        finish_config();
        const DatasetManifest manifest = haad::motion::load_manifest(train_data);
        TrainedModel trained =
            haad::trainer::train(manifest, cfg.train, [](int epoch, double nll) {
                std::cout << "epoch=" << epoch << " nll=" << format_auc(nll) << '\n';
            });
        haad::trainer::save_model(trained, model_out);
        return 0;
    }

    if (eval_cmd->parsed()) {
        finish_config();
        const TrainedModel trained = haad::trainer::load_model(eval_model);
        const DatasetManifest test = haad::motion::load_manifest(eval_data);
        ScoreReport report;
        const double auc = evaluate(trained, test, haad::scoring::parse_scheme(scheme_name),
                                    cfg.knn_k, &report);
        haad::scoring::write_scores_csv(report, scores_path);
        haad::scoring::write_roc_csv(report, roc_path);
        std::cout << "auc=" << format_auc(auc) << '\n';
        return 0;
    }

    if (sweep_cmd->parsed()) {
        finish_config();
        const DatasetManifest train_manifest = haad::motion::load_manifest(sweep_data);
        const DatasetManifest test_manifest = haad::motion::load_manifest(sweep_test);
        std::vector<std::pair<std::string, double>> rows;

        if (sweep_kind == "dct_m") {
            std::stringstream ss(sweep_values);
            std::string token;
            while (std::getline(ss, token, ',')) {
                TrainConfig tc = cfg.train;
                tc.encoder.coefficients = std::stoi(token);
                const TrainedModel trained = haad::trainer::train(train_manifest, tc);
                rows.emplace_back("m=" + token,
                                  evaluate(trained, test_manifest,
                                           haad::scoring::Scheme::knn, cfg.knn_k));
            }
        } else if (sweep_kind == "scoring") {
            const TrainedModel trained = haad::trainer::train(train_manifest, cfg.train);
            rows.emplace_back("knn", evaluate(trained, test_manifest,
                                              haad::scoring::Scheme::knn, cfg.knn_k));
            rows.emplace_back("nll", evaluate(trained, test_manifest,
                                              haad::scoring::Scheme::nll, cfg.knn_k));
        } else if (sweep_kind == "parts") {
            const std::pair<const char*, std::pair<bool, bool>> settings[] = {
                {"full", {false, false}},
                {"full+up", {true, false}},
                {"full+low", {false, true}},
                {"full+up+low", {true, true}},
            };
            for (const auto& [name, streams] : settings) {
                TrainConfig tc = cfg.train;
                tc.encoder.use_upper = streams.first;
                tc.encoder.use_lower = streams.second;
                const TrainedModel trained = haad::trainer::train(train_manifest, tc);
                rows.emplace_back(name, evaluate(trained, test_manifest,
                                                 haad::scoring::Scheme::knn, cfg.knn_k));
            }
        } else {
            throw std::runtime_error("unknown sweep kind: '" + sweep_kind + "'");
        }

        std::ofstream out(sweep_out, std::ios::binary);
        if (!out) throw std::runtime_error("sweep: cannot write " + sweep_out);
        out << "setting,auc\n";
        for (const auto& [setting, auc] : rows) {
            out << setting << ',' << format_auc(auc) << '\n';
            std::cout << setting << ',' << format_auc(auc) << '\n';
        }
        return 0;
    }

    if (convert_cmd->parsed()) {
        // Hook for third-party dataset dumps (HumanAct12/UESTC style exports);
        // no source parser ships with the artifact yet.
        throw std::runtime_error("convert: no parser available for format '" +
                                 (convert_format.empty() ? "auto" : convert_format) +
                                 "'; write clips in the HAAD codec directly");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
