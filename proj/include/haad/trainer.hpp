#pragma once

#include "haad/model.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

namespace haad::trainer {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    std::string normal_label;
    int epochs = 50;
    int batch_size = 32;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    std::uint64_t seed = 0;
    AdamConfig adam;
    encoder::EncoderConfig encoder;  // includes the DCT coefficient count
    int flow_layers = 10;
    double holdout_fraction = 0.2;
};

// Exponential interpolation between the endpoint learning rates.
double lr_at(int epoch, const TrainConfig& config);

// Standard bias-corrected Adam over a fixed, ordered parameter list.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<ad::Parameter> params, AdamConfig config);
    void step(double lr);
    int steps_taken() const { return step_count_; }

private:
    std::vector<ad::Parameter> params_;
    std::vector<ad::Matrix> m_, v_;
    AdamConfig config_;
    int step_count_ = 0;
};

struct TrainedModel {
    std::unique_ptr<model::Model> model;
    Eigen::MatrixXd feature_bank;  // N x d penultimate flow features of fit clips
    double final_train_nll = 0.0;
    std::vector<double> epoch_train_nll;
    std::vector<double> epoch_holdout_nll;  // empty when there is no holdout
};

// Called after each epoch with (1-based epoch, mean train NLL).
using EpochCallback = std::function<void(int, double)>;

TrainedModel train(const motion::DatasetManifest& manifest, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

void save_model(const TrainedModel& trained, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace haad::trainer
