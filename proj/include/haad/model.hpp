#pragma once

#include "haad/autodiff.hpp"
#include "haad/dct.hpp"
#include "haad/encoder.hpp"
#include "haad/flow.hpp"
#include "haad/motion.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace haad::model {

struct ModelConfig {
    std::string normal_label;
    std::uint32_t joints = 0;
    std::uint32_t channels = 0;
    std::vector<std::string> skeleton;
    motion::BodyPartition partition;
    encoder::EncoderConfig encoder;
    int flow_layers = 10;

    int pose_dim() const { return static_cast<int>(joints * channels); }
    encoder::StreamDims stream_dims() const {
        return {pose_dim(), static_cast<int>(partition.upper.size() * channels),
                static_cast<int>(partition.lower.size() * channels)};
    }
};

// Encoder plus flow with one shared parameter registry.
struct Model {
    ModelConfig config;
    ad::ParamStore params;
    encoder::EncoderParams enc;
    flow::FlowNetwork net;
};

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed);

struct ClipForward {
    encoder::MultiLevelFeatures features;
    flow::FlowOutput flow;
};

// preprocess -> per-stream DCT (per-clip basis, shared M) -> encoder -> flow.
ClipForward clip_forward(const Model& model, const motion::MotionClip& clip);

// Checks the manifest's skeleton and partition against the model's.
void check_compatible(const Model& model, const motion::DatasetManifest& manifest);

}  // namespace haad::model
