#pragma once

#include "haad/autodiff.hpp"
#include "haad/rng.hpp"

#include <string>
#include <vector>

namespace haad::encoder {

using ad::NodePtr;

struct EncoderConfig {
    int layers = 4;      // GCN depth L
    int hidden = 128;
    int d_out = 16;      // final GCN feature width
    int fuse_dim = 128;  // fused vector width, also the flow dimension
    int coefficients = 10;  // shared DCT coefficient count M
    bool use_upper = true;
    bool use_lower = true;
};

// Node counts of the three streams: full body and the two body subsets.
struct StreamDims {
    int full = 0;   // P
    int upper = 0;  // P_up
    int lower = 0;  // P_low
};

struct GcnLayer {
    NodePtr adjacency;  // P_s x P_s
    NodePtr weight;     // D x D_hat
};

struct FusionParams {
    NodePtr glb_w, glb_b;
    NodePtr loc_w, loc_b;
    NodePtr all_w, all_b;
};

struct EncoderParams {
    EncoderConfig config;
    StreamDims dims;
    std::vector<GcnLayer> full, upper, lower;
    FusionParams fusion;
};

struct MultiLevelFeatures {
    NodePtr f_up;   // flattened upper-stream embedding
    NodePtr f_low;  // flattened lower-stream embedding
    NodePtr f_glb;  // fuse_dim x 1
    NodePtr f_loc;  // fuse_dim x 1
    NodePtr f_all;  // fuse_dim x 1
};

// sigma(A * F * W); identity activation when last = true, tanh otherwise.
NodePtr gcn_layer_forward(const NodePtr& features, const GcnLayer& layer, bool last);

NodePtr stream_forward(const NodePtr& coeffs, const std::vector<GcnLayer>& layers);

MultiLevelFeatures fuse(const NodePtr& glb_raw, const NodePtr& up_raw,
                        const NodePtr& low_raw, const EncoderParams& params);

// Registers all encoder parameters under "encoder." names.
EncoderParams init_encoder(ad::ParamStore& store, const EncoderConfig& config,
                           const StreamDims& dims, std::uint64_t seed);

// Full multi-level pass over the per-stream DCT coefficient matrices.
// Disabled subset streams contribute zero embeddings to the fusion.
MultiLevelFeatures encoder_forward(const EncoderParams& params, const NodePtr& coeffs_full,
                                   const NodePtr& coeffs_up, const NodePtr& coeffs_low);

}  // namespace haad::encoder
