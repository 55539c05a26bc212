#include "haad/encoder.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace haad::encoder {

using ad::Matrix;

namespace {

Matrix uniform_init(int rows, int cols, double bound, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
}

std::vector<GcnLayer> init_stream(ad::ParamStore& store, const std::string& name,
                                  int nodes, const EncoderConfig& cfg, Rng& rng) {
    if (cfg.layers < 2) throw std::invalid_argument("encoder: need at least 2 GCN layers");
    std::vector<GcnLayer> layers;
    for (int l = 0; l < cfg.layers; ++l) {
        const int in = (l == 0) ? cfg.coefficients : cfg.hidden;
        const int out = (l == cfg.layers - 1) ? cfg.d_out : cfg.hidden;
        std::ostringstream base;
        base << "encoder." << name << ".layer" << (l < 10 ? "0" : "") << l;
        GcnLayer layer;
        layer.adjacency = store.create(
            base.str() + ".A", uniform_init(nodes, nodes, 1.0 / std::sqrt(nodes), rng));
        layer.weight =
            store.create(base.str() + ".W", uniform_init(in, out, 1.0 / std::sqrt(in), rng));
        layers.push_back(std::move(layer));
    }
    return layers;
}

NodePtr affine(const NodePtr& w, const NodePtr& x, const NodePtr& b) {
    return ad::add(ad::matmul(w, x), b);
}

}  // namespace

NodePtr gcn_layer_forward(const NodePtr& features, const GcnLayer& layer, bool last) {
    NodePtr out = ad::matmul(ad::matmul(layer.adjacency, features), layer.weight);
    return last ? out : ad::tanh_op(out);
}

NodePtr stream_forward(const NodePtr& coeffs, const std::vector<GcnLayer>& layers) {
    NodePtr f = coeffs;
    for (std::size_t l = 0; l < layers.size(); ++l)
        f = gcn_layer_forward(f, layers[l], l + 1 == layers.size());
    return f;
}

MultiLevelFeatures fuse(const NodePtr& glb_raw, const NodePtr& up_raw,
                        const NodePtr& low_raw, const EncoderParams& params) {
    const auto& fp = params.fusion;
    MultiLevelFeatures out;
    out.f_up = ad::flatten(up_raw);
    out.f_low = ad::flatten(low_raw);
    out.f_glb = ad::tanh_op(affine(fp.glb_w, ad::flatten(glb_raw), fp.glb_b));
    out.f_loc = ad::tanh_op(
        affine(fp.loc_w, ad::concat_rows({out.f_up, out.f_low}), fp.loc_b));
    out.f_all = affine(fp.all_w, ad::concat_rows({out.f_glb, out.f_loc}), fp.all_b);
    return out;
}

EncoderParams init_encoder(ad::ParamStore& store, const EncoderConfig& config,
                           const StreamDims& dims, std::uint64_t seed) {
    if (config.hidden < 1 || config.d_out < 1 || config.fuse_dim < 1)
        throw std::invalid_argument("encoder: widths must be positive");
    EncoderParams p;
    p.config = config;
    p.dims = dims;
    {
        Rng rng = stream_rng(seed, "init/encoder/full");
        p.full = init_stream(store, "full", dims.full, config, rng);
    }
    {
        Rng rng = stream_rng(seed, "init/encoder/up");
        p.upper = init_stream(store, "up", dims.upper, config, rng);
    }
    {
        Rng rng = stream_rng(seed, "init/encoder/low");
        p.lower = init_stream(store, "low", dims.lower, config, rng);
    }

    Rng rng = stream_rng(seed, "init/encoder/fuse");
    const int glb_in = dims.full * config.d_out;
    const int loc_in = (dims.upper + dims.lower) * config.d_out;
    const int all_in = 2 * config.fuse_dim;
    auto& fp = p.fusion;
    fp.glb_w = store.create("encoder.fuse.glb.W",
                            uniform_init(config.fuse_dim, glb_in, 1.0 / std::sqrt(glb_in), rng));
    fp.glb_b = store.create("encoder.fuse.glb.b", Matrix::Zero(config.fuse_dim, 1));
    fp.loc_w = store.create("encoder.fuse.loc.W",
                            uniform_init(config.fuse_dim, loc_in, 1.0 / std::sqrt(loc_in), rng));
    fp.loc_b = store.create("encoder.fuse.loc.b", Matrix::Zero(config.fuse_dim, 1));
    fp.all_w = store.create("encoder.fuse.all.W",
                            uniform_init(config.fuse_dim, all_in, 1.0 / std::sqrt(all_in), rng));
    fp.all_b = store.create("encoder.fuse.all.b", Matrix::Zero(config.fuse_dim, 1));
    return p;
}

MultiLevelFeatures encoder_forward(const EncoderParams& params, const NodePtr& coeffs_full,
                                   const NodePtr& coeffs_up, const NodePtr& coeffs_low) {
    const auto& cfg = params.config;
    NodePtr glb_raw = stream_forward(coeffs_full, params.full);
    NodePtr up_raw =
        cfg.use_upper
            ? stream_forward(coeffs_up, params.upper)
            : ad::constant(Matrix::Zero(params.dims.upper, cfg.d_out));
    NodePtr low_raw =
        cfg.use_lower
            ? stream_forward(coeffs_low, params.lower)
            : ad::constant(Matrix::Zero(params.dims.lower, cfg.d_out));
    return fuse(glb_raw, up_raw, low_raw, params);
}

}  // namespace haad::encoder
