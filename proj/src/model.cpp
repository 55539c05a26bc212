#include "haad/model.hpp"

#include <sstream>
#include <stdexcept>

namespace haad::model {

std::unique_ptr<Model> make_model(const ModelConfig& config, std::uint64_t seed) {
    if (config.joints < 2 || (config.channels != 3 && config.channels != 6))
        throw std::invalid_argument("model: invalid joint/channel configuration");
    auto m = std::make_unique<Model>();
    m->config = config;
    m->enc = encoder::init_encoder(m->params, config.encoder, config.stream_dims(), seed);
    m->net = flow::init_flow(m->params, config.encoder.fuse_dim, config.flow_layers, seed);
    return m;
}

ClipForward clip_forward(const Model& model, const motion::MotionClip& clip) {
    const int m_coeffs = model.config.encoder.coefficients;
    if (static_cast<int>(clip.frames) < m_coeffs) {
        std::ostringstream os;
        os << "clip " << clip.id << ": " << clip.frames << " frames < M=" << m_coeffs;
        throw std::runtime_error(os.str());
    }
    const ad::Matrix traj = motion::preprocess(clip);
    const auto parts = motion::split_parts(traj, model.config.partition, clip.channels);
    const dct::DctBasis basis = dct::make_basis(static_cast<int>(clip.frames), m_coeffs);

    auto coeffs = [&](const ad::Matrix& x) {
        return ad::constant(dct::dct_forward(x, basis).C);
    };
    ClipForward out;
    out.features =
        encoder::encoder_forward(model.enc, coeffs(traj), coeffs(parts.upper), coeffs(parts.lower));
    out.flow = flow::flow_forward(out.features.f_all, model.net);
    return out;
}

void check_compatible(const Model& model, const motion::DatasetManifest& manifest) {
    if (manifest.skeleton != model.config.skeleton ||
        manifest.partition.upper != model.config.partition.upper ||
        manifest.partition.lower != model.config.partition.lower)
        throw std::runtime_error("dataset skeleton/partition disagrees with the model");
    if (!manifest.clips.empty() &&
        manifest.clips.front().channels != model.config.channels)
        throw std::runtime_error("dataset channel count disagrees with the model");
}

}  // namespace haad::model
