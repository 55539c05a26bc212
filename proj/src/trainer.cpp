#include "haad/trainer.hpp"

#include "haad/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace haad::trainer {

namespace {

using nlohmann::json;

constexpr char kModelMagic[8] = {'H', 'A', 'A', 'D', 'M', 'D', 'L', '1'};

void shuffle_indices(std::vector<std::size_t>& indices, Rng& rng) {
    for (std::size_t i = indices.size(); i > 1; --i)
        std::swap(indices[i - 1], indices[rng.next_u64() % i]);
}

void validate(const TrainConfig& c) {
    if (c.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (c.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(c.lr_end > 0.0 && c.lr_end <= c.lr_start))
        throw std::invalid_argument("train: need 0 < lr_end <= lr_start");
    if (c.holdout_fraction < 0.0 || c.holdout_fraction >= 1.0)
        throw std::invalid_argument("train: holdout fraction must be in [0, 1)");
}

}  // namespace

double lr_at(int epoch, const TrainConfig& config) {
    if (epoch < 0 || epoch > config.epochs)
        throw std::invalid_argument("lr_at: epoch out of range");
    const double t = static_cast<double>(epoch) / config.epochs;
    return config.lr_start * std::pow(config.lr_end / config.lr_start, t);
}

AdamOptimizer::AdamOptimizer(std::vector<ad::Parameter> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
        m_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
        v_.push_back(ad::Matrix::Zero(p.rows(), p.cols()));
    }
}

void AdamOptimizer::step(double lr) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, step_count_);
    const double bc2 = 1.0 - std::pow(config_.beta2, step_count_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        ad::Node& node = *params_[k].node;
        if (node.grad.size() == 0) node.zero_grad();
        if (node.grad.rows() != node.value.rows() || node.grad.cols() != node.value.cols())
            throw std::invalid_argument("adam: gradient shape mismatch for " + params_[k].name);
        m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * node.grad;
        v_[k] = config_.beta2 * v_[k] +
                (1.0 - config_.beta2) * node.grad.cwiseProduct(node.grad);
        const ad::Matrix m_hat = m_[k] / bc1;
        const ad::Matrix v_hat = v_[k] / bc2;
        node.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + config_.epsilon)).matrix();
    }
}

TrainedModel train(const motion::DatasetManifest& manifest, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
    validate(config);

    std::vector<motion::MotionClip> clips;
    bool label_seen = false;
    for (const auto& d : manifest.clips) {
        if (d.label != config.normal_label) continue;
        label_seen = true;
        clips.push_back(motion::read_clip(manifest, d));
    }
    if (!label_seen)
        throw std::runtime_error("label not found: '" + config.normal_label + "'");
    if (clips.size() < 2)
        throw std::runtime_error("insufficient normal samples (need at least 2)");
    for (const auto& c : clips)
        if (static_cast<int>(c.frames) < config.encoder.coefficients) {
            std::ostringstream os;
            os << "clip " << c.id << " has " << c.frames
               << " frames, fewer than M=" << config.encoder.coefficients;
            throw std::runtime_error(os.str());
        }

    model::ModelConfig mc;
    mc.normal_label = config.normal_label;
    mc.joints = manifest.joints();
    mc.channels = clips.front().channels;
    mc.skeleton = manifest.skeleton;
    mc.partition = manifest.partition;
    mc.encoder = config.encoder;
    mc.flow_layers = config.flow_layers;

    TrainedModel trained;
    trained.model = model::make_model(mc, config.seed);
    model::Model& model = *trained.model;

    // Seeded fit/holdout split; the holdout is monitored, never trained on.
    std::vector<std::size_t> order(clips.size());
    std::iota(order.begin(), order.end(), 0);
    {
        Rng rng = stream_rng(config.seed, "train/split");
        shuffle_indices(order, rng);
    }
    const std::size_t holdout_count =
        static_cast<std::size_t>(config.holdout_fraction * clips.size());
    std::vector<std::size_t> holdout(order.begin(), order.begin() + holdout_count);
    std::vector<std::size_t> fit(order.begin() + holdout_count, order.end());

    AdamOptimizer optimizer(model.params.ordered(), config.adam);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_at(epoch, config);
        std::vector<std::size_t> epoch_order = fit;
        {
            Rng rng = stream_rng(config.seed, "train/epoch/" + std::to_string(epoch));
            shuffle_indices(epoch_order, rng);
        }

        double epoch_nll = 0.0;
        for (std::size_t begin = 0; begin < epoch_order.size();
             begin += config.batch_size) {
            const std::size_t end =
                std::min(epoch_order.size(), begin + config.batch_size);
            std::vector<ad::NodePtr> losses;
            for (std::size_t i = begin; i < end; ++i)
                losses.push_back(flow::nll(clip_forward(model, clips[epoch_order[i]]).flow));
            ad::NodePtr loss =
                ad::scalar_mul(ad::sum_all(ad::concat_rows(losses)), 1.0 / losses.size());
            if (!std::isfinite(loss->scalar())) {
                std::ostringstream os;
                os << "train: non-finite loss at epoch " << epoch + 1 << ", batch starting "
                   << begin;
                throw std::runtime_error(os.str());
            }
            model.params.zero_grads();
            ad::backward(loss);
            optimizer.step(lr);
            epoch_nll += loss->scalar() * static_cast<double>(end - begin);
        }
        epoch_nll /= static_cast<double>(fit.size());
        trained.epoch_train_nll.push_back(epoch_nll);

        if (!holdout.empty()) {
            double hold = 0.0;
            for (std::size_t i : holdout)
                hold += flow::nll(clip_forward(model, clips[i]).flow)->scalar();
            trained.epoch_holdout_nll.push_back(hold / holdout.size());
        }
        if (on_epoch) on_epoch(epoch + 1, epoch_nll);
    }
    trained.final_train_nll = trained.epoch_train_nll.back();

    // Feature bank from fit clips only, in split order.
    const int dim = model.config.encoder.fuse_dim;
    trained.feature_bank.resize(static_cast<Eigen::Index>(fit.size()), dim);
    for (std::size_t r = 0; r < fit.size(); ++r)
        trained.feature_bank.row(static_cast<Eigen::Index>(r)) =
            clip_forward(model, clips[fit[r]]).flow.v->value.col(0).transpose();
    return trained;
}

// ---- serialization ---------------------------------------------------------

namespace {

json config_to_json(const model::ModelConfig& c) {
    return json{{"normal_label", c.normal_label},
                {"joints", c.joints},
                {"channels", c.channels},
                {"skeleton", c.skeleton},
                {"partition", {{"upper", c.partition.upper}, {"lower", c.partition.lower}}},
                {"encoder",
                 {{"layers", c.encoder.layers},
                  {"hidden", c.encoder.hidden},
                  {"d_out", c.encoder.d_out},
                  {"fuse_dim", c.encoder.fuse_dim},
                  {"coefficients", c.encoder.coefficients},
                  {"use_upper", c.encoder.use_upper},
                  {"use_lower", c.encoder.use_lower}}},
                {"flow_layers", c.flow_layers}};
}

model::ModelConfig config_from_json(const json& j) {
    model::ModelConfig c;
    c.normal_label = j.at("normal_label").get<std::string>();
    c.joints = j.at("joints").get<std::uint32_t>();
    c.channels = j.at("channels").get<std::uint32_t>();
    c.skeleton = j.at("skeleton").get<std::vector<std::string>>();
    c.partition.upper = j.at("partition").at("upper").get<std::vector<int>>();
    c.partition.lower = j.at("partition").at("lower").get<std::vector<int>>();
    const json& e = j.at("encoder");
    c.encoder.layers = e.at("layers").get<int>();
    c.encoder.hidden = e.at("hidden").get<int>();
    c.encoder.d_out = e.at("d_out").get<int>();
    c.encoder.fuse_dim = e.at("fuse_dim").get<int>();
    c.encoder.coefficients = e.at("coefficients").get<int>();
    c.encoder.use_upper = e.at("use_upper").get<bool>();
    c.encoder.use_lower = e.at("use_lower").get<bool>();
    c.flow_layers = j.at("flow_layers").get<int>();
    return c;
}

void write_doubles(std::ostream& out, const double* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t count) {
    if (!in.read(reinterpret_cast<char*>(data),
                 static_cast<std::streamsize>(count * sizeof(double))))
        throw std::runtime_error("truncated model");
}

}  // namespace

void save_model(const TrainedModel& trained, const std::filesystem::path& path) {
    const model::Model& model = *trained.model;
    const auto params = model.params.ordered();

    json header;
    header["format_version"] = 1;
    header["config"] = config_to_json(model.config);
    header["final_train_nll"] = trained.final_train_nll;
    header["params"] = json::array();
    for (const auto& p : params)
        header["params"].push_back(
            {{"name", p.name}, {"rows", p.rows()}, {"cols", p.cols()}});
    header["bank"] = {{"rows", trained.feature_bank.rows()},
                      {"cols", trained.feature_bank.cols()}};
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("model: cannot write " + path.string());
    out.write(kModelMagic, 8);
    const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
    unsigned char lb[4] = {static_cast<unsigned char>(len & 0xff),
                           static_cast<unsigned char>((len >> 8) & 0xff),
                           static_cast<unsigned char>((len >> 16) & 0xff),
                           static_cast<unsigned char>((len >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(lb), 4);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    for (const auto& p : params) {
        // row-major so the layout matches the header's (rows, cols) declaration
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
            p.node->value;
        write_doubles(out, rm.data(), static_cast<std::size_t>(rm.size()));
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bank =
        trained.feature_bank;
    write_doubles(out, bank.data(), static_cast<std::size_t>(bank.size()));
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("model: cannot open " + path.string());

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kModelMagic, 8) != 0)
        throw std::runtime_error("model: bad magic");
    unsigned char lb[4];
    if (!in.read(reinterpret_cast<char*>(lb), 4))
        throw std::runtime_error("truncated model");
    const std::uint32_t len = static_cast<std::uint32_t>(lb[0]) |
                              (static_cast<std::uint32_t>(lb[1]) << 8) |
                              (static_cast<std::uint32_t>(lb[2]) << 16) |
                              (static_cast<std::uint32_t>(lb[3]) << 24);
    std::string header_text(len, '\0');
    if (!in.read(header_text.data(), len)) throw std::runtime_error("truncated model");

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw std::runtime_error("model: malformed header: " + std::string(e.what()));
    }
    if (header.at("format_version").get<int>() != 1)
        throw std::runtime_error("model: version mismatch");

    TrainedModel trained;
    trained.model = model::make_model(config_from_json(header.at("config")), 0);
    trained.final_train_nll = header.at("final_train_nll").get<double>();

    const auto params = trained.model->params.ordered();
    const json& declared = header.at("params");
    if (declared.size() != params.size())
        throw std::runtime_error("model: parameter-count mismatch vs header");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const json& d = declared[k];
        if (d.at("name").get<std::string>() != params[k].name ||
            d.at("rows").get<Eigen::Index>() != params[k].rows() ||
            d.at("cols").get<Eigen::Index>() != params[k].cols())
            throw std::runtime_error("model: parameter layout mismatch at " + params[k].name);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
            params[k].rows(), params[k].cols());
        read_doubles(in, rm.data(), static_cast<std::size_t>(rm.size()));
        params[k].node->value = rm;
    }

    const Eigen::Index bank_rows = header.at("bank").at("rows").get<Eigen::Index>();
    const Eigen::Index bank_cols = header.at("bank").at("cols").get<Eigen::Index>();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> bank(bank_rows,
                                                                                bank_cols);
    read_doubles(in, bank.data(), static_cast<std::size_t>(bank.size()));
    trained.feature_bank = bank;
    return trained;
}

}  // namespace haad::trainer
