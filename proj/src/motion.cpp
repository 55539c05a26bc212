#include "haad/motion.hpp"

#include "haad/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace haad::motion {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'H', 'A', 'A', 'D'};
constexpr std::uint32_t kCodecVersion = 1;

void check_clip_dims(std::uint32_t frames, std::uint32_t joints, std::uint32_t channels,
                     const std::string& context) {
    if (frames < 2) throw std::runtime_error(context + ": need at least 2 frames");
    if (joints < 2) throw std::runtime_error(context + ": need at least 2 joints");
    if (channels != 3 && channels != 6)
        throw std::runtime_error(context + ": channels must be 3 or 6");
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(context + ": truncated clip");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

float u32_to_float(std::uint32_t bits) {
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
}

std::uint32_t float_to_u32(float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    return bits;
}

void validate_partition(const BodyPartition& partition, std::uint32_t joints) {
    if (partition.upper.empty() || partition.lower.empty())
        throw std::runtime_error("manifest: partition sides must both be non-empty");
    std::set<int> seen;
    for (int side = 0; side < 2; ++side) {
        for (int j : (side == 0 ? partition.upper : partition.lower)) {
            if (j < 0 || j >= static_cast<int>(joints)) {
                std::ostringstream os;
                os << "manifest: partition joint " << j << " out of range (J=" << joints << ")";
                throw std::runtime_error(os.str());
            }
            if (!seen.insert(j).second) {
                std::ostringstream os;
                os << "manifest: partition overlap at joint " << j;
                throw std::runtime_error(os.str());
            }
        }
    }
    if (seen.size() != joints)
        throw std::runtime_error("manifest: partition does not cover all joints");
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest: parse failure in " + path.string() + ": " + e.what());
    }

    DatasetManifest manifest;
    manifest.base_dir = path.parent_path();
    try {
        manifest.skeleton = doc.at("skeleton").get<std::vector<std::string>>();
        manifest.partition.upper = doc.at("partition").at("upper").get<std::vector<int>>();
        manifest.partition.lower = doc.at("partition").at("lower").get<std::vector<int>>();
        for (const auto& entry : doc.at("clips")) {
            ClipDescriptor d;
            d.id = entry.at("id").get<std::string>();
            d.label = entry.at("label").get<std::string>();
            d.path = entry.at("path").get<std::string>();
            d.frames = entry.at("frames").get<std::uint32_t>();
            d.joints = entry.at("joints").get<std::uint32_t>();
            d.channels = entry.at("channels").get<std::uint32_t>();
            manifest.clips.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest: malformed field: " + std::string(e.what()));
    }

    if (manifest.skeleton.empty()) throw std::runtime_error("manifest: empty skeleton");
    validate_partition(manifest.partition, manifest.joints());
    for (const auto& d : manifest.clips) {
        if (d.label.empty()) throw std::runtime_error("manifest: empty label on clip " + d.id);
        if (d.joints != manifest.joints())
            throw std::runtime_error("manifest: clip " + d.id + " joint count disagrees with skeleton");
        if (d.channels != manifest.clips.front().channels)
            throw std::runtime_error("manifest: inconsistent channel counts across clips");
        check_clip_dims(d.frames, d.joints, d.channels, "manifest clip " + d.id);
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    json doc;
    doc["skeleton"] = manifest.skeleton;
    doc["partition"] = {{"upper", manifest.partition.upper},
                        {"lower", manifest.partition.lower}};
    doc["clips"] = json::array();
    for (const auto& d : manifest.clips) {
        doc["clips"].push_back({{"id", d.id},
                                {"label", d.label},
                                {"path", d.path},
                                {"frames", d.frames},
                                {"joints", d.joints},
                                {"channels", d.channels}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

MotionClip read_clip_file(const std::filesystem::path& path) {
    const std::string context = "clip " + path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(context + ": cannot open");

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(context + ": bad magic");
    const std::uint32_t version = read_u32(in, context);
    if (version != kCodecVersion) {
        std::ostringstream os;
        os << context << ": unsupported codec version " << version;
        throw std::runtime_error(os.str());
    }

    MotionClip clip;
    clip.frames = read_u32(in, context);
    clip.joints = read_u32(in, context);
    clip.channels = read_u32(in, context);
    check_clip_dims(clip.frames, clip.joints, clip.channels, context);

    const std::size_t count =
        static_cast<std::size_t>(clip.frames) * clip.joints * clip.channels;
    clip.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        clip.data[i] = u32_to_float(read_u32(in, context));
        if (!std::isfinite(clip.data[i]))
            throw std::runtime_error(context + ": non-finite sample");
    }
    return clip;
}

MotionClip read_clip(const DatasetManifest& manifest, const ClipDescriptor& descriptor) {
    MotionClip clip = read_clip_file(manifest.base_dir / descriptor.path);
    if (clip.frames != descriptor.frames || clip.joints != descriptor.joints ||
        clip.channels != descriptor.channels)
        throw std::runtime_error("clip " + descriptor.id +
                                 ": dimensions disagree with manifest");
    clip.id = descriptor.id;
    clip.label = descriptor.label;
    return clip;
}

void write_clip(const MotionClip& clip, const std::filesystem::path& path) {
    check_clip_dims(clip.frames, clip.joints, clip.channels, "clip " + clip.id);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("clip: cannot write " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kCodecVersion);
    write_u32(out, clip.frames);
    write_u32(out, clip.joints);
    write_u32(out, clip.channels);
    for (float f : clip.data) write_u32(out, float_to_u32(f));
}

Matrix preprocess(const MotionClip& clip) {
    const std::uint32_t J = clip.joints;
    const std::uint32_t Cn = clip.channels;
    Matrix traj(static_cast<Eigen::Index>(J) * Cn, clip.frames);
    for (std::uint32_t h = 0; h < clip.frames; ++h) {
        for (std::uint32_t j = 0; j < J; ++j) {
            for (std::uint32_t c = 0; c < Cn; ++c) {
                double v = clip.at(h, j, c);
                if (Cn == 3) v -= clip.at(h, 0, c);  // root-center coordinates
                traj(static_cast<Eigen::Index>(j) * Cn + c, h) = v;
            }
        }
    }
    return traj;
}

PartTrajectories split_parts(const Matrix& trajectory, const BodyPartition& partition,
                             std::uint32_t channels) {
    const Eigen::Index joints = trajectory.rows() / channels;
    auto gather = [&](const std::vector<int>& indices) {
        Matrix out(static_cast<Eigen::Index>(indices.size()) * channels, trajectory.cols());
        Eigen::Index at = 0;
        for (int j : indices) {
            if (j < 0 || j >= joints) {
                std::ostringstream os;
                os << "split_parts: joint index " << j << " out of range (J=" << joints << ")";
                throw std::invalid_argument(os.str());
            }
            out.middleRows(at, channels) =
                trajectory.middleRows(static_cast<Eigen::Index>(j) * channels, channels);
            at += channels;
        }
        return out;
    };
    return {gather(partition.upper), gather(partition.lower)};
}

// ---- synthetic dataset -----------------------------------------------------

namespace {

// Joints 0..5 are the lower body (pelvis first, as the root), 6..15 the upper.
const double kBasePose[kSynthJoints][3] = {
    {0.00, 1.00, 0.00},   // pelvis
    {-0.12, 0.95, 0.00},  // l_hip
    {0.12, 0.95, 0.00},   // r_hip
    {-0.14, 0.50, 0.00},  // l_knee
    {0.14, 0.50, 0.00},   // r_knee
    {-0.15, 0.05, 0.05},  // l_foot
    {0.00, 1.25, 0.00},   // spine
    {0.00, 1.50, 0.00},   // chest
    {0.00, 1.65, 0.00},   // neck
    {0.00, 1.80, 0.00},   // head
    {-0.22, 1.55, 0.00},  // l_shoulder
    {-0.30, 1.30, 0.05},  // l_elbow
    {-0.34, 1.05, 0.10},  // l_wrist
    {0.22, 1.55, 0.00},   // r_shoulder
    {0.30, 1.30, 0.05},   // r_elbow
    {0.34, 1.05, 0.10},   // r_wrist
};

// Low enough that the oscillation energy lands in the first few DCT
// coefficients for clips of 20-60 frames, i.e. inside every truncation M >= 2
// the sweeps exercise (the dominant index is about omega * H / pi).
constexpr double kBaseOmega = 0.15;  // radians per frame

// Per-joint, per-channel sinusoid amplitude of each action class.
double class_amplitude(const std::string& action, int joint, int channel) {
    if (action == "wave") {
        if (joint < 6) return 0.0;  // legs static
        double weight = 0.05;                                  // torso/head sway
        if (joint == 10 || joint == 13) weight = 0.12;         // shoulders
        if (joint == 11 || joint == 14) weight = 0.30;         // elbows
        if (joint == 12 || joint == 15) weight = 0.55;         // wrists
        const double channel_mix[3] = {0.9, 0.25, 0.6};
        return weight * channel_mix[channel];
    }
    if (action == "kick") {
        if (joint == 0 || joint >= 6) return 0.0;  // pelvis and arms static
        double weight = 0.12;                       // hips
        if (joint == 3 || joint == 4) weight = 0.35;  // knees
        if (joint == 5) weight = 0.65;                // foot
        const double channel_mix[3] = {0.8, 0.5, 0.3};
        return weight * channel_mix[channel];
    }
    if (action == "jump") {
        // Whole-body vertical sinusoid; per-joint scaling keeps the motion
        // visible after root centering.
        return channel == 1 ? 0.35 + 0.03 * joint : 0.0;
    }
    throw std::invalid_argument("unknown synthetic action: " + action);
}

}  // namespace

const std::vector<std::string>& synth_skeleton() {
    static const std::vector<std::string> names = {
        "pelvis", "l_hip",  "r_hip",      "l_knee",  "r_knee",     "l_foot",
        "spine",  "chest",  "neck",       "head",    "l_shoulder", "l_elbow",
        "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    return names;
}

const BodyPartition& synth_partition() {
    static const BodyPartition partition = {{6, 7, 8, 9, 10, 11, 12, 13, 14, 15},
                                            {0, 1, 2, 3, 4, 5}};
    return partition;
}

SynthClipParams synth_params(std::uint64_t seed, const std::string& action, int index,
                             std::uint32_t h_min, std::uint32_t h_max) {
    Rng rng = stream_rng(seed, "synth/" + action + "/" + std::to_string(index));
    SynthClipParams p;
    p.frames = static_cast<std::uint32_t>(rng.uniform_int(h_min, h_max));
    p.phase = rng.uniform(0.0, 6.283185307179586);
    p.amplitude_scale = rng.uniform(0.8, 1.2);
    p.frequency = kBaseOmega * rng.uniform(0.9, 1.1);
    for (int c = 0; c < 3; ++c) p.offset[c] = rng.uniform(-1.0, 1.0);
    return p;
}

double synth_value(const std::string& action, const SynthClipParams& params,
                   std::uint32_t h, int joint, int channel) {
    return kBasePose[joint][channel] + params.offset[channel] +
           class_amplitude(action, joint, channel) * params.amplitude_scale *
               std::sin(params.frequency * h + params.phase);
}

DatasetManifest synth_dataset(std::uint64_t seed, int clips_per_class,
                              std::uint32_t h_min, std::uint32_t h_max,
                              double jitter_sigma,
                              const std::filesystem::path& out_dir) {
    if (clips_per_class < 1)
        throw std::invalid_argument("synth_dataset: clips_per_class must be >= 1");
    if (h_min < 2 || h_max < h_min)
        throw std::invalid_argument("synth_dataset: invalid frame range");

    std::filesystem::create_directories(out_dir);
    DatasetManifest manifest;
    manifest.skeleton = synth_skeleton();
    manifest.partition = synth_partition();
    manifest.base_dir = out_dir;

    for (const char* action : kSynthClasses) {
        for (int i = 0; i < clips_per_class; ++i) {
            const SynthClipParams params = synth_params(seed, action, i, h_min, h_max);
            Rng jitter = stream_rng(seed, std::string("synth-jitter/") + action + "/" +
                                              std::to_string(i));
            MotionClip clip;
            {
                std::ostringstream os;
                os << action << "_" << i;
                clip.id = os.str();
            }
            clip.label = action;
            clip.frames = params.frames;
            clip.joints = kSynthJoints;
            clip.channels = kSynthChannels;
            clip.data.resize(static_cast<std::size_t>(clip.frames) * kSynthJoints *
                             kSynthChannels);
            std::size_t at = 0;
            for (std::uint32_t h = 0; h < clip.frames; ++h)
                for (int j = 0; j < kSynthJoints; ++j)
                    for (int c = 0; c < kSynthChannels; ++c)
                        clip.data[at++] = static_cast<float>(
                            synth_value(action, params, h, j, c) +
                            jitter_sigma * jitter.normal());

            ClipDescriptor d;
            d.id = clip.id;
            d.label = clip.label;
            d.path = clip.id + ".clip";
            d.frames = clip.frames;
            d.joints = clip.joints;
            d.channels = clip.channels;
            write_clip(clip, out_dir / d.path);
            manifest.clips.push_back(std::move(d));
        }
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

}  // namespace haad::motion
