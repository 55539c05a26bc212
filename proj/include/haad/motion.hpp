#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace haad::motion {

using Matrix = Eigen::MatrixXd;

// One skeletal sequence. data is frame-major, joint-major, channel-minor and
// stored as float32 to match the on-disk codec bit for bit.
struct MotionClip {
    std::string id;
    std::string label;
    std::uint32_t frames = 0;    // H
    std::uint32_t joints = 0;    // J
    std::uint32_t channels = 0;  // Cn: 3 coordinates or 6 rotation
    std::vector<float> data;     // H*J*Cn values

    float at(std::uint32_t h, std::uint32_t j, std::uint32_t c) const {
        return data[(static_cast<std::size_t>(h) * joints + j) * channels + c];
    }
};

struct BodyPartition {
    std::vector<int> upper;
    std::vector<int> lower;
};

struct ClipDescriptor {
    std::string id;
    std::string label;
    std::string path;  // relative to the manifest directory
    std::uint32_t frames = 0;
    std::uint32_t joints = 0;
    std::uint32_t channels = 0;
};

struct DatasetManifest {
    std::vector<std::string> skeleton;  // joint names, size J
    BodyPartition partition;
    std::vector<ClipDescriptor> clips;
    std::filesystem::path base_dir;

    std::uint32_t joints() const { return static_cast<std::uint32_t>(skeleton.size()); }
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

MotionClip read_clip_file(const std::filesystem::path& path);
MotionClip read_clip(const DatasetManifest& manifest, const ClipDescriptor& descriptor);
void write_clip(const MotionClip& clip, const std::filesystem::path& path);

// Flattens to a P x H trajectory (row p = joint p/Cn, channel p%Cn; column h).
// Coordinate clips are centered on the root joint (index 0) per frame first.
Matrix preprocess(const MotionClip& clip);

// Row subsets for the listed joints, in partition order.
struct PartTrajectories {
    Matrix upper;  // P_up x H
    Matrix lower;  // P_low x H
};
PartTrajectories split_parts(const Matrix& trajectory, const BodyPartition& partition,
                             std::uint32_t channels);

// ---- synthetic dataset -----------------------------------------------------

// Per-clip draw of the generator, recomputable from the seed alone so tests
// can reconstruct the closed-form trajectories.
struct SynthClipParams {
    std::uint32_t frames = 0;
    double phase = 0.0;
    double amplitude_scale = 1.0;  // +-20%
    double frequency = 0.0;        // radians per frame, +-10% around the base
    std::array<double, 3> offset{};  // whole-body translation
};

inline constexpr int kSynthJoints = 16;
inline constexpr int kSynthChannels = 3;
const std::vector<std::string>& synth_skeleton();
const BodyPartition& synth_partition();
inline constexpr const char* kSynthClasses[3] = {"wave", "kick", "jump"};

SynthClipParams synth_params(std::uint64_t seed, const std::string& action, int index,
                             std::uint32_t h_min, std::uint32_t h_max);

// Noise-free double-precision trajectory value at (h, j, c).
double synth_value(const std::string& action, const SynthClipParams& params,
                   std::uint32_t h, int joint, int channel);

// Writes clip files plus manifest.json under out_dir and returns the manifest.
DatasetManifest synth_dataset(std::uint64_t seed, int clips_per_class,
                              std::uint32_t h_min, std::uint32_t h_max,
                              double jitter_sigma,
                              const std::filesystem::path& out_dir);

}  // namespace haad::motion
