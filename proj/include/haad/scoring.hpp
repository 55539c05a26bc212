#pragma once

#include "haad/trainer.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace haad::scoring {

enum class Scheme { knn, nll };

Scheme parse_scheme(const std::string& name);

struct ClipScore {
    std::string id;
    std::string label;
    bool is_normal = false;
    double score = 0.0;  // higher = more anomalous
};

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct ScoreReport {
    std::vector<ClipScore> records;
    std::vector<RocPoint> roc;
    double auc = 0.0;
};

// Mean Euclidean distance from the query to its K nearest bank rows; ties in
// distance break toward the lower bank index.
double knn_score(const Eigen::VectorXd& query, const Eigen::MatrixXd& bank, int k);

double nll_score(const model::Model& model, const motion::MotionClip& clip);

ScoreReport score_dataset(const motion::DatasetManifest& manifest,
                          const trainer::TrainedModel& trained, Scheme scheme, int k = 3);

// Threshold-sweep ROC (anomalous = positive, higher score = predicted
// positive) with trapezoidal area; fills report.roc and report.auc.
void compute_auc(ScoreReport& report);

void write_scores_csv(const ScoreReport& report, const std::filesystem::path& path);
void write_roc_csv(const ScoreReport& report, const std::filesystem::path& path);

}  // namespace haad::scoring
