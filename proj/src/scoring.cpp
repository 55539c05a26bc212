#include "haad/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace haad::scoring {

namespace {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Scheme parse_scheme(const std::string& name) {
    if (name == "knn") return Scheme::knn;
    if (name == "nll") return Scheme::nll;
    throw std::invalid_argument("unknown scoring scheme: '" + name + "'");
}

double knn_score(const Eigen::VectorXd& query, const Eigen::MatrixXd& bank, int k) {
    const Eigen::Index n = bank.rows();
    if (k < 1 || k > n)
        throw std::invalid_argument("knn_score: K out of range for bank size " +
                                    std::to_string(n));
    if (query.size() != bank.cols())
        throw std::invalid_argument("knn_score: query dimension disagrees with bank");

    std::vector<std::pair<double, Eigen::Index>> distances;
    distances.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        distances.emplace_back((bank.row(i).transpose() - query).norm(), i);
    std::partial_sort(distances.begin(), distances.begin() + k, distances.end());

    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += distances[static_cast<std::size_t>(i)].first;
    return sum / k;
}

double nll_score(const model::Model& model, const motion::MotionClip& clip) {
    return flow::nll(model::clip_forward(model, clip).flow)->scalar();
}

ScoreReport score_dataset(const motion::DatasetManifest& manifest,
                          const trainer::TrainedModel& trained, Scheme scheme, int k) {
    model::check_compatible(*trained.model, manifest);
    ScoreReport report;
    for (const auto& d : manifest.clips) {
        const motion::MotionClip clip = motion::read_clip(manifest, d);
        ClipScore record;
        record.id = clip.id;
        record.label = clip.label;
        record.is_normal = clip.label == trained.model->config.normal_label;
        if (scheme == Scheme::knn) {
            const auto out = model::clip_forward(*trained.model, clip);
            record.score = knn_score(out.flow.v->value.col(0), trained.feature_bank, k);
        } else {
            record.score = nll_score(*trained.model, clip);
        }
        report.records.push_back(std::move(record));
    }
    return report;
}

void compute_auc(ScoreReport& report) {
    Eigen::Index normals = 0, anomalies = 0;
    for (const auto& r : report.records) (r.is_normal ? normals : anomalies)++;
    if (normals == 0 || anomalies == 0)
        throw std::runtime_error("auc: degenerate labels (need both classes)");

    std::vector<std::pair<double, bool>> scored;  // (score, is_anomalous)
    scored.reserve(report.records.size());
    for (const auto& r : report.records) scored.emplace_back(r.score, !r.is_normal);
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    report.roc.clear();
    report.roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    double area = 0.0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < scored.size()) {
        const double threshold = scored[i].first;
        while (i < scored.size() && scored[i].first == threshold) {
            (scored[i].second ? tp : fp)++;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / normals;
        const double tpr = static_cast<double>(tp) / anomalies;
        report.roc.push_back({threshold, fpr, tpr});
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    report.auc = area;
}

void write_scores_csv(const ScoreReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF line endings
    if (!out) throw std::runtime_error("scores: cannot write " + path.string());
    out << "clip_id,label,is_normal,score\n";
    for (const auto& r : report.records)
        out << r.id << ',' << r.label << ',' << (r.is_normal ? 1 : 0) << ','
            << format_double(r.score) << '\n';
}

void write_roc_csv(const ScoreReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("roc: cannot write " + path.string());
    out << "threshold,fpr,tpr\n";
    for (const auto& p : report.roc)
        out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
            << format_double(p.tpr) << '\n';
}

}  // namespace haad::scoring
