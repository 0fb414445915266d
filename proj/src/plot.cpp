#include "tend/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "tend/errors.hpp"
#include "tend/rng.hpp"
#include "tend/util.hpp"

namespace tend {

namespace {

const cv::Scalar kWhite(255, 255, 255);
const cv::Scalar kGrid(220, 220, 220);
const cv::Scalar kBlue(200, 90, 0);
const cv::Scalar kGreen(60, 160, 0);
const cv::Scalar kRed(40, 40, 220);
const cv::Scalar kGray(140, 140, 140);
const cv::Scalar kText(60, 60, 60);

void save_png(const std::string& path, const cv::Mat& canvas) {
    ensure_parent_dir(path);
    const std::string tmp = path + ".tmp.png";
    if (!cv::imwrite(tmp, canvas)) throw DataError("cannot write plot " + tmp);
    std::filesystem::rename(tmp, path);
}

void draw_panel(const std::string& path, const std::vector<ScoreRecord>& records,
                double margin_r, double threshold, int size, bool by_truth) {
    const double sqrt_r = std::sqrt(margin_r);
    double max_radius = sqrt_r;
    for (const auto& rec : records) max_radius = std::max(max_radius, std::sqrt(rec.d));

    const double half = size / 2.0;
    const double scale = (half - 30.0) / (max_radius > 0.0 ? max_radius * 1.05 : 1.0);
    const cv::Point2d center(half, half);

    cv::Mat canvas(size, size, CV_8UC3, kWhite);
    cv::line(canvas, {0, size / 2}, {size, size / 2}, kGrid, 1, cv::LINE_AA);
    cv::line(canvas, {size / 2, 0}, {size / 2, size}, kGrid, 1, cv::LINE_AA);
    cv::circle(canvas, cv::Point(size / 2, size / 2),
               static_cast<int>(std::lround(sqrt_r * scale)), kBlue, 2, cv::LINE_AA);

    for (const auto& rec : records) {
        const double radius = std::sqrt(rec.d) * scale;
        const double angle = plot_angle(rec.source_id);
        const cv::Point pt(static_cast<int>(std::lround(center.x + radius * std::cos(angle))),
                           static_cast<int>(std::lround(center.y + radius * std::sin(angle))));
        cv::Scalar color = kGray;
        if (by_truth) {
            if (rec.label == Label::ID) color = kGreen;
            if (rec.label == Label::OOD) color = kRed;
        } else {
            color = rec.S >= threshold ? kRed : kGreen;
        }
        cv::circle(canvas, pt, 3, color, cv::FILLED, cv::LINE_AA);
    }

    const std::string title = by_truth ? "ground truth (green ID, red OOD)"
                                       : "prediction (red: S >= threshold)";
    cv::putText(canvas, title, {10, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45, kText, 1,
                cv::LINE_AA);
    cv::putText(canvas, "radius = sqrt(d), angle = hash(source_id), blue circle = sqrt(R)",
                {10, 40}, cv::FONT_HERSHEY_SIMPLEX, 0.45, kText, 1, cv::LINE_AA);
    save_png(path, canvas);
}

}  // namespace

double plot_angle(const std::string& source_id) {
    const uint64_t bucket = fnv1a(source_id) & ((1ULL << 20) - 1);
    return 2.0 * M_PI * static_cast<double>(bucket) / static_cast<double>(1ULL << 20);
}

void write_score_plots(const std::string& truth_path, const std::string& pred_path,
                       const std::vector<ScoreRecord>& records, double margin_r,
                       double threshold, int size) {
    if (margin_r <= 0.0) throw ParamError("plot needs a positive margin R");
    if (size < 64) throw ParamError("plot canvas is too small");
    for (const auto& rec : records)
        if (rec.d < 0.0) throw DataError("negative distance for " + rec.source_id);
    draw_panel(truth_path, records, margin_r, threshold, size, true);
    draw_panel(pred_path, records, margin_r, threshold, size, false);
}

}  // namespace tend
