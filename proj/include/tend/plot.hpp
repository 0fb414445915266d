#pragma once

// Static 2D rendering of scored samples. Each sample sits at radius sqrt(d)
// from the origin with an angle hashed from its source_id, so radial position
// is faithful to feature distance while the angle merely spreads points out.
// The margin appears as a blue circle at radius sqrt(R). One panel colors by
// ground truth, the other by the thresholded prediction.

#include <string>
#include <vector>

#include "tend/scoring.hpp"

namespace tend {

// Angle in [0, 2*pi) from the id hash; stable across runs and platforms.
double plot_angle(const std::string& source_id);

// Writes the ground-truth panel and the prediction panel as PNG files.
// Points with S >= threshold are predicted OOD. size is the square canvas
// side in pixels.
void write_score_plots(const std::string& truth_path, const std::string& pred_path,
                       const std::vector<ScoreRecord>& records, double margin_r,
                       double threshold, int size = 640);

}  // namespace tend
