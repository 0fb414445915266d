#include "tend/scoring.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/tensor.hpp"
#include "tend/util.hpp"

namespace tend {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double parse_field_double(const std::string& field, const std::string& path, size_t line) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw DataError("malformed number '" + field + "' in " + path + " line " +
                        std::to_string(line));
    }
    if (used != field.size())
        throw DataError("malformed number '" + field + "' in " + path + " line " +
                        std::to_string(line));
    return v;
}

}  // namespace

const char* score_mode_name(ScoreMode m) {
    switch (m) {
        case ScoreMode::TEND: return "tend";
        case ScoreMode::MARGIN_ONLY: return "margin_only";
        case ScoreMode::CLASSIFIER_ONLY: return "classifier_only";
        case ScoreMode::AE_RECON: return "ae_recon";
    }
    throw ParamError("unknown score mode");
}

ScoreMode score_mode_from_name(const std::string& s) {
    for (ScoreMode m : {ScoreMode::TEND, ScoreMode::MARGIN_ONLY, ScoreMode::CLASSIFIER_ONLY,
                        ScoreMode::AE_RECON})
        if (s == score_mode_name(m)) return m;
    throw ParamError("unknown score mode '" + s + "'");
}

double blend_score(double p, double d, double R, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw ParamError("lambda must lie in [0, 1], got " + format_double(lambda));
    if (R <= 0.0) throw ConfigError("blend needs a positive margin R");
    return lambda * p + (1.0 - lambda) * (d / R);
}

ScoreRecord score(TendModel& model, const ImageSample& sample, const Center& center,
                  double R, double lambda, ScoreMode mode, Stage ckpt_stage) {
    if (lambda < 0.0 || lambda > 1.0)
        throw ParamError("lambda must lie in [0, 1], got " + format_double(lambda));
    if (sample.image.empty()) throw ParamError("cannot score an empty image");

    model.set_backbone_training(false);
    model.set_head_training(false);

    ScoreRecord rec;
    rec.source_id = sample.source_id;
    rec.label = sample.label;
    rec.mode = mode;

    const Tensor x = image_to_tensor(sample.image);
    if (mode == ScoreMode::AE_RECON) {
        rec.S = reconstruction_loss(sample.image, tensor_to_image(model.reconstruct(x), 0));
        return rec;
    }

    if (ckpt_stage != Stage::STAGE2)
        throw ConfigError("score mode '" + std::string(score_mode_name(mode)) +
                          "' needs a stage-2 checkpoint");
    if (!center.valid()) throw ConfigError("score mode needs a computed center");
    if (R <= 0.0) throw ConfigError("score mode needs a positive margin R");

    const Tensor c = model.compress(model.encode(x));
    if (center.O.size() != static_cast<size_t>(c.chw()))
        throw ConfigError("center length does not match the compressed feature");
    const Tensor logit = model.classify_logit(c);

    rec.p = stable_sigmoid(logit.data[0]);
    double d = 0.0;
    for (size_t j = 0; j < center.O.size(); ++j) {
        const double dev = c.data[j] - center.O[j];
        d += dev * dev;
    }
    rec.d = d;
    rec.d_prime = d / R;
    switch (mode) {
        case ScoreMode::TEND: rec.S = blend_score(rec.p, rec.d, R, lambda); break;
        case ScoreMode::MARGIN_ONLY: rec.S = rec.d_prime; break;
        case ScoreMode::CLASSIFIER_ONLY: rec.S = rec.p; break;
        case ScoreMode::AE_RECON: break;  // handled above
    }
    return rec;
}

std::vector<ScoreRecord> score_batch(TendModel& model, const std::vector<ImageSample>& samples,
                                     const Center& center, double R, double lambda,
                                     ScoreMode mode, Stage ckpt_stage) {
    std::vector<ScoreRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(score(model, s, center, R, lambda, mode, ckpt_stage));
    return out;
}

void write_scores_csv(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ostringstream os;
    os << "source_id,label,p,d,d_prime,S,mode\n";
    for (const auto& r : records) {
        if (r.source_id.find(',') != std::string::npos ||
            r.source_id.find('\n') != std::string::npos)
            throw ParamError("source_id '" + r.source_id + "' cannot be written as csv");
        os << r.source_id << ',' << label_name(r.label) << ',' << format_double(r.p) << ','
           << format_double(r.d) << ',' << format_double(r.d_prime) << ','
           << format_double(r.S) << ',' << score_mode_name(r.mode) << '\n';
    }
    atomic_write_file(path, os.str());
}

std::vector<ScoreRecord> read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scores file " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("scores file " + path + " is empty");
    if (line == "source_id,label,p,d,d_prime,S,mode\r") line.pop_back();
    if (line != "source_id,label,p,d,d_prime,S,mode")
        throw DataError("unexpected scores header in " + path + ": '" + line + "'");

    std::vector<ScoreRecord> out;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_list(line);
        if (fields.size() != 7)
            throw DataError("expected 7 fields in " + path + " line " +
                            std::to_string(lineno) + ", got " + std::to_string(fields.size()));
        ScoreRecord r;
        r.source_id = fields[0];
        try {
            r.label = label_from_name(fields[1]);
            r.mode = score_mode_from_name(fields[6]);
        } catch (const ParamError& e) {
            throw DataError(std::string(e.what()) + " in " + path + " line " +
                            std::to_string(lineno));
        }
        r.p = parse_field_double(fields[2], path, lineno);
        r.d = parse_field_double(fields[3], path, lineno);
        r.d_prime = parse_field_double(fields[4], path, lineno);
        r.S = parse_field_double(fields[5], path, lineno);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace tend
