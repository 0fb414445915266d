#include "tend/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/util.hpp"

namespace tend {

namespace {

void require_both_classes(const std::vector<LabeledScore>& scores, const char* who) {
    long long n_id = 0, n_ood = 0;
    for (const auto& ls : scores) {
        if (ls.truth == Label::ID)
            ++n_id;
        else if (ls.truth == Label::OOD)
            ++n_ood;
        else
            throw MetricError(std::string(who) + " needs ID or OOD truth on every score");
        if (!std::isfinite(ls.s)) throw MetricError(std::string(who) + " got a non-finite score");
    }
    if (n_id == 0 || n_ood == 0)
        throw MetricError(std::string(who) + " needs both classes, got " +
                          std::to_string(n_id) + " ID and " + std::to_string(n_ood) + " OOD");
}

}  // namespace

std::vector<LabeledScore> to_labeled(const std::vector<ScoreRecord>& records) {
    std::vector<LabeledScore> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({r.S, r.label});
    return out;
}

double auroc(const std::vector<LabeledScore>& scores) {
    require_both_classes(scores, "auroc");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a].s < scores[b].s; });

    // Average ranks across tied runs make each ID/OOD tie count one half.
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]].s == scores[order[i]].s) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }

    double rank_sum_ood = 0.0;
    long long n_id = 0, n_ood = 0;
    for (size_t k = 0; k < n; ++k) {
        if (scores[k].truth == Label::OOD) {
            rank_sum_ood += rank[k];
            ++n_ood;
        } else {
            ++n_id;
        }
    }
    const double u = rank_sum_ood - 0.5 * static_cast<double>(n_ood) *
                                        static_cast<double>(n_ood + 1);
    return u / (static_cast<double>(n_id) * static_cast<double>(n_ood));
}

Confusion confusion(const std::vector<LabeledScore>& scores, double threshold) {
    Confusion c;
    for (const auto& ls : scores) {
        const bool called_ood = ls.s >= threshold;
        if (ls.truth == Label::OOD)
            called_ood ? ++c.tp : ++c.fn;
        else if (ls.truth == Label::ID)
            called_ood ? ++c.fp : ++c.tn;
        else
            throw MetricError("confusion needs ID or OOD truth on every score");
    }
    c.tpr = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    c.fnr = c.tp + c.fn ? static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn) : 0.0;
    c.fpr = c.fp + c.tn ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
    c.tnr = c.fp + c.tn ? static_cast<double>(c.tn) / static_cast<double>(c.fp + c.tn) : 0.0;
    return c;
}

ThresholdChoice gmean_threshold(const std::vector<LabeledScore>& scores) {
    require_both_classes(scores, "gmean_threshold");

    std::vector<double> distinct;
    distinct.reserve(scores.size());
    for (const auto& ls : scores) distinct.push_back(ls.s);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> candidates;
    candidates.push_back(distinct.front() - 1.0);
    for (size_t i = 0; i + 1 < distinct.size(); ++i)
        candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    candidates.push_back(distinct.back() + 1.0);

    ThresholdChoice best;
    bool have = false;
    for (const double t : candidates) {
        const Confusion c = confusion(scores, t);
        ThresholdChoice cur;
        cur.threshold = t;
        cur.tpr = c.tpr;
        cur.fpr = c.fpr;
        cur.diff = c.tpr - c.fpr;
        cur.gmean = std::sqrt(c.tpr * (1.0 - c.fpr));
        const bool better = !have || cur.gmean > best.gmean ||
                            (cur.gmean == best.gmean &&
                             (cur.diff > best.diff ||
                              (cur.diff == best.diff && cur.threshold < best.threshold)));
        if (better) {
            best = cur;
            have = true;
        }
    }
    if (best.gmean == 0.0) {
        // Nothing separates the classes; fall back to calling everything ID.
        best.threshold = candidates.back();
        const Confusion c = confusion(scores, best.threshold);
        best.tpr = c.tpr;
        best.fpr = c.fpr;
        best.diff = c.tpr - c.fpr;
        best.gmean = std::sqrt(c.tpr * (1.0 - c.fpr));
    }
    return best;
}

double validation_accuracy(const std::vector<double>& val_scores, double threshold) {
    if (val_scores.empty()) throw MetricError("validation_accuracy needs at least one score");
    long long called_ood = 0;
    for (const double s : val_scores) {
        if (!std::isfinite(s)) throw MetricError("validation_accuracy got a non-finite score");
        if (s >= threshold) ++called_ood;
    }
    return static_cast<double>(called_ood) / static_cast<double>(val_scores.size());
}

std::map<std::string, std::vector<double>> scores_by_transform(
    const std::vector<ScoreRecord>& records) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& r : records) {
        const auto pos = r.source_id.rfind(':');
        const std::string tag = pos == std::string::npos ? "" : r.source_id.substr(pos + 1);
        out[tag].push_back(r.S);
    }
    return out;
}

EvalReport evaluate(const std::vector<ScoreRecord>& test_scores,
                    const std::vector<ScoreRecord>* val_scores) {
    const auto labeled = to_labeled(test_scores);
    require_both_classes(labeled, "evaluate");

    EvalReport rep;
    for (const auto& ls : labeled) (ls.truth == Label::ID ? rep.n_id : rep.n_ood)++;
    rep.auroc = auroc(labeled);
    rep.choice = gmean_threshold(labeled);
    rep.at_threshold = confusion(labeled, rep.choice.threshold);

    if (val_scores && !val_scores->empty()) {
        rep.has_val = true;
        std::vector<double> all;
        all.reserve(val_scores->size());
        for (const auto& r : *val_scores) all.push_back(r.S);
        rep.acc_val = validation_accuracy(all, rep.choice.threshold);
        for (const auto& [tag, ss] : scores_by_transform(*val_scores))
            rep.acc_val_by_transform.emplace_back(
                tag, validation_accuracy(ss, rep.choice.threshold));
    }
    return rep;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "test samples: " << n_id << " ID, " << n_ood << " OOD\n";
    os << "auroc: " << format_double(auroc) << '\n';
    os << "threshold: " << format_double(choice.threshold) << " (gmean "
       << format_double(choice.gmean) << ", tpr " << format_double(choice.tpr) << ", fpr "
       << format_double(choice.fpr) << ", diff " << format_double(choice.diff) << ")\n";
    os << "confusion: tp " << at_threshold.tp << ", fn " << at_threshold.fn << ", fp "
       << at_threshold.fp << ", tn " << at_threshold.tn << '\n';
    if (has_val) {
        os << "acc_val: " << format_double(acc_val) << '\n';
        for (const auto& [tag, acc] : acc_val_by_transform)
            os << "acc_val[" << (tag.empty() ? "untagged" : tag) << "]: " << format_double(acc)
               << '\n';
    }
    return os.str();
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "n_id,n_ood,auroc,threshold,gmean,tpr,fpr,diff,tp,fn,fp,tn,acc_val\n";
    os << n_id << ',' << n_ood << ',' << format_double(auroc) << ','
       << format_double(choice.threshold) << ',' << format_double(choice.gmean) << ','
       << format_double(choice.tpr) << ',' << format_double(choice.fpr) << ','
       << format_double(choice.diff) << ',' << at_threshold.tp << ',' << at_threshold.fn << ','
       << at_threshold.fp << ',' << at_threshold.tn << ','
       << (has_val ? format_double(acc_val) : std::string()) << '\n';
    return os.str();
}

}  // namespace tend
