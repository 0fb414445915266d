#include "tend/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/rng.hpp"
#include "tend/util.hpp"

namespace fs = std::filesystem;

namespace tend {

namespace {

std::vector<std::string> sorted_subdirs(const std::string& root) {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> sorted_files(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

// Loads, coerces channels, and resizes; a failure at any step skips the file.
bool load_prepared(const fs::path& path, int side, int channels, Image* out) {
    try {
        Image img = load_image(path.string(), channels);
        if (img.height != side || img.width != side) img = resize_bilinear(img, side, side);
        *out = std::move(img);
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void add_blob(Image& img, double cy, double cx, double sigma, double amp) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double r2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            img.at(y, x, 0) += static_cast<float>(amp * std::exp(-r2 / (2.0 * sigma * sigma)));
        }
}

}  // namespace

void DatasetSpec::validate() const {
    if (root.empty()) throw ConfigError("dataset root is empty");
    if (id_class.empty()) throw ConfigError("id_class is empty");
    for (const auto& c : ood_classes)
        if (c == id_class) throw ConfigError("id_class '" + id_class + "' is also an ood_class");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1), got " +
                          format_double(train_fraction));
    if (!(ood_train_fraction >= 0.0 && ood_train_fraction < 1.0))
        throw ConfigError("ood_train_fraction must lie in [0, 1), got " +
                          format_double(ood_train_fraction));
    if (input_side < 1) throw ConfigError("input_side must be positive");
    if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
}

const char* motif_name(Motif m) {
    return m == Motif::BLOBS ? "blobs" : "stripes";
}

Motif motif_from_name(const std::string& s) {
    if (s == "blobs") return Motif::BLOBS;
    if (s == "stripes") return Motif::STRIPES;
    throw ParamError("unknown motif '" + s + "'");
}

void SyntheticParams::validate() const {
    if (n_id <= 0 || n_ood <= 0) throw ConfigError("synthetic counts must be positive");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be nonnegative");
}

Dataset ingest(const DatasetSpec& spec) {
    spec.validate();
    if (!fs::is_directory(spec.root))
        throw DataError("dataset root '" + spec.root + "' is not a directory");

    const auto classes = sorted_subdirs(spec.root);
    if (std::find(classes.begin(), classes.end(), spec.id_class) == classes.end())
        throw DataError("id_class '" + spec.id_class + "' not found under " + spec.root);

    std::vector<std::string> ood = spec.ood_classes;
    if (ood.empty()) {
        for (const auto& c : classes)
            if (c != spec.id_class) ood.push_back(c);
    } else {
        for (const auto& c : ood)
            if (std::find(classes.begin(), classes.end(), c) == classes.end())
                throw DataError("ood class '" + c + "' not found under " + spec.root);
    }

    Dataset ds;
    // Split counts must cover readable images only, so each class is loaded
    // in full (skipping failures) before its seeded shuffle.
    const auto load_class = [&](const std::string& cls) {
        std::vector<std::pair<std::string, Image>> loaded;
        for (const auto& file : sorted_files(fs::path(spec.root) / cls)) {
            Image img;
            if (load_prepared(fs::path(spec.root) / cls / file, spec.input_side,
                              spec.channels, &img))
                loaded.emplace_back(file, std::move(img));
            else
                ++ds.skipped;
        }
        return loaded;
    };
    const auto emit = [&](const std::string& cls, std::pair<std::string, Image>& item,
                          Label label, Split split, std::vector<ImageSample>* bucket) {
        ImageSample s;
        s.image = std::move(item.second);
        s.label = label;
        s.split = split;
        s.source_id = cls + "/" + item.first;
        ds.manifest.push_back({s.source_id, (fs::path(spec.root) / cls / item.first).string(),
                               cls, label, split});
        bucket->push_back(std::move(s));
    };

    auto id_items = load_class(spec.id_class);
    Rng id_rng(spec.seed);
    id_rng.shuffle(id_items);
    const size_t n_train =
        static_cast<size_t>(std::floor(spec.train_fraction * static_cast<double>(id_items.size())));
    for (size_t i = 0; i < id_items.size(); ++i) {
        const bool train = i < n_train;
        emit(spec.id_class, id_items[i], Label::ID, train ? Split::TRAIN : Split::TEST,
             train ? &ds.train_id : &ds.test);
    }
    if (ds.train_id.empty())
        throw DataError("id_class '" + spec.id_class + "' yields an empty training split");

    for (const auto& cls : ood) {
        auto items = load_class(cls);
        Rng cls_rng(derive_seed(spec.seed, fnv1a(cls)));
        cls_rng.shuffle(items);
        const size_t n_pool = static_cast<size_t>(
            std::floor(spec.ood_train_fraction * static_cast<double>(items.size())));
        for (size_t i = 0; i < items.size(); ++i) {
            const bool pool = i < n_pool;
            emit(cls, items[i], Label::OOD, pool ? Split::TRAIN : Split::TEST,
                 pool ? &ds.ood_train : &ds.test);
        }
    }

    return ds;
}

Image synthetic_image(Motif motif, int side, double noise_sigma, uint64_t seed) {
    if (side < 1) throw ParamError("synthetic side must be positive");
    Rng rng(seed);
    Image img = Image::zeros(side, side, 1);
    if (motif == Motif::BLOBS) {
        const int count = 1 + static_cast<int>(rng.uniform_int(0, 2));
        for (int b = 0; b < count; ++b) {
            const double cy = rng.uniform(0.25, 0.75) * side;
            const double cx = rng.uniform(0.25, 0.75) * side;
            const double sigma = rng.uniform(0.08, 0.18) * side;
            const double amp = rng.uniform(0.6, 1.0);
            add_blob(img, cy, cx, sigma, amp);
        }
    } else {
        const double freq = rng.uniform(3.0, 6.0);
        const double theta = rng.uniform(0.0, M_PI);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                img.at(y, x, 0) = static_cast<float>(
                    0.5 + 0.45 * std::sin(2.0 * M_PI * freq * (x * ct + y * st) /
                                              static_cast<double>(side) +
                                          phase));
    }
    if (noise_sigma > 0.0)
        for (auto& v : img.pixels)
            v = static_cast<float>(v + rng.normal(0.0, noise_sigma));
    for (auto& v : img.pixels) v = std::min(1.0f, std::max(0.0f, v));
    return img;
}

Dataset make_synthetic(const SyntheticParams& params, int input_side, int channels) {
    params.validate();
    if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
    const Motif ood_motif = params.motif == Motif::BLOBS ? Motif::STRIPES : Motif::BLOBS;

    Dataset ds;
    const auto emit = [&](Motif motif, int index, bool is_ood) {
        Image img = synthetic_image(motif, input_side, params.noise_sigma,
                                    derive_seed(params.seed, static_cast<uint64_t>(index),
                                                is_ood ? 1 : 0));
        if (channels == 3) img = to_channels(img, 3);

        char name[32];
        std::snprintf(name, sizeof name, "%s_%04d", is_ood ? "ood" : "id", index);
        ImageSample s;
        s.image = std::move(img);
        s.label = is_ood ? Label::OOD : Label::ID;
        s.source_id = std::string("synthetic/") + name;

        const bool train = !is_ood && index < (params.n_id * 8) / 10;
        s.split = train ? Split::TRAIN : Split::TEST;
        ds.manifest.push_back({s.source_id, "", is_ood ? "synthetic_ood" : "synthetic_id",
                               s.label, s.split});
        (train ? ds.train_id : ds.test).push_back(std::move(s));
    };

    for (int i = 0; i < params.n_id; ++i) emit(params.motif, i, false);
    for (int i = 0; i < params.n_ood; ++i) emit(ood_motif, i, true);
    return ds;
}

void write_dataset_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ostringstream os;
    os << "source_id,path,class,label,split\n";
    for (const auto& r : rows)
        os << r.source_id << ',' << r.path << ',' << r.class_name << ',' << label_name(r.label)
           << ',' << split_name(r.split) << '\n';
    atomic_write_file(path, os.str());
}

}  // namespace tend
