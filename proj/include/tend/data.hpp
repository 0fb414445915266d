#pragma once

// One-vs-rest dataset construction. Folder ingestion treats one class
// directory as in-distribution, splits it deterministically into train and
// held-out test, and sends every other selected class to the test mixture as
// OOD. A synthetic generator provides a small separable dataset for
// self-contained runs.

#include <cstdint>
#include <string>
#include <vector>

#include "tend/image.hpp"

namespace tend {

struct DatasetSpec {
    std::string root;                     // folder with one subdirectory per class
    std::string id_class;
    std::vector<std::string> ood_classes; // empty means all classes except id_class
    int input_side = 128;
    int channels = 3;
    double train_fraction = 0.8;          // ID split; the rest of ID is held out for test
    double ood_train_fraction = 0.0;      // per OOD class, diverted to the supervised pool
    uint64_t seed = 0;

    void validate() const;
};

enum class Motif { BLOBS, STRIPES };

const char* motif_name(Motif m);
Motif motif_from_name(const std::string& s);

struct SyntheticParams {
    int n_id = 100;
    int n_ood = 100;
    Motif motif = Motif::BLOBS;   // ID motif; OOD uses the other one
    double noise_sigma = 0.02;
    uint64_t seed = 0;

    void validate() const;
};

struct ManifestRow {
    std::string source_id;
    std::string path;
    std::string class_name;
    Label label = Label::UNKNOWN;
    Split split = Split::TRAIN;
};

struct Dataset {
    std::vector<ImageSample> train_id;
    std::vector<ImageSample> ood_train;  // nonempty only with ood_train_fraction > 0
    std::vector<ImageSample> test;
    std::vector<ManifestRow> manifest;
    int skipped = 0;                     // unreadable files, left out of every split
};

// Reads root/<class>/<files>. Class directories and files are visited in
// sorted order; the ID split is a seeded shuffle, so the assignment is a pure
// function of (file list, seed). Unreadable files are skipped and counted.
Dataset ingest(const DatasetSpec& spec);

// Deterministic separable images: soft blobs against sine stripes. The ID
// motif follows params.motif, OOD gets the other. 80/20 ID split; all OOD
// goes to test.
Dataset make_synthetic(const SyntheticParams& params, int input_side, int channels);

// Single blob or stripe image, exposed for tests.
Image synthetic_image(Motif motif, int side, double noise_sigma, uint64_t seed);

void write_dataset_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

}  // namespace tend
