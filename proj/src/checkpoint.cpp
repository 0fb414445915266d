#include "tend/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tend/errors.hpp"
#include "tend/util.hpp"

namespace tend {

const char* stage_name(Stage s) { return s == Stage::STAGE1 ? "STAGE1" : "STAGE2"; }

Stage stage_from_name(const std::string& s) {
    if (s == "STAGE1") return Stage::STAGE1;
    if (s == "STAGE2") return Stage::STAGE2;
    throw DataError("unknown checkpoint stage tag: " + s);
}

namespace {

std::vector<ParamRef> persisted_arrays(TendModel& model) {
    auto refs = model.all_params();
    auto bufs = model.all_buffers();
    refs.insert(refs.end(), bufs.begin(), bufs.end());
    return refs;
}

void write_doubles(std::ofstream& out, const double* data, size_t count) {
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, size_t count, const std::string& what) {
    in.read(reinterpret_cast<char*>(data),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(double))
        throw DataError("checkpoint: truncated while reading " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, TendModel& model, const CheckpointMeta& meta) {
    if (meta.stage == Stage::STAGE2 &&
        meta.center.size() != static_cast<size_t>(ArchitectureSpec::kCompressedDim))
        throw ConfigError("checkpoint: a stage-2 checkpoint needs a full center vector");

    const auto arrays = persisted_arrays(model);

    std::ostringstream header;
    header << kCheckpointMagic << '\n';
    header << "input_side " << model.spec().input_side << '\n';
    header << "channels " << model.spec().channels << '\n';
    header << "stage " << stage_name(meta.stage) << '\n';
    header << "init_seed " << meta.init_seed << '\n';
    header << "train_seed " << meta.train_seed << '\n';
    header << "margin_r " << format_double(meta.margin_r) << '\n';
    header << "margin_reduction " << meta.margin_reduction << '\n';
    header << "center_epoch " << meta.center_epoch << '\n';
    header << "center_dim " << meta.center.size() << '\n';
    header << "arrays " << arrays.size() << '\n';
    for (const auto& a : arrays) header << "array " << a.name << ' ' << a.value->size() << '\n';
    header << "---\n";

    ensure_parent_dir(path);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        const std::string h = header.str();
        out.write(h.data(), static_cast<std::streamsize>(h.size()));
        for (const auto& a : arrays) write_doubles(out, a.value->data(), a.value->size());
        write_doubles(out, meta.center.data(), meta.center.size());
        if (!out) throw DataError("short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint " + path);

    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic)
        throw DataError("checkpoint: bad magic in " + path);

    LoadedCheckpoint loaded;
    size_t center_dim = 0;
    std::vector<std::pair<std::string, size_t>> arrays;
    size_t array_count = 0;
    while (std::getline(in, line)) {
        if (line == "---") break;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "input_side") ss >> loaded.arch.input_side;
        else if (key == "channels") ss >> loaded.arch.channels;
        else if (key == "stage") {
            std::string v;
            ss >> v;
            loaded.meta.stage = stage_from_name(v);
        } else if (key == "init_seed") ss >> loaded.meta.init_seed;
        else if (key == "train_seed") ss >> loaded.meta.train_seed;
        else if (key == "margin_r") ss >> loaded.meta.margin_r;
        else if (key == "margin_reduction") ss >> loaded.meta.margin_reduction;
        else if (key == "center_epoch") ss >> loaded.meta.center_epoch;
        else if (key == "center_dim") ss >> center_dim;
        else if (key == "arrays") ss >> array_count;
        else if (key == "array") {
            std::string name;
            size_t len = 0;
            ss >> name >> len;
            arrays.emplace_back(name, len);
        } else throw DataError("checkpoint: unknown header key '" + key + "' in " + path);
        if (ss.fail()) throw DataError("checkpoint: malformed header line '" + line + "'");
    }
    if (line != "---") throw DataError("checkpoint: missing header terminator in " + path);
    if (arrays.size() != array_count)
        throw DataError("checkpoint: array count mismatch in " + path);

    loaded.arch.validate();
    loaded.model = std::make_unique<TendModel>(loaded.arch, loaded.meta.init_seed);
    auto refs = persisted_arrays(*loaded.model);
    if (refs.size() != arrays.size())
        throw DataError("checkpoint: architecture expects " + std::to_string(refs.size()) +
                        " arrays, file has " + std::to_string(arrays.size()));
    for (size_t i = 0; i < refs.size(); ++i) {
        if (refs[i].name != arrays[i].first || refs[i].value->size() != arrays[i].second)
            throw DataError("checkpoint: array mismatch at '" + arrays[i].first +
                            "' (expected '" + refs[i].name + "')");
        read_doubles(in, refs[i].value->data(), refs[i].value->size(), refs[i].name);
    }
    loaded.meta.center.assign(center_dim, 0.0);
    read_doubles(in, loaded.meta.center.data(), center_dim, "center");
    if (loaded.meta.stage == Stage::STAGE2 &&
        center_dim != static_cast<size_t>(ArchitectureSpec::kCompressedDim))
        throw DataError("checkpoint: stage-2 file lacks a full center vector");
    return loaded;
}

}  // namespace tend
