#include "tuber/dataset_io.hpp"

#include <json.hpp>

#include <atomic>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "tuber/errors.hpp"

namespace tuber {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int64_t kFormatVersion = 1;
constexpr uint32_t kDtypeF32 = 1;

std::string sample_name(const char* prefix, int64_t index, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%06lld.%s", prefix, static_cast<long long>(index), ext);
    return buf;
}

json config_json(const SynthConfig& cfg) {
    json palette = json::array();
    for (const auto& c : cfg.palette) palette.push_back({c[0], c[1], c[2]});
    return {
        {"height", cfg.height},
        {"width", cfg.width},
        {"t_in", cfg.t_in},
        {"t_out", cfg.t_out},
        {"min_actors", cfg.min_actors},
        {"max_actors", cfg.max_actors},
        {"class_count", cfg.class_count},
        {"min_active", cfg.min_active},
        {"max_active", cfg.max_active},
        {"background_level", cfg.background_level},
        {"noise", cfg.noise},
        {"contrast", cfg.contrast},
        {"palette", palette},
        {"seed", cfg.seed},
    };
}

SynthConfig config_from(const json& j) {
    static const char* known[] = {"height",     "width",      "t_in",       "t_out",
                                  "min_actors", "max_actors", "class_count", "min_active",
                                  "max_active", "background_level", "noise", "contrast",
                                  "palette",    "seed"};
    if (!j.is_object()) throw ConfigError("synth config: expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("synth config: unknown key '" + key + "'");
    }
    SynthConfig cfg;
    try {
        cfg.height = j.at("height").get<int64_t>();
        cfg.width = j.at("width").get<int64_t>();
        cfg.t_in = j.at("t_in").get<int64_t>();
        cfg.t_out = j.at("t_out").get<int64_t>();
        cfg.min_actors = j.at("min_actors").get<int64_t>();
        cfg.max_actors = j.at("max_actors").get<int64_t>();
        cfg.class_count = j.at("class_count").get<int64_t>();
        cfg.min_active = j.at("min_active").get<int64_t>();
        cfg.max_active = j.at("max_active").get<int64_t>();
        cfg.background_level = j.at("background_level").get<double>();
        cfg.noise = j.at("noise").get<double>();
        cfg.contrast = j.at("contrast").get<double>();
        cfg.palette.clear();
        for (const auto& c : j.at("palette"))
            cfg.palette.push_back({c.at(0).get<double>(), c.at(1).get<double>(),
                                   c.at(2).get<double>()});
        cfg.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    return cfg;
}

void write_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError("truncated clip file: " + path);
    return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
           static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_clip(const Tensor& clip, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write clip file: " + path);
    write_u32(out, static_cast<uint32_t>(clip.ndim()));
    for (int64_t i = 0; i < clip.ndim(); ++i)
        write_u32(out, static_cast<uint32_t>(clip.dim(i)));
    write_u32(out, kDtypeF32);
    static_assert(std::endian::native == std::endian::little,
                  "raw float payload is little-endian");
    const auto vals = clip.values();
    out.write(reinterpret_cast<const char*>(vals.data()),
              static_cast<std::streamsize>(vals.size() * sizeof(float)));
    if (!out) throw DataError("short write on clip file: " + path);
}

Tensor read_clip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing sample file: " + path);
    const uint32_t rank = read_u32(in, path);
    if (rank == 0 || rank > 8) throw DataError("corrupt clip header: " + path);
    Shape shape;
    int64_t numel = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        shape.push_back(static_cast<int64_t>(read_u32(in, path)));
        numel *= shape.back();
    }
    if (read_u32(in, path) != kDtypeF32) throw DataError("unsupported clip dtype: " + path);
    std::vector<float> vals(static_cast<size_t>(numel));
    if (!in.read(reinterpret_cast<char*>(vals.data()),
                 static_cast<std::streamsize>(vals.size() * sizeof(float))))
        throw DataError("truncated clip file: " + path);
    return Tensor::from_values(shape, std::move(vals));
}

json ann_json(const SynthSample& sample) {
    json tubes = json::array();
    for (const auto& tube : sample.tubes) {
        json boxes = json::array();
        for (const auto& b : tube.boxes) boxes.push_back({b[0], b[1], b[2], b[3]});
        json visible = json::array();
        for (bool v : tube.visible) visible.push_back(v);
        tubes.push_back({{"class", tube.class_id}, {"boxes", boxes}, {"visible", visible}});
    }
    return {{"seed", sample.seed}, {"actor_count", sample.actor_count}, {"tubes", tubes}};
}

void read_ann(const std::string& path, SynthSample& sample) {
    std::ifstream in(path);
    if (!in) throw DataError("missing sample file: " + path);
    json j;
    try {
        in >> j;
        sample.seed = j.at("seed").get<uint64_t>();
        sample.actor_count = j.at("actor_count").get<int64_t>();
        for (const auto& t : j.at("tubes")) {
            GroundTruthTube tube;
            tube.class_id = t.at("class").get<int64_t>();
            for (const auto& b : t.at("boxes"))
                tube.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                                      b.at(2).get<double>(), b.at(3).get<double>()});
            for (const auto& v : t.at("visible")) tube.visible.push_back(v.get<bool>());
            sample.tubes.push_back(std::move(tube));
        }
    } catch (const json::exception& e) {
        throw DataError("corrupt annotation file " + path + ": " + e.what());
    }
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& cfg) { return config_json(cfg).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth config: ") + e.what());
    }
    return config_from(j);
}

uint64_t synth_config_hash(const SynthConfig& cfg) {
    const std::string dump = config_json(cfg).dump();
    uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : dump) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

void write_clip_file(const std::string& path, const Tensor& clip) { write_clip(clip, path); }

Tensor read_clip_file(const std::string& path) { return read_clip(path); }

namespace {

void write_sample(const SynthConfig& cfg, int64_t i, const std::string& dir) {
    SynthSample sample = generate_sample(cfg, i);
    write_clip(sample.clip, (fs::path(dir) / sample_name("clip", i, "bin")).string());
    std::ofstream ann((fs::path(dir) / sample_name("ann", i, "json")).string(), std::ios::trunc);
    if (!ann) throw DataError("cannot write annotation file for sample " + std::to_string(i));
    ann << ann_json(sample).dump(2) << "\n";
}

}  // namespace

void write_dataset(const SynthConfig& cfg, int64_t count, const std::string& dir, int workers) {
    cfg.validate();
    if (count < 0) throw ConfigError("write_dataset: negative count");
    if (workers < 1) throw ConfigError("write_dataset: workers must be >= 1");
    fs::create_directories(dir);
    if (workers == 1 || count < 2) {
        for (int64_t i = 0; i < count; ++i) write_sample(cfg, i, dir);
    } else {
        // Samples are independent, so the tree is identical for any worker
        // count; the first failure is rethrown after all threads join.
        std::atomic<int64_t> next{0};
        std::mutex mu;
        std::exception_ptr failure;
        std::vector<std::thread> pool;
        const int n = static_cast<int>(std::min<int64_t>(workers, count));
        for (int w = 0; w < n; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    const int64_t i = next.fetch_add(1);
                    if (i >= count) return;
                    try {
                        write_sample(cfg, i, dir);
                    } catch (...) {
                        const std::lock_guard<std::mutex> lock(mu);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    json manifest = {
        {"version", kFormatVersion},
        {"count", count},
        {"seed", cfg.seed},
        {"config", config_json(cfg)},
        {"config_hash", synth_config_hash(cfg)},
    };
    std::ofstream out((fs::path(dir) / "manifest.json").string(), std::ios::trunc);
    if (!out) throw DataError("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

SynthSample Dataset::sample(int64_t index) const {
    if (index < 0 || index >= count_)
        throw DataError("dataset index " + std::to_string(index) + " out of range");
    SynthSample s;
    s.clip = read_clip((fs::path(dir_) / sample_name("clip", index, "bin")).string());
    read_ann((fs::path(dir_) / sample_name("ann", index, "json")).string(), s);
    return s;
}

Dataset load_dataset(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    std::ifstream in(manifest_path);
    if (!in) throw DataError("missing manifest: " + manifest_path);
    json j;
    Dataset ds;
    ds.dir_ = dir;
    try {
        in >> j;
        if (j.at("version").get<int64_t>() != kFormatVersion)
            throw DataError("unsupported dataset format version in " + manifest_path);
        ds.count_ = j.at("count").get<int64_t>();
        ds.cfg_ = config_from(j.at("config"));
        if (j.at("config_hash").get<uint64_t>() != synth_config_hash(ds.cfg_))
            std::cerr << "warning: dataset config hash mismatch in " << manifest_path
                      << "; manifest may have been edited\n";
    } catch (const json::exception& e) {
        throw DataError("corrupt manifest " + manifest_path + ": " + e.what());
    }
    if (ds.count_ < 0) throw DataError("corrupt manifest " + manifest_path + ": negative count");
    for (int64_t i = 0; i < ds.count_; ++i) {
        for (const char* ext : {"bin", "json"}) {
            const char* prefix = ext[0] == 'b' ? "clip" : "ann";
            const auto path = fs::path(dir) / sample_name(prefix, i, ext);
            if (!fs::exists(path)) throw DataError("missing sample file: " + path.string());
        }
    }
    return ds;
}

}  // namespace tuber
