#include "tuber/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tuber/errors.hpp"

namespace tuber {

namespace {

constexpr char kMagic[4] = {'T', 'U', 'B', 'R'};
constexpr uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

void put_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ofstream& out, uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_i64(std::ofstream& out, int64_t v) { put_u64(out, static_cast<uint64_t>(v)); }

void put_f64(std::ofstream& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

void put_string(std::ofstream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_floats(std::ofstream& out, std::span<const float> v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

struct Reader {
    std::ifstream in;
    std::string path;

    void raw(void* dst, size_t n) {
        if (!in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
            throw DataError("truncated checkpoint: " + path);
    }
    uint32_t u32() {
        uint32_t v;
        raw(&v, sizeof v);
        return v;
    }
    uint64_t u64() {
        uint64_t v;
        raw(&v, sizeof v);
        return v;
    }
    int64_t i64() { return static_cast<int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const uint64_t n = u64();
        if (n > (1ull << 32)) throw DataError("corrupt checkpoint string length: " + path);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    std::vector<float> floats(size_t n) {
        std::vector<float> v(n);
        raw(v.data(), n * sizeof(float));
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_json,
                     const ParamMap& params, const AdamW* optim, const TrainerState& state,
                     const std::string& rng_state) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_string(out, config_json);
    put_string(out, rng_state);
    put_i64(out, state.step);
    put_i64(out, state.epoch);
    put_f64(out, state.lr_scale);
    put_f64(out, state.best_val_loss);
    put_f64(out, state.best_val_map);
    put_i64(out, state.plateau_wait);

    put_u32(out, static_cast<uint32_t>(params.items().size()));
    for (const auto& [name, t] : params.items()) {
        put_string(out, name);
        put_u32(out, static_cast<uint32_t>(t.ndim()));
        for (int64_t d = 0; d < t.ndim(); ++d) put_u32(out, static_cast<uint32_t>(t.dim(d)));
        put_floats(out, t.values());
    }

    out.put(optim ? 1 : 0);
    if (optim) {
        if (optim->slots().size() != params.items().size())
            throw DataError("optimizer state does not match the parameter map");
        put_i64(out, optim->step_count());
        for (const auto& slot : optim->slots()) {
            put_floats(out, slot.m);
            put_floats(out, slot.v);
        }
    }
    if (!out) throw DataError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r{std::ifstream(path, std::ios::binary), path};
    if (!r.in) throw DataError("cannot read checkpoint: " + path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("bad checkpoint magic: " + path);
    if (r.u32() != kVersion) throw DataError("unsupported checkpoint version: " + path);

    Checkpoint ckpt;
    ckpt.config_json = r.str();
    ckpt.rng_state = r.str();
    ckpt.state.step = r.i64();
    ckpt.state.epoch = r.i64();
    ckpt.state.lr_scale = r.f64();
    ckpt.state.best_val_loss = r.f64();
    ckpt.state.best_val_map = r.f64();
    ckpt.state.plateau_wait = r.i64();

    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const uint32_t rank = r.u32();
        if (rank > 8) throw DataError("corrupt checkpoint tensor rank: " + path);
        Shape shape;
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int64_t>(r.u32()));
            numel *= shape.back();
        }
        ckpt.params.emplace_back(
            std::move(name),
            Tensor::from_values(shape, r.floats(static_cast<size_t>(numel))));
    }

    char has_opt = 0;
    r.raw(&has_opt, 1);
    ckpt.has_optimizer = has_opt != 0;
    if (ckpt.has_optimizer) {
        ckpt.opt_step = r.i64();
        for (const auto& [name, t] : ckpt.params) {
            AdamW::Slot slot;
            slot.m = r.floats(static_cast<size_t>(t.numel()));
            slot.v = r.floats(static_cast<size_t>(t.numel()));
            ckpt.opt_slots.push_back(std::move(slot));
        }
    }
    return ckpt;
}

void restore_params(ParamMap& params, const Checkpoint& ckpt) {
    if (params.items().size() != ckpt.params.size())
        throw DataError("checkpoint parameter count does not match the model");
    for (const auto& [name, saved] : ckpt.params) {
        Tensor* live = params.find(name);
        if (!live) throw DataError("checkpoint parameter missing from the model: " + name);
        if (live->shape() != saved.shape())
            throw DataError("checkpoint shape mismatch for parameter: " + name);
        auto dst = live->values_mut();
        const auto src = saved.values();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

void restore_optimizer(AdamW& optim, const Checkpoint& ckpt) {
    if (!ckpt.has_optimizer) throw DataError("checkpoint carries no optimizer state");
    if (optim.slots().size() != ckpt.opt_slots.size())
        throw DataError("checkpoint optimizer state does not match the parameter map");
    for (size_t i = 0; i < ckpt.opt_slots.size(); ++i) {
        if (optim.slots()[i].m.size() != ckpt.opt_slots[i].m.size())
            throw DataError("checkpoint optimizer slot size mismatch");
        optim.slots()[i] = ckpt.opt_slots[i];
    }
    optim.set_step_count(ckpt.opt_step);
}

}  // namespace tuber
