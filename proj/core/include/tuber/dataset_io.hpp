#pragma once

#include <cstdint>
#include <string>

#include "tuber/synth.hpp"

namespace tuber {

// Canonical JSON form of the generator settings; the manifest embeds it and
// hashes it so tampering is detectable.
std::string synth_config_to_json(const SynthConfig& cfg);
// ConfigError on unknown or missing keys.
SynthConfig synth_config_from_json(const std::string& text);
uint64_t synth_config_hash(const SynthConfig& cfg);

// Directory layout: manifest.json, then per sample clip_%06d.bin (dims and
// dtype header, raw little-endian floats) and ann_%06d.json.
void write_dataset(const SynthConfig& cfg, int64_t count, const std::string& dir,
                   int workers = 1);

// Single-clip tensor files in the dataset format (rank, dims, dtype, raw
// little-endian floats).
void write_clip_file(const std::string& path, const Tensor& clip);
Tensor read_clip_file(const std::string& path);

class Dataset {
public:
    Dataset() = default;

    int64_t size() const { return count_; }
    const SynthConfig& config() const { return cfg_; }
    const std::string& dir() const { return dir_; }

    // Reads one sample back; bit-exact against what was written. DataError
    // on out-of-range index or corrupt files.
    SynthSample sample(int64_t index) const;

private:
    friend Dataset load_dataset(const std::string& dir);
    std::string dir_;
    SynthConfig cfg_;
    int64_t count_ = 0;
};

// Parses and checks the manifest, then verifies every sample file exists.
// DataError names the first missing file; a config-hash mismatch only warns.
Dataset load_dataset(const std::string& dir);

}  // namespace tuber
