#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "astnet/datasynth.hpp"
#include "astnet/model.hpp"
#include "astnet/training.hpp"

namespace astnet {

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Reads flat "key=value" lines; '#' starts a comment line.
ConfigEntries read_config_file(const std::string& path);

// Everything a command needs. Defaults are the desk-scale profile for the
// selected mode; file entries override them and flag entries override both.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SynthConfig data;
    std::uint64_t seed = 0;
    std::string out_dir = "astnet-out";
    std::string manifest;
    std::string checkpoint;
    std::string split = "test";
    std::size_t clips = 1;
    bool inject_bug = false;
    std::set<std::string> explicit_keys;

    static RunConfig build(const ConfigEntries& file, const ConfigEntries& flags,
                           const std::string& fallback_mode = "vector");
    bool is_explicit(const std::string& key) const { return explicit_keys.count(key) > 0; }

    // Desk-scale profile for a mode.
    static RunConfig defaults(SampleMode mode);
    void set(const std::string& key, const std::string& value);
};

}  // namespace astnet
