#pragma once

#include <cstdint>
#include <string>

#include "rt/dataset.hpp"
#include "rt/model.hpp"
#include "rt/training.hpp"

namespace rt {

// Where the data comes from: the procedural glyph generator, or dataset
// files on disk.
struct DataConfig {
    enum class Source { shapes, file };

    Source source = Source::shapes;
    // generator parameters
    int n = 512;
    int classes = 4;
    int size = 12;
    double noise = 0.05;
    uint64_t seed = 1;
    int val_n = 128;
    uint64_t val_seed = 2;
    // file parameters
    std::string path;
    std::string val_path;  // empty = no validation set

    void validate() const;

    bool operator==(const DataConfig&) const = default;
};

// One training run, parsed from an ini-style file with sections
// [model], [train], [attack], [data], [output]. Every key has a default;
// the [attack] section's presence is what turns adversarial training on.
struct RunConfig {
    ModelConfig model;  // defaults to mlp {64,64} on 1x12x12, 4 classes
    uint64_t model_seed = 7;
    TrainConfig train;
    bool free_training = false;
    int replay = 4;  // minibatch replay count for free training
    DataConfig data;
    std::string output_dir = "run";

    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

RunConfig default_run_config();

// key = value lines under [section] headers; # and ; start comments.
// Unknown sections or keys, duplicate keys, and malformed values are
// errors naming the file and line. `name` is only used in messages.
RunConfig parse_config_text(const std::string& text, const std::string& name);
RunConfig parse_config(const std::string& path);

// Full ini text (every key explicit); parse_config_text(serialize_config(c))
// reproduces c exactly.
std::string serialize_config(const RunConfig& c);

}  // namespace rt
