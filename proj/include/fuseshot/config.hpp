#pragma once

#include <string>
#include <vector>

#include "fuseshot/dataset.hpp"
#include "fuseshot/trainer.hpp"

namespace fuseshot {

// Where a run's data comes from: a generated synthetic benchmark, or files on
// disk (features/labels/split plus any number of named side-info files).
struct SourceFile {
    std::string name;
    std::string path;
};

struct DatasetConfig {
    std::string type = "synthetic";  // "synthetic" | "files"
    SynthSpec synthetic;
    std::string features_path;
    std::string labels_path;
    std::string split_path;
    std::vector<SourceFile> embeddings;
    std::vector<SourceFile> trees;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
};

// JSON round trip. Missing keys fall back to defaults; unknown keys are a
// ConfigError so typos don't silently run the wrong experiment.
ExperimentConfig config_from_json(const std::string& text);
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

struct LoadedData {
    DatasetBundle bundle;
    std::vector<SideInfoSource> sources;
};

LoadedData load_data(const DatasetConfig& cfg);

// ParamStore serialization for model dumps.
std::string params_to_json(const ParamStore& params);

}  // namespace fuseshot
