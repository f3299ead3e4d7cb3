#include "fuseshot/config.hpp"

#include <initializer_list>
#include <string>

#include <json.hpp>

namespace fuseshot {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) known = true;
        }
        if (!known) throw ConfigError("config: unknown key '" + where + key + "'");
    }
}

template <typename T>
T field(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: bad value for '" + where + key + "'");
    }
}

SynthSpec synth_from_json(const json& j, const std::string& where) {
    check_keys(j, where,
               {"lots_classes", "one_example_classes", "samples_per_class", "feature_dim", "separation", "noise",
                "fidelity", "tree_depth", "seed"});
    SynthSpec spec;
    spec.lots_classes = field(j, "lots_classes", spec.lots_classes, where);
    spec.one_example_classes = field(j, "one_example_classes", spec.one_example_classes, where);
    spec.samples_per_class = field(j, "samples_per_class", spec.samples_per_class, where);
    spec.feature_dim = field(j, "feature_dim", spec.feature_dim, where);
    spec.separation = field(j, "separation", spec.separation, where);
    spec.noise = field(j, "noise", spec.noise, where);
    spec.fidelity = field(j, "fidelity", spec.fidelity, where);
    spec.tree_depth = field(j, "tree_depth", spec.tree_depth, where);
    spec.seed = field(j, "seed", spec.seed, where);
    return spec;
}

json synth_to_json(const SynthSpec& spec) {
    json j;
    j["lots_classes"] = spec.lots_classes;
    j["one_example_classes"] = spec.one_example_classes;
    j["samples_per_class"] = spec.samples_per_class;
    j["feature_dim"] = spec.feature_dim;
    j["separation"] = spec.separation;
    j["noise"] = spec.noise;
    j["fidelity"] = spec.fidelity;
    j["tree_depth"] = spec.tree_depth;
    j["seed"] = spec.seed;
    return j;
}

std::vector<SourceFile> source_files_from_json(const json& j, const std::string& where) {
    std::vector<SourceFile> files;
    if (!j.is_array()) throw ConfigError("config: '" + where + "' must be an array");
    for (const auto& entry : j) {
        check_keys(entry, where + ".", {"name", "path"});
        if (!entry.contains("name") || !entry.contains("path")) {
            throw ConfigError("config: entries of '" + where + "' need both 'name' and 'path'");
        }
        files.push_back(SourceFile{entry.at("name").get<std::string>(), entry.at("path").get<std::string>()});
    }
    return files;
}

DatasetConfig dataset_from_json(const json& j) {
    check_keys(j, "dataset.", {"type", "synthetic", "features", "labels", "split", "embeddings", "trees"});
    DatasetConfig cfg;
    cfg.type = field<std::string>(j, "type", cfg.type, "dataset.");
    if (cfg.type != "synthetic" && cfg.type != "files") {
        throw ConfigError("config: dataset.type must be 'synthetic' or 'files', got '" + cfg.type + "'");
    }
    if (j.contains("synthetic")) cfg.synthetic = synth_from_json(j.at("synthetic"), "dataset.synthetic.");
    cfg.features_path = field<std::string>(j, "features", "", "dataset.");
    cfg.labels_path = field<std::string>(j, "labels", "", "dataset.");
    cfg.split_path = field<std::string>(j, "split", "", "dataset.");
    if (j.contains("embeddings")) cfg.embeddings = source_files_from_json(j.at("embeddings"), "dataset.embeddings");
    if (j.contains("trees")) cfg.trees = source_files_from_json(j.at("trees"), "dataset.trees");
    return cfg;
}

TrainConfig train_from_json(const json& j) {
    check_keys(j, "train.",
               {"head", "alpha", "batch_size", "shots", "iterations", "learning_rate", "beta1", "beta2", "epsilon",
                "finetune_iterations", "trials", "seed", "sources", "hidden_dim", "embed_dim"});
    TrainConfig cfg;
    cfg.head = parse_head(field<std::string>(j, "head", head_name(cfg.head), "train."));
    cfg.alpha = field(j, "alpha", cfg.alpha, "train.");
    cfg.batch_size = field(j, "batch_size", cfg.batch_size, "train.");
    cfg.shots = field(j, "shots", cfg.shots, "train.");
    cfg.iterations = field(j, "iterations", cfg.iterations, "train.");
    cfg.learning_rate = field(j, "learning_rate", cfg.learning_rate, "train.");
    cfg.beta1 = field(j, "beta1", cfg.beta1, "train.");
    cfg.beta2 = field(j, "beta2", cfg.beta2, "train.");
    cfg.epsilon = field(j, "epsilon", cfg.epsilon, "train.");
    cfg.finetune_iterations = field(j, "finetune_iterations", cfg.finetune_iterations, "train.");
    cfg.trials = field(j, "trials", cfg.trials, "train.");
    cfg.seed = field(j, "seed", cfg.seed, "train.");
    cfg.sources = field(j, "sources", cfg.sources, "train.");
    cfg.hidden_dim = field(j, "hidden_dim", cfg.hidden_dim, "train.");
    cfg.embed_dim = field(j, "embed_dim", cfg.embed_dim, "train.");
    return cfg;
}

json train_to_json(const TrainConfig& cfg) {
    json j;
    j["head"] = head_name(cfg.head);
    j["alpha"] = cfg.alpha;
    j["batch_size"] = cfg.batch_size;
    j["shots"] = cfg.shots;
    j["iterations"] = cfg.iterations;
    j["learning_rate"] = cfg.learning_rate;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["epsilon"] = cfg.epsilon;
    j["finetune_iterations"] = cfg.finetune_iterations;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["sources"] = cfg.sources;
    j["hidden_dim"] = cfg.hidden_dim;
    j["embed_dim"] = cfg.embed_dim;
    return j;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    check_keys(j, "", {"dataset", "train"});
    ExperimentConfig cfg;
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    json ds;
    ds["type"] = cfg.dataset.type;
    if (cfg.dataset.type == "synthetic") {
        ds["synthetic"] = synth_to_json(cfg.dataset.synthetic);
    } else {
        ds["features"] = cfg.dataset.features_path;
        ds["labels"] = cfg.dataset.labels_path;
        ds["split"] = cfg.dataset.split_path;
        json embs = json::array(), trees = json::array();
        for (const SourceFile& f : cfg.dataset.embeddings) embs.push_back({{"name", f.name}, {"path", f.path}});
        for (const SourceFile& f : cfg.dataset.trees) trees.push_back({{"name", f.name}, {"path", f.path}});
        ds["embeddings"] = embs;
        ds["trees"] = trees;
    }
    j["dataset"] = ds;
    j["train"] = train_to_json(cfg.train);
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    try {
        return config_from_json(read_text_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
    write_text_file(path, config_to_json(cfg));
}

LoadedData load_data(const DatasetConfig& cfg) {
    LoadedData data;
    if (cfg.type == "synthetic") {
        SynthData synth = generate_synthetic(cfg.synthetic);
        data.bundle = std::move(synth.bundle);
        data.sources = std::move(synth.sources);
        return data;
    }
    if (cfg.type != "files") throw ConfigError("config: dataset.type must be 'synthetic' or 'files'");
    if (cfg.features_path.empty() || cfg.labels_path.empty() || cfg.split_path.empty()) {
        throw ConfigError("config: dataset.type 'files' needs 'features', 'labels' and 'split' paths");
    }
    data.bundle = load_dataset(cfg.features_path, cfg.labels_path, cfg.split_path);
    for (const SourceFile& f : cfg.embeddings) data.sources.push_back(load_embeddings_csv(f.path, f.name));
    for (const SourceFile& f : cfg.trees) data.sources.push_back(load_tree_file(f.path, f.name));
    return data;
}

std::string params_to_json(const ParamStore& params) {
    json j;
    for (const std::string& name : params.names()) {
        const Matrix& m = params.at(name);
        json entry;
        entry["rows"] = m.rows();
        entry["cols"] = m.cols();
        json data = json::array();
        for (std::size_t i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
        entry["data"] = std::move(data);
        j[name] = std::move(entry);
    }
    return j.dump(2) + "\n";
}

}  // namespace fuseshot
