#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fuseshot/affinity.hpp"
#include "fuseshot/matrix.hpp"

namespace fuseshot {

// A labeled dataset split into two class-disjoint pools: classes with plenty
// of samples ("lots") and the one-example classes evaluation cares about.
// Class ids index class_names; every class belongs to exactly one pool.
struct DatasetBundle {
    Matrix features;                       // N x D
    std::vector<int> labels;               // N entries, into class_names
    std::vector<std::string> class_names;  // global class order
    std::vector<int> lots_classes;         // ascending class ids
    std::vector<int> one_classes;          // ascending class ids

    void validate() const;  // throws ConfigError on any inconsistency
};

// Synthetic benchmark: class prototypes drawn on the unit sphere with a
// hierarchical group structure, samples as prototype plus Gaussian noise,
// class embeddings as a fidelity-weighted mix of the prototype and fresh
// noise, and a class tree rebuilt from the prototypes by greedy agglomerative
// grouping with unit branch lengths.
struct SynthSpec {
    int lots_classes = 10;
    int one_example_classes = 5;
    int samples_per_class = 50;
    int feature_dim = 64;
    double separation = 1.2;  // child offset norm at the top level, halved per level
    double noise = 1.3;       // expected norm of a sample's offset from its prototype
    double fidelity = 0.9;     // 1 = embeddings equal prototypes, 0 = pure noise
    int tree_depth = 2;        // depth of the prototype hierarchy
    std::uint64_t seed = 7;

    void validate() const;
};

struct SynthData {
    DatasetBundle bundle;
    std::vector<SideInfoSource> sources;  // "class_embeddings" and "hierarchy"
    Matrix prototypes;                    // one row per class, in class id order
};

SynthData generate_synthetic(const SynthSpec& spec);

// --- file formats -----------------------------------------------------------
// features.csv   header f0..fD-1, one sample per row
// labels.csv     header "class", one class name per row
// split.json     {"lots": [names...], "one_example": [names...]}
// embeddings csv no header; first column class name, then the vector
// tree file      see TreeHierarchy

DatasetBundle load_dataset(const std::string& features_path, const std::string& labels_path,
                           const std::string& split_path);
void save_dataset(const DatasetBundle& bundle, const std::string& dir);

SideInfoSource load_embeddings_csv(const std::string& path, const std::string& name);
SideInfoSource load_tree_file(const std::string& path, const std::string& name);
void save_sources(const std::vector<SideInfoSource>& sources, const std::string& dir);

// Plain numeric matrix CSV. The reader skips a leading header row and/or a
// label column when those cells are not numeric.
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const Matrix& m, const std::string& path);
// Matrix with class names as both header and row labels (kernel/confusion dumps).
void write_labeled_matrix_csv(const Matrix& m, const std::vector<std::string>& names, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Shortest-round-trip decimal formatting used by every CSV writer, so writes
// are byte-deterministic and re-reads are exact.
std::string format_double(double v);

}  // namespace fuseshot
