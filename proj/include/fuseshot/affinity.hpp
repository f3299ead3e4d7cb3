#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fuseshot/mlp.hpp"
#include "fuseshot/tree.hpp"

namespace fuseshot {

// Per-class side information: either a table of class embedding vectors or a
// class hierarchy. Sources are identified by name in configs.
struct EmbeddingTable {
    std::vector<std::string> classes;  // row i describes classes[i]
    Matrix table;                      // C x d_m
};

struct SideInfoSource {
    std::string name;
    std::variant<EmbeddingTable, TreeHierarchy> payload;
    bool is_tree() const { return std::holds_alternative<TreeHierarchy>(payload); }
};

// Hidden width of the mapping net that turns class embeddings into kernel
// space: wide inputs get 100, everything else 75. Output is always 50.
int mapping_hidden_dim(int input_dim);
inline constexpr int kMappingOutputDim = 50;

// A source resolved against a dataset's class list. For embedding sources,
// `data` holds the raw embedding rows reordered to the dataset's class
// indices; for tree sources it holds the correlation-normalized covariance in
// the same order. Classes missing from a source are a configuration error.
struct PreparedSource {
    std::string name;
    bool is_tree = false;
    Matrix data;
    int input_dim() const { return is_tree ? 0 : data.cols(); }
};

std::vector<PreparedSource> prepare_sources(const std::vector<SideInfoSource>& available,
                                            const std::vector<std::string>& class_names,
                                            const std::vector<std::string>& active_names);

// Registers the mapping net parameters (src.<name>.*) for an embedding
// source; tree sources carry no parameters.
void add_mapping_params(ParamStore& store, const PreparedSource& src, std::uint64_t seed);

// Class codes f_m(r) for the given class subset: |subset| x 50, l2-normalized
// rows. Embedding sources only.
Var embed_classes(Tape& tape, ParamRegistry& params, const PreparedSource& src, const std::vector<int>& class_subset);

// Label-affinity kernel over a class subset: the uniform average of one
// kernel per source (inner products of mapped class codes, or the normalized
// tree covariance). Differentiable w.r.t. the mapping net parameters.
Var build_label_kernel(Tape& tape, ParamRegistry& params, const std::vector<PreparedSource>& sources,
                       const std::vector<int>& class_subset);

// Softmax attention of row `query_pos` of a kernel over the given target
// positions. Plain values; used where gradients must not flow.
std::vector<double> attention_over_labels(const Matrix& kernel, int query_pos, const std::vector<int>& target_pos);

// Quasi-label for a query class against a support set: softmax attention over
// the support *samples* (a class with k support samples gets k slots), summed
// per class. support_pos[i] is sample i's row in the kernel, support_class[i]
// its class in [0, num_classes).
std::vector<double> quasi_label(const Matrix& kernel, int query_pos, const std::vector<int>& support_pos,
                                const std::vector<int>& support_class, int num_classes);

// Batch of quasi-labels, one row per query position. Rows for repeated query
// positions are computed once and copied.
Matrix quasi_labels(const Matrix& kernel, const std::vector<int>& query_pos, const std::vector<int>& support_pos,
                    const std::vector<int>& support_class, int num_classes);

}  // namespace fuseshot
