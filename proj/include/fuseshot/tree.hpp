#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fuseshot/matrix.hpp"

namespace fuseshot {

// Rooted class hierarchy with branch lengths. Text format, one node per line:
//
//   node_id <TAB> parent_id_or_ROOT <TAB> branch_length <TAB> optional_class_label
//
// '#' starts a comment, blank lines are skipped. Exactly one node names ROOT
// as its parent; its own branch length is ignored (conventionally 0). Leaves
// carry class labels, internal nodes must not. Class indices follow the order
// in which labeled leaves appear.
class TreeHierarchy {
public:
    // Declaration form used both by the parser and by programmatic builders.
    struct NodeDecl {
        std::string id;
        std::string parent;  // another node id, or "ROOT"
        double length = 0.0;
        std::string class_label;  // empty for internal nodes
        int line = 0;             // 0 when not from a file
    };

    static TreeHierarchy parse(std::string_view text);
    static TreeHierarchy from_nodes(const std::vector<NodeDecl>& decls);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int class_count() const { return static_cast<int>(class_names_.size()); }
    const std::vector<std::string>& class_names() const { return class_names_; }
    int class_index(const std::string& name) const;  // -1 when absent

    int root() const { return root_; }
    int parent_of(int node) const { return nodes_[static_cast<std::size_t>(node)].parent; }
    double length_of(int node) const { return nodes_[static_cast<std::size_t>(node)].length; }
    int leaf_of_class(int cls) const { return leaf_of_class_[static_cast<std::size_t>(cls)]; }

    // Serializes back to the text format above.
    std::string format() const;

private:
    struct Node {
        std::string id;
        int parent = -1;
        double length = 0.0;
        std::string class_label;
    };
    std::vector<Node> nodes_;
    int root_ = -1;
    std::vector<std::string> class_names_;
    std::vector<int> leaf_of_class_;
};

// Tree-structured covariance over the C classes: B[i][j] is the summed branch
// length from the root down to the nearest common ancestor of leaves i and j
// (so B[i][i] is the full root-to-leaf path weight). Computed by direct
// ancestor walks.
Matrix tree_covariance(const TreeHierarchy& tree);

// Same matrix through the factored route B = V D V^T, where D holds one
// branch length per non-root node and V[c][e] marks the edges on the root
// path of leaf c. Kept as an independent cross-check of tree_covariance.
Matrix tree_covariance_vdv(const TreeHierarchy& tree);

// Correlation form B[i][j] / sqrt(B[i][i] B[j][j]); unit diagonal. Requires a
// strictly positive diagonal.
Matrix normalize_covariance(const Matrix& b);

// Lifts a C x C class kernel to an N x N sample kernel: out[i][j] =
// k[labels[i]][labels[j]].
Matrix expand_to_samples(const Matrix& class_kernel, const std::vector<int>& labels);

}  // namespace fuseshot
