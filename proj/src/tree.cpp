#include "fuseshot/tree.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

namespace fuseshot {

namespace {

std::string where(const TreeHierarchy::NodeDecl& d) {
    if (d.line > 0) return "line " + std::to_string(d.line);
    return "node '" + d.id + "'";
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

}  // namespace

TreeHierarchy TreeHierarchy::parse(std::string_view text) {
    std::vector<NodeDecl> decls;
    std::istringstream stream{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() < 3 || tokens.size() > 4) {
            throw ParseError("tree line " + std::to_string(lineno) + ": expected 3 or 4 fields, got " +
                             std::to_string(tokens.size()));
        }
        NodeDecl d;
        d.id = tokens[0];
        d.parent = tokens[1];
        d.line = lineno;
        char* end = nullptr;
        d.length = std::strtod(tokens[2].c_str(), &end);
        if (end == tokens[2].c_str() || *end != '\0' || !std::isfinite(d.length)) {
            throw ParseError("tree line " + std::to_string(lineno) + ": bad branch length '" + tokens[2] + "'");
        }
        if (tokens.size() == 4) d.class_label = tokens[3];
        decls.push_back(std::move(d));
    }
    return from_nodes(decls);
}

TreeHierarchy TreeHierarchy::from_nodes(const std::vector<NodeDecl>& decls) {
    if (decls.empty()) throw ParseError("tree: no nodes");

    TreeHierarchy t;
    std::map<std::string, int> index;
    for (const NodeDecl& d : decls) {
        if (d.id == "ROOT") throw ParseError("tree " + where(d) + ": 'ROOT' is reserved for the parent field");
        if (d.id.empty()) throw ParseError("tree " + where(d) + ": empty node id");
        if (index.count(d.id)) throw ParseError("tree " + where(d) + ": duplicate node id '" + d.id + "'");
        if (d.length < 0.0) throw ParseError("tree " + where(d) + ": negative branch length");
        index.emplace(d.id, static_cast<int>(t.nodes_.size()));
        Node n;
        n.id = d.id;
        n.length = d.length;
        n.class_label = d.class_label;
        t.nodes_.push_back(std::move(n));
    }

    for (std::size_t i = 0; i < decls.size(); ++i) {
        const NodeDecl& d = decls[i];
        if (d.parent == "ROOT") {
            if (t.root_ >= 0) {
                throw ParseError("tree " + where(d) + ": second root '" + d.id + "' (root is '" +
                                 t.nodes_[static_cast<std::size_t>(t.root_)].id + "')");
            }
            t.root_ = static_cast<int>(i);
        } else {
            const auto it = index.find(d.parent);
            if (it == index.end()) {
                throw ParseError("tree " + where(d) + ": unknown parent '" + d.parent + "'");
            }
            t.nodes_[i].parent = it->second;
        }
    }
    if (t.root_ < 0) throw ParseError("tree: no node has parent ROOT");

    // Reachability from the root doubles as cycle detection: every node has a
    // parent, so an unreachable node's ancestor chain must loop.
    std::vector<int> child_count(t.nodes_.size(), 0);
    for (const Node& n : t.nodes_) {
        if (n.parent >= 0) ++child_count[static_cast<std::size_t>(n.parent)];
    }
    std::vector<char> reached(t.nodes_.size(), 0);
    {
        std::vector<int> stack{t.root_};
        std::vector<std::vector<int>> children(t.nodes_.size());
        for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
            if (t.nodes_[i].parent >= 0) {
                children[static_cast<std::size_t>(t.nodes_[i].parent)].push_back(static_cast<int>(i));
            }
        }
        while (!stack.empty()) {
            const int at = stack.back();
            stack.pop_back();
            reached[static_cast<std::size_t>(at)] = 1;
            for (const int c : children[static_cast<std::size_t>(at)]) stack.push_back(c);
        }
    }
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
        if (!reached[i]) {
            throw ParseError("tree " + where(decls[i]) + ": node '" + t.nodes_[i].id +
                             "' is part of a parent cycle");
        }
    }

    std::map<std::string, int> label_seen;
    for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
        const Node& n = t.nodes_[i];
        const bool is_leaf = child_count[i] == 0;
        if (is_leaf && n.class_label.empty()) {
            throw ParseError("tree " + where(decls[i]) + ": leaf '" + n.id + "' has no class label");
        }
        if (!is_leaf && !n.class_label.empty()) {
            throw ParseError("tree " + where(decls[i]) + ": internal node '" + n.id + "' carries class label '" +
                             n.class_label + "'");
        }
        if (is_leaf) {
            if (label_seen.count(n.class_label)) {
                throw ParseError("tree " + where(decls[i]) + ": duplicate class label '" + n.class_label + "'");
            }
            label_seen.emplace(n.class_label, 1);
            t.class_names_.push_back(n.class_label);
            t.leaf_of_class_.push_back(static_cast<int>(i));
        }
    }
    return t;
}

int TreeHierarchy::class_index(const std::string& name) const {
    for (std::size_t i = 0; i < class_names_.size(); ++i) {
        if (class_names_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::string TreeHierarchy::format() const {
    std::string out;
    for (const Node& n : nodes_) {
        out += n.id;
        out += '\t';
        out += n.parent < 0 ? "ROOT" : nodes_[static_cast<std::size_t>(n.parent)].id;
        out += '\t';
        std::ostringstream len;
        len.precision(17);
        len << n.length;
        out += len.str();
        if (!n.class_label.empty()) {
            out += '\t';
            out += n.class_label;
        }
        out += '\n';
    }
    return out;
}

Matrix tree_covariance(const TreeHierarchy& tree) {
    const int c = tree.class_count();
    // Weighted depth of every node; the root's own length is not an edge.
    std::vector<double> depth(static_cast<std::size_t>(tree.node_count()), 0.0);
    std::vector<char> done(static_cast<std::size_t>(tree.node_count()), 0);
    done[static_cast<std::size_t>(tree.root())] = 1;
    for (int i = 0; i < tree.node_count(); ++i) {
        // Climb to a resolved ancestor, then unwind.
        std::vector<int> chain;
        int at = i;
        while (!done[static_cast<std::size_t>(at)]) {
            chain.push_back(at);
            at = tree.parent_of(at);
        }
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            depth[static_cast<std::size_t>(*it)] =
                depth[static_cast<std::size_t>(tree.parent_of(*it))] + tree.length_of(*it);
            done[static_cast<std::size_t>(*it)] = 1;
        }
    }

    // Root paths per class, as ancestor stamps.
    std::vector<int> stamp(static_cast<std::size_t>(tree.node_count()), -1);
    Matrix b(c, c);
    for (int i = 0; i < c; ++i) {
        for (int at = tree.leaf_of_class(i); at >= 0; at = tree.parent_of(at)) {
            stamp[static_cast<std::size_t>(at)] = i;
        }
        b(i, i) = depth[static_cast<std::size_t>(tree.leaf_of_class(i))];
        for (int j = 0; j < i; ++j) {
            int at = tree.leaf_of_class(j);
            while (stamp[static_cast<std::size_t>(at)] != i) at = tree.parent_of(at);
            b(i, j) = b(j, i) = depth[static_cast<std::size_t>(at)];
        }
    }
    return b;
}

Matrix tree_covariance_vdv(const TreeHierarchy& tree) {
    const int c = tree.class_count();
    // One edge per non-root node.
    std::vector<int> edge_of_node(static_cast<std::size_t>(tree.node_count()), -1);
    std::vector<double> lengths;
    for (int i = 0; i < tree.node_count(); ++i) {
        if (i == tree.root()) continue;
        edge_of_node[static_cast<std::size_t>(i)] = static_cast<int>(lengths.size());
        lengths.push_back(tree.length_of(i));
    }
    const int e = static_cast<int>(lengths.size());
    Matrix v(c, e);
    for (int i = 0; i < c; ++i) {
        for (int at = tree.leaf_of_class(i); at != tree.root(); at = tree.parent_of(at)) {
            v(i, edge_of_node[static_cast<std::size_t>(at)]) = 1.0;
        }
    }
    Matrix d(e, e);
    for (int k = 0; k < e; ++k) d(k, k) = lengths[static_cast<std::size_t>(k)];
    return matmul(matmul(v, d), transpose(v));
}

Matrix normalize_covariance(const Matrix& b) {
    if (b.rows() != b.cols()) throw ShapeError("normalize_covariance: matrix is not square");
    const int c = b.rows();
    for (int i = 0; i < c; ++i) {
        if (!(b(i, i) > 0.0)) {
            throw ContractError("normalize_covariance: non-positive diagonal at class " + std::to_string(i));
        }
    }
    Matrix out(c, c);
    for (int i = 0; i < c; ++i) {
        for (int j = 0; j < c; ++j) out(i, j) = b(i, j) / std::sqrt(b(i, i) * b(j, j));
    }
    return out;
}

Matrix expand_to_samples(const Matrix& class_kernel, const std::vector<int>& labels) {
    if (class_kernel.rows() != class_kernel.cols()) throw ShapeError("expand_to_samples: kernel is not square");
    const int c = class_kernel.rows();
    const int n = static_cast<int>(labels.size());
    for (const int y : labels) {
        if (y < 0 || y >= c) {
            throw ContractError("expand_to_samples: label " + std::to_string(y) + " outside [0," + std::to_string(c) +
                                ")");
        }
    }
    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            out(i, j) = class_kernel(labels[static_cast<std::size_t>(i)], labels[static_cast<std::size_t>(j)]);
        }
    }
    return out;
}

}  // namespace fuseshot
