#include "fuseshot/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fuseshot/rng.hpp"

namespace fuseshot {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (const char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double* out) {
    const char* b = s.c_str();
    char* e = nullptr;
    *out = std::strtod(b, &e);
    while (*e == ' ' || *e == '\t') ++e;
    return e != b && *e == '\0' && !s.empty();
}

std::string pool_name(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02d", prefix, i);
    return buf;
}

std::vector<double> unit_gaussian_vec(int dim, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double sq = 0.0;
    for (double& x : v) {
        x = rng.normal();
        sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
    return v;
}

void normalize_in_place(std::vector<double>& v) {
    double sq = 0.0;
    for (const double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (double& x : v) x /= norm;
    }
}

// Greedy average-linkage agglomeration of the class prototypes; unit branch
// lengths, lowest-index tie-breaks keep it deterministic.
TreeHierarchy agglomerate_tree(const Matrix& prototypes, const std::vector<std::string>& class_names) {
    const int c = prototypes.rows();
    struct Cluster {
        std::vector<int> members;
        std::string node_id;
        bool alive = true;
    };
    std::vector<Cluster> clusters(static_cast<std::size_t>(c));
    std::vector<TreeHierarchy::NodeDecl> decls(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) {
        clusters[static_cast<std::size_t>(i)].members = {i};
        clusters[static_cast<std::size_t>(i)].node_id = class_names[static_cast<std::size_t>(i)];
        decls[static_cast<std::size_t>(i)] =
            TreeHierarchy::NodeDecl{class_names[static_cast<std::size_t>(i)], "", 1.0,
                                    class_names[static_cast<std::size_t>(i)], 0};
    }

    const auto proto_dist = [&](int a, int b) {
        double sq = 0.0;
        for (int j = 0; j < prototypes.cols(); ++j) {
            const double d = prototypes(a, j) - prototypes(b, j);
            sq += d * d;
        }
        return std::sqrt(sq);
    };
    const auto linkage = [&](const Cluster& a, const Cluster& b) {
        double sum = 0.0;
        for (const int i : a.members) {
            for (const int j : b.members) sum += proto_dist(i, j);
        }
        return sum / static_cast<double>(a.members.size() * b.members.size());
    };

    int next_internal = 0;
    int alive = c;
    while (alive > 1) {
        int best_a = -1, best_b = -1;
        double best = 0.0;
        for (std::size_t a = 0; a < clusters.size(); ++a) {
            if (!clusters[a].alive) continue;
            for (std::size_t b = a + 1; b < clusters.size(); ++b) {
                if (!clusters[b].alive) continue;
                const double d = linkage(clusters[a], clusters[b]);
                if (best_a < 0 || d < best) {
                    best = d;
                    best_a = static_cast<int>(a);
                    best_b = static_cast<int>(b);
                }
            }
        }
        const std::string id = "g" + std::to_string(next_internal++);
        for (auto& d : decls) {
            if (d.id == clusters[static_cast<std::size_t>(best_a)].node_id ||
                d.id == clusters[static_cast<std::size_t>(best_b)].node_id) {
                if (d.parent.empty()) d.parent = id;
            }
        }
        decls.push_back(TreeHierarchy::NodeDecl{id, "", 1.0, "", 0});
        Cluster merged;
        merged.node_id = id;
        merged.members = clusters[static_cast<std::size_t>(best_a)].members;
        merged.members.insert(merged.members.end(), clusters[static_cast<std::size_t>(best_b)].members.begin(),
                              clusters[static_cast<std::size_t>(best_b)].members.end());
        clusters[static_cast<std::size_t>(best_a)].alive = false;
        clusters[static_cast<std::size_t>(best_b)].alive = false;
        clusters.push_back(std::move(merged));
        alive -= 1;
    }
    for (auto& d : decls) {
        if (d.parent.empty()) {
            d.parent = "ROOT";
            d.length = 0.0;
        }
    }
    return TreeHierarchy::from_nodes(decls);
}

}  // namespace

void DatasetBundle::validate() const {
    const int c = static_cast<int>(class_names.size());
    if (c == 0) throw ConfigError("dataset: no classes");
    {
        std::set<std::string> seen(class_names.begin(), class_names.end());
        if (static_cast<int>(seen.size()) != c) throw ConfigError("dataset: duplicate class names");
    }
    if (static_cast<int>(labels.size()) != features.rows()) {
        throw ConfigError("dataset: " + std::to_string(features.rows()) + " feature rows vs " +
                          std::to_string(labels.size()) + " labels");
    }
    for (const int y : labels) {
        if (y < 0 || y >= c) throw ConfigError("dataset: label " + std::to_string(y) + " out of range");
    }
    std::vector<int> pool_of(static_cast<std::size_t>(c), -1);
    const auto mark = [&](const std::vector<int>& ids, int which, const char* what) {
        for (const int id : ids) {
            if (id < 0 || id >= c) throw ConfigError(std::string("dataset: ") + what + " class id out of range");
            if (pool_of[static_cast<std::size_t>(id)] != -1) {
                throw ConfigError("dataset: class '" + class_names[static_cast<std::size_t>(id)] +
                                  "' assigned to both pools");
            }
            pool_of[static_cast<std::size_t>(id)] = which;
        }
    };
    mark(lots_classes, 0, "lots");
    mark(one_classes, 1, "one-example");
    for (int id = 0; id < c; ++id) {
        if (pool_of[static_cast<std::size_t>(id)] == -1) {
            throw ConfigError("dataset: class '" + class_names[static_cast<std::size_t>(id)] +
                              "' belongs to neither pool");
        }
    }
    if (one_classes.empty()) throw ConfigError("dataset: no one-example classes");
    if (!std::is_sorted(lots_classes.begin(), lots_classes.end()) ||
        !std::is_sorted(one_classes.begin(), one_classes.end())) {
        throw ConfigError("dataset: pool class ids must be ascending");
    }
}

void SynthSpec::validate() const {
    if (lots_classes < 1 || one_example_classes < 1) throw ConfigError("synth: both pools need at least one class");
    if (lots_classes + one_example_classes > 4096) throw ConfigError("synth: too many classes");
    if (samples_per_class < 1) throw ConfigError("synth: samples_per_class must be >= 1");
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be >= 1");
    if (!(separation > 0.0)) throw ConfigError("synth: separation must be > 0");
    if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
    if (fidelity < 0.0 || fidelity > 1.0) throw ConfigError("synth: fidelity must be in [0,1]");
    if (tree_depth < 1 || tree_depth > 10) throw ConfigError("synth: tree_depth must be in [1,10]");
}

SynthData generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int total = spec.lots_classes + spec.one_example_classes;
    const int d = spec.feature_dim;

    // Prototypes diffuse down a b-ary hierarchy on the unit sphere. The
    // offset at level l is a random direction of norm separation/2^(l-1), so
    // `separation` reads directly as a distance relative to the unit-norm
    // prototypes and group structure survives to the leaves.
    const int depth = spec.tree_depth;
    const int branching =
        std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(total), 1.0 / depth) - 1e-9)));
    std::vector<std::vector<double>> level{unit_gaussian_vec(d, rng)};
    for (int l = 1; l <= depth; ++l) {
        const double spread = spec.separation * std::pow(0.5, l - 1);
        std::vector<std::vector<double>> next;
        next.reserve(level.size() * static_cast<std::size_t>(branching));
        for (const auto& parent : level) {
            for (int c = 0; c < branching; ++c) {
                const std::vector<double> dir = unit_gaussian_vec(d, rng);
                std::vector<double> child(parent);
                for (int j = 0; j < d; ++j) child[static_cast<std::size_t>(j)] += spread * dir[static_cast<std::size_t>(j)];
                normalize_in_place(child);
                next.push_back(std::move(child));
            }
        }
        level = std::move(next);
    }
    std::vector<int> order(level.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);

    SynthData out;
    out.prototypes = Matrix(total, d);
    for (int c = 0; c < total; ++c) {
        const auto& p = level[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])];
        for (int j = 0; j < d; ++j) out.prototypes(c, j) = p[static_cast<std::size_t>(j)];
    }

    DatasetBundle& bundle = out.bundle;
    for (int i = 0; i < spec.lots_classes; ++i) {
        bundle.class_names.push_back(pool_name("lots", i));
        bundle.lots_classes.push_back(i);
    }
    for (int i = 0; i < spec.one_example_classes; ++i) {
        bundle.class_names.push_back(pool_name("one", i));
        bundle.one_classes.push_back(spec.lots_classes + i);
    }

    // Per-coordinate sigma of noise/sqrt(d) puts the expected offset norm of
    // a sample at `noise`, on the same scale as `separation`.
    const double sigma = spec.noise / std::sqrt(static_cast<double>(d));
    bundle.features = Matrix(total * spec.samples_per_class, d);
    bundle.labels.reserve(static_cast<std::size_t>(bundle.features.rows()));
    int row = 0;
    for (int c = 0; c < total; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
            for (int j = 0; j < d; ++j) bundle.features(row, j) = out.prototypes(c, j) + sigma * rng.normal();
            bundle.labels.push_back(c);
        }
    }

    EmbeddingTable emb;
    emb.classes = bundle.class_names;
    emb.table = Matrix(total, d);
    for (int c = 0; c < total; ++c) {
        const std::vector<double> u = unit_gaussian_vec(d, rng);
        for (int j = 0; j < d; ++j) {
            emb.table(c, j) = spec.fidelity * out.prototypes(c, j) + (1.0 - spec.fidelity) * u[static_cast<std::size_t>(j)];
        }
    }
    out.sources.push_back(SideInfoSource{"class_embeddings", std::move(emb)});
    out.sources.push_back(SideInfoSource{"hierarchy", agglomerate_tree(out.prototypes, bundle.class_names)});

    bundle.validate();
    return out;
}

// --- files -------------------------------------------------------------------

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream outf(path, std::ios::binary);
    if (!outf) throw ConfigError("cannot write file: " + path);
    outf << content;
    if (!outf) throw ConfigError("write failed: " + path);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

DatasetBundle load_dataset(const std::string& features_path, const std::string& labels_path,
                           const std::string& split_path) {
    DatasetBundle bundle;

    json split;
    try {
        split = json::parse(read_text_file(split_path));
    } catch (const json::exception& e) {
        throw ParseError(split_path + ": " + e.what());
    }
    if (!split.is_object() || !split.contains("lots") || !split.contains("one_example")) {
        throw ParseError(split_path + ": expected object with 'lots' and 'one_example' arrays");
    }
    std::map<std::string, int> id_of;
    const auto take = [&](const char* key, std::vector<int>* ids) {
        for (const auto& v : split.at(key)) {
            if (!v.is_string()) throw ParseError(split_path + ": class names must be strings");
            const std::string name = v.get<std::string>();
            if (id_of.count(name)) throw ConfigError(split_path + ": class '" + name + "' listed twice");
            const int id = static_cast<int>(bundle.class_names.size());
            id_of.emplace(name, id);
            bundle.class_names.push_back(name);
            ids->push_back(id);
        }
    };
    take("lots", &bundle.lots_classes);
    take("one_example", &bundle.one_classes);

    // labels.csv
    {
        std::istringstream in(read_text_file(labels_path));
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto cells = split_csv_line(line);
            if (cells.size() != 1) throw ParseError(labels_path + " line " + std::to_string(lineno) + ": one column expected");
            const std::string& name = cells[0];
            if (lineno == 1) {
                if (name != "class") throw ParseError(labels_path + ": header must be 'class', got '" + name + "'");
                continue;
            }
            if (name.empty()) continue;
            const auto it = id_of.find(name);
            if (it == id_of.end()) {
                throw ConfigError(labels_path + " line " + std::to_string(lineno) + ": unknown class '" + name + "'");
            }
            bundle.labels.push_back(it->second);
        }
        if (lineno == 0) throw ParseError(labels_path + ": empty file");
    }

    // features.csv
    {
        std::istringstream in(read_text_file(features_path));
        std::string line;
        int lineno = 0;
        int dim = -1;
        std::vector<double> values;
        int rows = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line == "\r") continue;
            const auto cells = split_csv_line(line);
            if (lineno == 1) {
                dim = static_cast<int>(cells.size());
                if (cells[0] != "f0") throw ParseError(features_path + ": header must start with 'f0'");
                continue;
            }
            if (static_cast<int>(cells.size()) != dim) {
                throw ParseError(features_path + " line " + std::to_string(lineno) + ": expected " +
                                 std::to_string(dim) + " columns, got " + std::to_string(cells.size()));
            }
            for (const auto& cell : cells) {
                double v = 0.0;
                if (!parse_double(cell, &v)) {
                    throw ParseError(features_path + " line " + std::to_string(lineno) + ": bad number '" + cell + "'");
                }
                values.push_back(v);
            }
            ++rows;
        }
        if (dim <= 0) throw ParseError(features_path + ": empty file");
        bundle.features = Matrix(rows, dim, std::move(values));
    }

    bundle.validate();
    return bundle;
}

void save_dataset(const DatasetBundle& bundle, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::string feat;
    for (int j = 0; j < bundle.features.cols(); ++j) {
        if (j) feat += ',';
        feat += "f" + std::to_string(j);
    }
    feat += '\n';
    for (int i = 0; i < bundle.features.rows(); ++i) {
        for (int j = 0; j < bundle.features.cols(); ++j) {
            if (j) feat += ',';
            feat += format_double(bundle.features(i, j));
        }
        feat += '\n';
    }
    write_text_file((fs::path(dir) / "features.csv").string(), feat);

    std::string lab = "class\n";
    for (const int y : bundle.labels) lab += bundle.class_names[static_cast<std::size_t>(y)] + "\n";
    write_text_file((fs::path(dir) / "labels.csv").string(), lab);

    json split;
    split["lots"] = json::array();
    for (const int id : bundle.lots_classes) split["lots"].push_back(bundle.class_names[static_cast<std::size_t>(id)]);
    split["one_example"] = json::array();
    for (const int id : bundle.one_classes) split["one_example"].push_back(bundle.class_names[static_cast<std::size_t>(id)]);
    write_text_file((fs::path(dir) / "split.json").string(), split.dump(2) + "\n");
}

SideInfoSource load_embeddings_csv(const std::string& path, const std::string& name) {
    EmbeddingTable table;
    std::istringstream in(read_text_file(path));
    std::string line;
    int lineno = 0;
    int dim = -1;
    std::vector<double> values;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() < 2) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": expected class name plus vector");
        }
        if (dim < 0) {
            dim = static_cast<int>(cells.size()) - 1;
        } else if (static_cast<int>(cells.size()) - 1 != dim) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                             " values, got " + std::to_string(cells.size() - 1));
        }
        if (!seen.insert(cells[0]).second) {
            throw ParseError(path + " line " + std::to_string(lineno) + ": duplicate class '" + cells[0] + "'");
        }
        table.classes.push_back(cells[0]);
        for (std::size_t i = 1; i < cells.size(); ++i) {
            double v = 0.0;
            if (!parse_double(cells[i], &v)) {
                throw ParseError(path + " line " + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
            }
            values.push_back(v);
        }
    }
    if (dim < 1) throw ParseError(path + ": no embedding rows");
    table.table = Matrix(static_cast<int>(table.classes.size()), dim, std::move(values));
    return SideInfoSource{name, std::move(table)};
}

SideInfoSource load_tree_file(const std::string& path, const std::string& name) {
    try {
        return SideInfoSource{name, TreeHierarchy::parse(read_text_file(path))};
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void save_sources(const std::vector<SideInfoSource>& sources, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const SideInfoSource& src : sources) {
        if (src.is_tree()) {
            write_text_file((fs::path(dir) / (src.name + ".txt")).string(),
                            std::get<TreeHierarchy>(src.payload).format());
        } else {
            const EmbeddingTable& emb = std::get<EmbeddingTable>(src.payload);
            std::string text;
            for (int i = 0; i < emb.table.rows(); ++i) {
                text += emb.classes[static_cast<std::size_t>(i)];
                for (int j = 0; j < emb.table.cols(); ++j) {
                    text += ',';
                    text += format_double(emb.table(i, j));
                }
                text += '\n';
            }
            write_text_file((fs::path(dir) / (src.name + ".csv")).string(), text);
        }
    }
}

Matrix read_matrix_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<std::vector<std::string>> grid;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        grid.push_back(split_csv_line(line));
    }
    if (grid.empty()) throw ParseError(path + ": empty file");

    const auto numeric = [](const std::string& s) {
        double v;
        return parse_double(s, &v);
    };
    std::size_t row0 = 0;
    bool header = false;
    for (const auto& cell : grid[0]) {
        if (!numeric(cell)) header = true;
    }
    if (header) row0 = 1;
    if (row0 >= grid.size()) throw ParseError(path + ": no data rows");
    bool label_col = false;
    for (std::size_t i = row0; i < grid.size(); ++i) {
        if (!grid[i].empty() && !numeric(grid[i][0])) label_col = true;
    }
    const std::size_t col0 = label_col ? 1 : 0;

    const std::size_t cols = grid[row0].size() - col0;
    if (cols == 0) throw ParseError(path + ": no numeric columns");
    std::vector<double> values;
    for (std::size_t i = row0; i < grid.size(); ++i) {
        if (grid[i].size() - col0 != cols) {
            throw ParseError(path + " row " + std::to_string(i + 1) + ": ragged row");
        }
        for (std::size_t j = col0; j < grid[i].size(); ++j) {
            double v = 0.0;
            if (!parse_double(grid[i][j], &v)) {
                throw ParseError(path + " row " + std::to_string(i + 1) + ": bad number '" + grid[i][j] + "'");
            }
            values.push_back(v);
        }
    }
    return Matrix(static_cast<int>(grid.size() - row0), static_cast<int>(cols), std::move(values));
}

void write_matrix_csv(const Matrix& m, const std::string& path) {
    std::string text;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            if (j) text += ',';
            text += format_double(m(i, j));
        }
        text += '\n';
    }
    write_text_file(path, text);
}

void write_labeled_matrix_csv(const Matrix& m, const std::vector<std::string>& names, const std::string& path) {
    if (static_cast<int>(names.size()) != m.rows() || m.rows() != m.cols()) {
        throw ContractError("write_labeled_matrix_csv: names must match a square matrix");
    }
    std::string text = "class";
    for (const auto& n : names) text += "," + n;
    text += '\n';
    for (int i = 0; i < m.rows(); ++i) {
        text += names[static_cast<std::size_t>(i)];
        for (int j = 0; j < m.cols(); ++j) {
            text += ',';
            text += format_double(m(i, j));
        }
        text += '\n';
    }
    write_text_file(path, text);
}

}  // namespace fuseshot
