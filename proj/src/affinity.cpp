#include "fuseshot/affinity.hpp"

#include <cmath>
#include <map>

#include "fuseshot/hsic.hpp"

namespace fuseshot {

int mapping_hidden_dim(int input_dim) {
    return input_dim > 100 ? 100 : 75;
}

std::vector<PreparedSource> prepare_sources(const std::vector<SideInfoSource>& available,
                                            const std::vector<std::string>& class_names,
                                            const std::vector<std::string>& active_names) {
    std::vector<PreparedSource> out;
    for (const std::string& name : active_names) {
        const SideInfoSource* src = nullptr;
        for (const SideInfoSource& s : available) {
            if (s.name == name) {
                src = &s;
                break;
            }
        }
        if (src == nullptr) throw ConfigError("unknown side-info source '" + name + "'");

        PreparedSource prep;
        prep.name = name;
        if (src->is_tree()) {
            const TreeHierarchy& tree = std::get<TreeHierarchy>(src->payload);
            std::vector<int> perm;
            perm.reserve(class_names.size());
            for (const std::string& cls : class_names) {
                const int idx = tree.class_index(cls);
                if (idx < 0) throw ConfigError("side-info source '" + name + "' is missing class '" + cls + "'");
                perm.push_back(idx);
            }
            const Matrix b = normalize_covariance(tree_covariance(tree));
            prep.is_tree = true;
            prep.data = gather_cols(gather_rows(b, perm), perm);
        } else {
            const EmbeddingTable& emb = std::get<EmbeddingTable>(src->payload);
            std::vector<int> perm;
            perm.reserve(class_names.size());
            for (const std::string& cls : class_names) {
                int idx = -1;
                for (std::size_t i = 0; i < emb.classes.size(); ++i) {
                    if (emb.classes[i] == cls) {
                        idx = static_cast<int>(i);
                        break;
                    }
                }
                if (idx < 0) throw ConfigError("side-info source '" + name + "' is missing class '" + cls + "'");
                perm.push_back(idx);
            }
            prep.is_tree = false;
            prep.data = gather_rows(emb.table, perm);
        }
        out.push_back(std::move(prep));
    }
    return out;
}

void add_mapping_params(ParamStore& store, const PreparedSource& src, std::uint64_t seed) {
    if (src.is_tree) return;
    const MlpShape shape{src.input_dim(), mapping_hidden_dim(src.input_dim()), kMappingOutputDim};
    add_mlp_params(store, "src." + src.name, shape, seed);
}

Var embed_classes(Tape& tape, ParamRegistry& params, const PreparedSource& src,
                  const std::vector<int>& class_subset) {
    if (src.is_tree) throw ContractError("embed_classes: source '" + src.name + "' is a tree");
    const Var rows = tape.constant(gather_rows(src.data, class_subset));
    return mlp_forward(tape, params, rows, "src." + src.name);
}

Var build_label_kernel(Tape& tape, ParamRegistry& params, const std::vector<PreparedSource>& sources,
                       const std::vector<int>& class_subset) {
    if (sources.empty()) throw ContractError("build_label_kernel: no sources");
    std::vector<Var> kernels;
    kernels.reserve(sources.size());
    for (const PreparedSource& src : sources) {
        if (src.is_tree) {
            kernels.push_back(tape.constant(gather_cols(gather_rows(src.data, class_subset), class_subset)));
        } else {
            kernels.push_back(linear_gram(tape, embed_classes(tape, params, src, class_subset)));
        }
    }
    return average_kernels(tape, kernels);
}

namespace {

std::vector<double> softmax_of(const std::vector<double>& raw) {
    double mx = raw.front();
    for (const double v : raw) mx = std::max(mx, v);
    std::vector<double> out(raw.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::exp(raw[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

void check_pos(const Matrix& kernel, int pos, const char* what) {
    if (pos < 0 || pos >= kernel.rows()) {
        throw ContractError(std::string(what) + " position " + std::to_string(pos) + " outside kernel of size " +
                            std::to_string(kernel.rows()));
    }
}

}  // namespace

std::vector<double> attention_over_labels(const Matrix& kernel, int query_pos, const std::vector<int>& target_pos) {
    if (kernel.rows() != kernel.cols()) throw ShapeError("attention_over_labels: kernel is not square");
    if (target_pos.empty()) throw ContractError("attention_over_labels: no targets");
    check_pos(kernel, query_pos, "query");
    std::vector<double> raw;
    raw.reserve(target_pos.size());
    for (const int t : target_pos) {
        check_pos(kernel, t, "target");
        raw.push_back(kernel(query_pos, t));
    }
    return softmax_of(raw);
}

std::vector<double> quasi_label(const Matrix& kernel, int query_pos, const std::vector<int>& support_pos,
                                const std::vector<int>& support_class, int num_classes) {
    if (support_pos.size() != support_class.size()) {
        throw ContractError("quasi_label: support position/class size mismatch");
    }
    if (num_classes < 1) throw ContractError("quasi_label: num_classes must be positive");
    const std::vector<double> attn = attention_over_labels(kernel, query_pos, support_pos);
    std::vector<double> out(static_cast<std::size_t>(num_classes), 0.0);
    for (std::size_t i = 0; i < attn.size(); ++i) {
        const int c = support_class[i];
        if (c < 0 || c >= num_classes) {
            throw ContractError("quasi_label: support class " + std::to_string(c) + " outside [0," +
                                std::to_string(num_classes) + ")");
        }
        out[static_cast<std::size_t>(c)] += attn[i];
    }
    return out;
}

Matrix quasi_labels(const Matrix& kernel, const std::vector<int>& query_pos, const std::vector<int>& support_pos,
                    const std::vector<int>& support_class, int num_classes) {
    Matrix out(static_cast<int>(query_pos.size()), num_classes);
    std::map<int, std::vector<double>> cache;
    for (int i = 0; i < out.rows(); ++i) {
        const int q = query_pos[static_cast<std::size_t>(i)];
        auto it = cache.find(q);
        if (it == cache.end()) {
            it = cache.emplace(q, quasi_label(kernel, q, support_pos, support_class, num_classes)).first;
        }
        for (int j = 0; j < num_classes; ++j) out(i, j) = it->second[static_cast<std::size_t>(j)];
    }
    return out;
}

}  // namespace fuseshot
