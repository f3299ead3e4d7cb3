#include "fuseshot/regression.hpp"

namespace fuseshot {

void add_embed_params(ParamStore& store, const EmbedShape& shape, std::uint64_t seed) {
    add_mlp_params(store, "embed", MlpShape{shape.input_dim, shape.hidden_dim, shape.embed_dim}, seed);
}

void add_head_params(ParamStore& store, int embed_dim, int lots_classes, int one_classes, std::uint64_t seed) {
    if (embed_dim < 1 || lots_classes < 1 || one_classes < 1) {
        throw ConfigError("head params: dimensions must be positive");
    }
    {
        Rng rng(mix_seed(seed, hash_name("phi")));
        store.add("phi", glorot_uniform(embed_dim, lots_classes, rng));
    }
    {
        Rng rng(mix_seed(seed, hash_name("phi_prime")));
        store.add("phi_prime", glorot_uniform(embed_dim, one_classes, rng));
    }
}

Var embed_rows(Tape& tape, ParamRegistry& params, Var x) {
    return mlp_forward(tape, params, x, "embed");
}

Var softmax_predict_node(Tape& tape, Var emb, Var phi, const std::vector<int>& cols) {
    return tape.softmax_rows(tape.matmul(emb, tape.gather_cols(phi, cols)));
}

Var attention_predict_node(Tape& tape, Var query_emb, Var support_emb, const Matrix& support_onehot) {
    if (support_onehot.rows() != tape.value(support_emb).rows()) {
        throw ShapeError("attention_predict: one-hot rows do not match support size");
    }
    const Var sims = tape.matmul(query_emb, tape.transpose(support_emb));
    return tape.matmul(tape.softmax_rows(sims), tape.constant(support_onehot));
}

Matrix one_hot(const std::vector<int>& classes, int num_classes) {
    Matrix out(static_cast<int>(classes.size()), num_classes);
    for (int i = 0; i < out.rows(); ++i) {
        const int c = classes[static_cast<std::size_t>(i)];
        if (c < 0 || c >= num_classes) {
            throw ContractError("one_hot: class " + std::to_string(c) + " outside [0," + std::to_string(num_classes) +
                                ")");
        }
        out(i, c) = 1.0;
    }
    return out;
}

Matrix embed_matrix(const ParamStore& params, const Matrix& x) {
    Tape tape;
    ParamRegistry pv(tape, params);
    return tape.value(embed_rows(tape, pv, tape.constant(x)));
}

Matrix softmax_predict(const ParamStore& params, const Matrix& x, const std::string& head_name,
                       const std::vector<int>& cols) {
    Tape tape;
    ParamRegistry pv(tape, params);
    const Var emb = embed_rows(tape, pv, tape.constant(x));
    return tape.value(softmax_predict_node(tape, emb, pv.get(head_name), cols));
}

Matrix softmax_predict_union(const ParamStore& params, const Matrix& x) {
    const Matrix emb = embed_matrix(params, x);
    const Matrix one_logits = matmul(emb, params.at("phi_prime"));
    if (!params.contains("phi")) return softmax_rows(one_logits);  // no lots classes
    const Matrix lots_logits = matmul(emb, params.at("phi"));
    return softmax_rows(hstack({&lots_logits, &one_logits}));
}

Matrix attention_predict(const ParamStore& params, const Matrix& x_query, const Matrix& x_support,
                         const std::vector<int>& support_class, int num_classes) {
    Tape tape;
    ParamRegistry pv(tape, params);
    const Var all = tape.constant(vstack({&x_query, &x_support}));
    const Var emb = embed_rows(tape, pv, all);
    std::vector<int> qi(static_cast<std::size_t>(x_query.rows()));
    for (int i = 0; i < x_query.rows(); ++i) qi[static_cast<std::size_t>(i)] = i;
    std::vector<int> si(static_cast<std::size_t>(x_support.rows()));
    for (int i = 0; i < x_support.rows(); ++i) si[static_cast<std::size_t>(i)] = x_query.rows() + i;
    const Var q = tape.gather_rows(emb, qi);
    const Var s = tape.gather_rows(emb, si);
    return tape.value(attention_predict_node(tape, q, s, one_hot(support_class, num_classes)));
}

}  // namespace fuseshot
