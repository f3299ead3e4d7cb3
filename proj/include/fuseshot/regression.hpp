#pragma once

#include <cstdint>
#include <vector>

#include "fuseshot/mlp.hpp"

namespace fuseshot {

// Data embedding net g: input_dim -> hidden_dim -> embed_dim, tanh
// activations, l2-normalized rows. Parameters live under the "embed" prefix.
struct EmbedShape {
    int input_dim = 0;
    int hidden_dim = 0;
    int embed_dim = 0;
};

void add_embed_params(ParamStore& store, const EmbedShape& shape, std::uint64_t seed);

// Softmax regression matrices: phi (embed_dim x lots_classes) for classes
// with plenty of data, phi_prime (embed_dim x one_classes) for the
// one-example classes. Both map embeddings to class logits.
void add_head_params(ParamStore& store, int embed_dim, int lots_classes, int one_classes, std::uint64_t seed);

Var embed_rows(Tape& tape, ParamRegistry& params, Var x);

// softmax(g phi[:, cols]); one output column per entry of cols.
Var softmax_predict_node(Tape& tape, Var emb, Var phi, const std::vector<int>& cols);

// Attention predictor: softmax over the inner products between each query
// embedding and the support embeddings, mixed with the support one-hots.
Var attention_predict_node(Tape& tape, Var query_emb, Var support_emb, const Matrix& support_onehot);

// One-hot rows; classes[i] in [0, num_classes).
Matrix one_hot(const std::vector<int>& classes, int num_classes);

// Inference wrappers (no gradients; each runs on a throwaway tape).
Matrix embed_matrix(const ParamStore& params, const Matrix& x);
Matrix softmax_predict(const ParamStore& params, const Matrix& x, const std::string& head_name,
                       const std::vector<int>& cols);
// Softmax over the concatenated [phi | phi_prime] logits, covering every
// class either head knows about.
Matrix softmax_predict_union(const ParamStore& params, const Matrix& x);
Matrix attention_predict(const ParamStore& params, const Matrix& x_query, const Matrix& x_support,
                         const std::vector<int>& support_class, int num_classes);

}  // namespace fuseshot
