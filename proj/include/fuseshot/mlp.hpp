#pragma once

#include <cstdint>
#include <string>

#include "fuseshot/adam.hpp"

namespace fuseshot {

// Two-layer fully connected net with tanh activations and an l2-normalized
// output, shared by the data embedding net and the per-source mapping nets.
struct MlpShape {
    int in = 0;
    int hidden = 0;
    int out = 0;
};

// Registers <prefix>.w1/.b1/.w2/.b2 in the store. Weights are Glorot-uniform;
// the init stream is derived from (seed, parameter name) so draws for one
// parameter do not depend on which other parameters exist.
void add_mlp_params(ParamStore& store, const std::string& prefix, const MlpShape& shape, std::uint64_t seed);

// l2norm(tanh(tanh(x W1 + b1) W2 + b2)); rows of x are samples.
Var mlp_forward(Tape& tape, ParamRegistry& params, Var x, const std::string& prefix);

}  // namespace fuseshot
