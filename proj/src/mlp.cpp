#include "fuseshot/mlp.hpp"

namespace fuseshot {

void add_mlp_params(ParamStore& store, const std::string& prefix, const MlpShape& shape, std::uint64_t seed) {
    if (shape.in < 1 || shape.hidden < 1 || shape.out < 1) {
        throw ConfigError("mlp " + prefix + ": dimensions must be positive");
    }
    const auto init = [&](const std::string& suffix, int r, int c, bool zero) {
        const std::string name = prefix + suffix;
        if (zero) {
            store.add(name, Matrix(r, c));
        } else {
            Rng rng(mix_seed(seed, hash_name(name)));
            store.add(name, glorot_uniform(r, c, rng));
        }
    };
    init(".w1", shape.in, shape.hidden, false);
    init(".b1", 1, shape.hidden, true);
    init(".w2", shape.hidden, shape.out, false);
    init(".b2", 1, shape.out, true);
}

Var mlp_forward(Tape& tape, ParamRegistry& params, Var x, const std::string& prefix) {
    const Var h = tape.tanh(tape.add_row_broadcast(tape.matmul(x, params.get(prefix + ".w1")), params.get(prefix + ".b1")));
    const Var z = tape.tanh(tape.add_row_broadcast(tape.matmul(h, params.get(prefix + ".w2")), params.get(prefix + ".b2")));
    return tape.l2_normalize_rows(z);
}

}  // namespace fuseshot
