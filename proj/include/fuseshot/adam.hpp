#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fuseshot/matrix.hpp"
#include "fuseshot/rng.hpp"
#include "fuseshot/tape.hpp"

namespace fuseshot {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Named trainable parameters plus their Adam moment state. Names are unique;
// insertion order is preserved for deterministic iteration.
class ParamStore {
public:
    void add(const std::string& name, Matrix value);
    bool contains(const std::string& name) const { return slots_.count(name) != 0; }
    Matrix& at(const std::string& name);
    const Matrix& at(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::int64_t step() const { return step_; }

    friend void adam_step(ParamStore& store, const std::map<std::string, Matrix>& grads, const AdamConfig& cfg);

private:
    struct Slot {
        Matrix value;
        Matrix m;
        Matrix v;
    };
    std::vector<std::string> order_;
    std::map<std::string, Slot> slots_;
    std::int64_t step_ = 0;
};

// One bias-corrected Adam update. Only parameters named in `grads` are
// touched (values and moments alike); passing a gradient for an unknown name
// or with the wrong shape throws. The store's step counter advances by one
// per call.
void adam_step(ParamStore& store, const std::map<std::string, Matrix>& grads, const AdamConfig& cfg);

// Uniform init on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(int rows, int cols, Rng& rng);

// Lazily registers store parameters as tape leaves so a graph only contains
// the parameters it actually touches, and collects their adjoints by name
// after backward().
class ParamRegistry {
public:
    ParamRegistry(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

    Var get(const std::string& name);
    const std::map<std::string, Var>& registered() const { return vars_; }
    std::map<std::string, Matrix> collect_adjoints() const;

private:
    Tape* tape_;
    const ParamStore* store_;
    std::map<std::string, Var> vars_;
};

}  // namespace fuseshot
