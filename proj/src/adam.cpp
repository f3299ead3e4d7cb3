#include "fuseshot/adam.hpp"

#include <cmath>

namespace fuseshot {

void ParamStore::add(const std::string& name, Matrix value) {
    if (contains(name)) throw ContractError("param store: duplicate parameter " + name);
    Slot slot;
    slot.m = Matrix(value.rows(), value.cols());
    slot.v = Matrix(value.rows(), value.cols());
    slot.value = std::move(value);
    slots_.emplace(name, std::move(slot));
    order_.push_back(name);
}

Matrix& ParamStore::at(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ContractError("param store: unknown parameter " + name);
    return it->second.value;
}

const Matrix& ParamStore::at(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ContractError("param store: unknown parameter " + name);
    return it->second.value;
}

void adam_step(ParamStore& store, const std::map<std::string, Matrix>& grads, const AdamConfig& cfg) {
    store.step_ += 1;
    const double t = static_cast<double>(store.step_);
    const double corr1 = 1.0 - std::pow(cfg.beta1, t);
    const double corr2 = 1.0 - std::pow(cfg.beta2, t);
    for (const auto& [name, g] : grads) {
        auto it = store.slots_.find(name);
        if (it == store.slots_.end()) throw ContractError("adam_step: gradient for unknown parameter " + name);
        ParamStore::Slot& slot = it->second;
        if (!g.same_shape(slot.value)) throw ShapeError("adam_step: gradient shape mismatch for " + name);
        double* p = slot.value.data();
        double* m = slot.m.data();
        double* v = slot.v.data();
        const double* gd = g.data();
        for (std::size_t i = 0; i < slot.value.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gd[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
            const double mhat = m[i] / corr1;
            const double vhat = v[i] / corr2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

Matrix glorot_uniform(int rows, int cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
    return m;
}

Var ParamRegistry::get(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    const Var v = tape_->input(store_->at(name), name);
    vars_.emplace(name, v);
    return v;
}

std::map<std::string, Matrix> ParamRegistry::collect_adjoints() const {
    std::map<std::string, Matrix> out;
    for (const auto& [name, var] : vars_) {
        const Matrix& adj = tape_->adjoint(var);
        if (adj.empty()) {
            const Matrix& val = tape_->value(var);
            out.emplace(name, Matrix(val.rows(), val.cols()));
        } else {
            out.emplace(name, adj);
        }
    }
    return out;
}

}  // namespace fuseshot
