#include "fuseshot/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <vector>

#include "fuseshot/trainer.hpp"

namespace fuseshot {

namespace {

constexpr double kStep = 1e-5;
constexpr int kCoordCap = 40;  // coordinates checked per parameter matrix

// A small random instance with every moving part present: four lots classes,
// three one-example classes, one embedding source and one tree source.
struct Problem {
    Matrix features;
    ClassPool lots_pool;
    ClassPool support_pool;
    Episode episode;
    std::vector<PreparedSource> prepared;
    ParamStore params;
    Matrix x_support;
    std::vector<int> support_pos;
};

Problem make_problem(std::uint64_t seed) {
    Rng rng(seed);
    const int lots_classes = 4, one_classes = 3, lots_per_class = 7, one_per_class = 3, dim = 6;
    const int total_classes = lots_classes + one_classes;

    std::vector<std::string> class_names;
    for (int c = 0; c < total_classes; ++c) class_names.push_back("c" + std::to_string(c));

    Problem prob;
    std::vector<int> labels;
    const int rows = lots_classes * lots_per_class + one_classes * one_per_class;
    prob.features = Matrix(rows, dim);
    int row = 0;
    for (int c = 0; c < total_classes; ++c) {
        const int per = c < lots_classes ? lots_per_class : one_per_class;
        for (int s = 0; s < per; ++s, ++row) {
            for (int j = 0; j < dim; ++j) prob.features(row, j) = rng.normal();
            labels.push_back(c);
        }
    }

    std::vector<int> lots_ids, one_ids;
    for (int c = 0; c < lots_classes; ++c) lots_ids.push_back(c);
    for (int c = 0; c < one_classes; ++c) one_ids.push_back(lots_classes + c);
    prob.lots_pool = make_pool(labels, lots_ids);
    const ClassPool full_one = make_pool(labels, one_ids);
    prob.support_pool.classes = full_one.classes;
    for (const auto& class_rows : full_one.rows) {
        prob.support_pool.rows.push_back({class_rows[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(class_rows.size())))]});
    }

    prob.episode = sample_episode(prob.lots_pool, prob.support_pool, 1, 6, rng);
    prob.x_support = gather_rows(prob.features, prob.episode.support_rows);
    prob.support_pos = prob.episode.support_pos;

    EmbeddingTable table;
    table.classes = class_names;
    table.table = Matrix(total_classes, 9);
    for (int i = 0; i < table.table.rows(); ++i) {
        for (int j = 0; j < table.table.cols(); ++j) table.table(i, j) = rng.normal();
    }

    // Random binary tree over all classes: repeatedly merge two random live
    // clusters; strictly positive lengths keep the covariance diagonal away
    // from zero.
    std::vector<TreeHierarchy::NodeDecl> decls;
    std::vector<std::string> live;
    for (const std::string& name : class_names) {
        decls.push_back(TreeHierarchy::NodeDecl{name, "", 0.1 + 1.9 * rng.uniform(), name, 0});
        live.push_back(name);
    }
    int next_internal = 0;
    while (live.size() > 1) {
        const int a = rng.uniform_int(static_cast<int>(live.size()));
        int b = rng.uniform_int(static_cast<int>(live.size()) - 1);
        if (b >= a) ++b;
        const std::string id = "g" + std::to_string(next_internal++);
        for (auto& d : decls) {
            if ((d.id == live[static_cast<std::size_t>(a)] || d.id == live[static_cast<std::size_t>(b)]) &&
                d.parent.empty()) {
                d.parent = id;
            }
        }
        decls.push_back(TreeHierarchy::NodeDecl{id, "", 0.1 + 1.9 * rng.uniform(), "", 0});
        std::vector<std::string> next_live;
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (static_cast<int>(i) != a && static_cast<int>(i) != b) next_live.push_back(live[i]);
        }
        next_live.push_back(id);
        live = std::move(next_live);
    }
    for (auto& d : decls) {
        if (d.parent.empty()) {
            d.parent = "ROOT";
            d.length = 0.0;
        }
    }

    std::vector<SideInfoSource> sources;
    sources.push_back(SideInfoSource{"emb", std::move(table)});
    sources.push_back(SideInfoSource{"tree", TreeHierarchy::from_nodes(decls)});
    prob.prepared = prepare_sources(sources, class_names, {"emb", "tree"});

    add_embed_params(prob.params, EmbedShape{dim, 5, 4}, seed);
    add_head_params(prob.params, 4, lots_classes, one_classes, seed);
    for (const PreparedSource& src : prob.prepared) add_mapping_params(prob.params, src, seed);
    return prob;
}

struct Objective {
    std::string name;
    // Builds the objective node on the tape from the given parameters.
    std::function<Var(Tape&, ParamRegistry&, const Problem&)> node;
};

std::vector<Objective> make_objectives(const Problem& base) {
    const auto episode_node = [](Head head, double alpha, bool with_quasi, Matrix frozen) {
        return [=](Tape& tape, ParamRegistry& reg, const Problem& prob) {
            const Matrix* quasi = frozen.empty() ? nullptr : &frozen;
            const ObjectiveGraph graph = build_objective_graph(tape, reg, prob.features, prob.episode,
                                                               prob.lots_pool, prob.prepared, head, alpha,
                                                               with_quasi, quasi);
            if (with_quasi && alpha < 1.0) return graph.total;
            if (with_quasi) return graph.o3;
            if (alpha > 0.0) return graph.o2;
            return graph.o1;
        };
    };
    // Quasi-labels at the evaluation point, pinned for every perturbed call.
    const auto frozen_quasi = [&](Head head) {
        Tape tape;
        ParamRegistry reg(tape, base.params);
        return build_objective_graph(tape, reg, base.features, base.episode, base.lots_pool, base.prepared, head,
                                     1.0, true)
            .quasi;
    };
    const auto finetune_node = [](Head head) {
        return [=](Tape& tape, ParamRegistry& reg, const Problem& prob) {
            return finetune_objective_node(tape, reg, prob.x_support, prob.support_pos, 3, head);
        };
    };

    std::vector<Objective> objectives;
    objectives.push_back({"o1/softmax", episode_node(Head::Softmax, 0.0, false, Matrix())});
    objectives.push_back({"o1/attention", episode_node(Head::Attention, 0.0, false, Matrix())});
    objectives.push_back({"o2", episode_node(Head::Attention, 1.0, false, Matrix())});
    objectives.push_back({"o3/softmax", episode_node(Head::Softmax, 1.0, true, frozen_quasi(Head::Softmax))});
    objectives.push_back({"o3/attention", episode_node(Head::Attention, 1.0, true, frozen_quasi(Head::Attention))});
    objectives.push_back({"combined/softmax", episode_node(Head::Softmax, 0.37, true, frozen_quasi(Head::Softmax))});
    objectives.push_back(
        {"combined/attention", episode_node(Head::Attention, 0.37, true, frozen_quasi(Head::Attention))});
    objectives.push_back({"finetune/softmax", finetune_node(Head::Softmax)});
    objectives.push_back({"finetune/attention", finetune_node(Head::Attention)});
    return objectives;
}

}  // namespace

GradCheckReport run_gradient_suite(int points, std::uint64_t seed, std::ostream& out, double tolerance) {
    GradCheckReport report;
    report.points = points;
    report.passed = true;

    for (int p = 0; p < points; ++p) {
        Problem prob = make_problem(mix_seed(seed, static_cast<std::uint64_t>(p)));
        Rng coord_rng(mix_seed(seed, hash_name("coords") + static_cast<std::uint64_t>(p)));
        double point_worst = 0.0;
        std::string point_worst_at;

        for (const Objective& objective : make_objectives(prob)) {
            std::map<std::string, Matrix> grads;
            {
                Tape tape;
                ParamRegistry reg(tape, prob.params);
                tape.backward(objective.node(tape, reg, prob));
                grads = reg.collect_adjoints();
            }
            const auto eval = [&]() {
                Tape tape;
                ParamRegistry reg(tape, prob.params);
                return tape.value(objective.node(tape, reg, prob))(0, 0);
            };
            for (const auto& [name, grad] : grads) {
                const int n = static_cast<int>(grad.size());
                std::vector<int> coords;
                if (n <= kCoordCap) {
                    coords.resize(static_cast<std::size_t>(n));
                    for (int i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
                } else {
                    coords = coord_rng.sample_without_replacement(n, kCoordCap);
                }
                Matrix& value = prob.params.at(name);
                for (const int idx : coords) {
                    const double saved = value.data()[idx];
                    value.data()[idx] = saved + kStep;
                    const double up = eval();
                    value.data()[idx] = saved - kStep;
                    const double down = eval();
                    value.data()[idx] = saved;

                    const double fd = (up - down) / (2.0 * kStep);
                    const double analytic = grad.data()[idx];
                    const double rel =
                        std::abs(fd - analytic) / std::max({std::abs(fd), std::abs(analytic), 1.0});
                    ++report.checks;
                    if (rel > point_worst) {
                        point_worst = rel;
                        char buf[160];
                        std::snprintf(buf, sizeof(buf), "%s %s[%d]", objective.name.c_str(), name.c_str(), idx);
                        point_worst_at = buf;
                    }
                    if (rel > report.max_rel_err) {
                        report.max_rel_err = rel;
                        report.worst = point_worst_at;
                    }
                    if (rel > tolerance) report.passed = false;
                }
            }
        }
        char line[220];
        std::snprintf(line, sizeof(line), "point %2d: max rel err %.3e (%s)", p, point_worst,
                      point_worst_at.c_str());
        out << line << "\n";
    }
    char total[160];
    std::snprintf(total, sizeof(total), "%d coordinate checks over %d points, max rel err %.3e: %s",
                  report.checks, report.points, report.max_rel_err, report.passed ? "ok" : "FAILED");
    out << total << "\n";
    return report;
}

}  // namespace fuseshot
