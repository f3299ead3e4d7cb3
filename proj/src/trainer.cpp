#include "fuseshot/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fuseshot/hsic.hpp"

namespace fuseshot {

namespace {

std::vector<int> iota_vec(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<int> range_vec(int begin, int count) {
    std::vector<int> v(static_cast<std::size_t>(count));
    std::iota(v.begin(), v.end(), begin);
    return v;
}

// Mean over rows of y^T log p, the cross-entropy style objectives O1/O3 share.
Var mean_log_likelihood(Tape& tape, Var probs, const Matrix& targets) {
    const Var picked = tape.hadamard(tape.constant(targets), tape.log_clamped(probs));
    return tape.scale(tape.sum_all(picked), 1.0 / static_cast<double>(targets.rows()));
}

}  // namespace

std::string head_name(Head head) { return head == Head::Softmax ? "softmax" : "attention"; }

Head parse_head(const std::string& name) {
    if (name == "softmax") return Head::Softmax;
    if (name == "attention") return Head::Attention;
    throw ConfigError("unknown head '" + name + "' (expected 'softmax' or 'attention')");
}

int TrainConfig::resolved_iterations() const {
    if (iterations > 0) return iterations;
    return head == Head::Softmax ? 500 : 100;
}

AdamConfig TrainConfig::adam() const { return AdamConfig{learning_rate, beta1, beta2, epsilon}; }

void TrainConfig::validate() const {
    if (alpha < 0.0) throw ConfigError("train: alpha must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (shots < 1) throw ConfigError("train: shots must be >= 1");
    if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
        throw ConfigError("train: betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
    if (finetune_iterations < 0) throw ConfigError("train: finetune_iterations must be >= 0");
    if (trials < 1) throw ConfigError("train: trials must be >= 1");
    if (hidden_dim < 1 || embed_dim < 1) throw ConfigError("train: embedding dims must be >= 1");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        for (std::size_t j = i + 1; j < sources.size(); ++j) {
            if (sources[i] == sources[j]) throw ConfigError("train: duplicate side-info source '" + sources[i] + "'");
        }
    }
}

ObjectiveGraph build_objective_graph(Tape& tape, ParamRegistry& params, const Matrix& features,
                                     const Episode& episode, const ClassPool& lots_pool,
                                     const std::vector<PreparedSource>& sources, Head head, double alpha,
                                     bool with_quasi, const Matrix* frozen_quasi) {
    const int n_train = static_cast<int>(episode.train_rows.size());
    const int n_batch = static_cast<int>(episode.batch_rows.size());
    const int n_support = static_cast<int>(episode.support_rows.size());
    const int n_lots = static_cast<int>(episode.lots_classes.size());
    const int n_one = static_cast<int>(episode.one_classes.size());

    std::vector<int> all_rows = episode.train_rows;
    all_rows.insert(all_rows.end(), episode.batch_rows.begin(), episode.batch_rows.end());
    all_rows.insert(all_rows.end(), episode.support_rows.begin(), episode.support_rows.end());
    const Var emb_all = embed_rows(tape, params, tape.constant(gather_rows(features, all_rows)));
    const Var emb_train = tape.gather_rows(emb_all, range_vec(0, n_train));
    const Var emb_batch = tape.gather_rows(emb_all, range_vec(n_train, n_batch));

    ObjectiveGraph graph;

    // O1: label the batch from the episode's train split.
    Var p1;
    if (head == Head::Softmax) {
        std::vector<int> phi_cols;
        phi_cols.reserve(episode.lots_classes.size());
        for (const int gid : episode.lots_classes) {
            const int pos = lots_pool.class_position(gid);
            if (pos < 0) throw ContractError("episode class is not in the lots pool");
            phi_cols.push_back(pos);
        }
        p1 = softmax_predict_node(tape, emb_batch, params.get("phi"), phi_cols);
    } else {
        p1 = attention_predict_node(tape, emb_batch, emb_train, one_hot(episode.train_pos, n_lots));
    }
    graph.o1 = mean_log_likelihood(tape, p1, one_hot(episode.batch_pos, n_lots));
    graph.total = graph.o1;

    const bool side_active = alpha > 0.0 && !sources.empty();
    if (!side_active) return graph;

    // O2: dependence between the data kernel over S u S' and the label kernel
    // over L u L', expanded to the same samples.
    std::vector<int> kernel_classes = episode.lots_classes;
    kernel_classes.insert(kernel_classes.end(), episode.one_classes.begin(), episode.one_classes.end());
    const Var kr_class = build_label_kernel(tape, params, sources, kernel_classes);

    std::vector<int> sample_pos = episode.train_pos;
    sample_pos.insert(sample_pos.end(), episode.batch_pos.begin(), episode.batch_pos.end());
    for (const int pos : episode.support_pos) sample_pos.push_back(n_lots + pos);
    const Var kr_samples = tape.gather_cols(tape.gather_rows(kr_class, sample_pos), sample_pos);
    graph.o2 = hsic_node(tape, linear_gram(tape, emb_all), kr_samples);

    Var side = graph.o2;
    if (with_quasi) {
        // O3: quasi-labels of the batch under S'. The quasi-labels come from
        // the current kernel values but enter the graph as constants.
        std::vector<int> support_slots(episode.support_pos.size());
        for (std::size_t i = 0; i < support_slots.size(); ++i) support_slots[i] = n_lots + episode.support_pos[i];
        graph.quasi = frozen_quasi != nullptr
                          ? *frozen_quasi
                          : quasi_labels(tape.value(kr_class), episode.batch_pos, support_slots,
                                         episode.support_pos, n_one);
        Var p3;
        if (head == Head::Softmax) {
            p3 = softmax_predict_node(tape, emb_batch, params.get("phi_prime"), iota_vec(n_one));
        } else {
            const Var emb_support = tape.gather_rows(emb_all, range_vec(n_train + n_batch, n_support));
            p3 = attention_predict_node(tape, emb_batch, emb_support, one_hot(episode.support_pos, n_one));
        }
        graph.o3 = mean_log_likelihood(tape, p3, graph.quasi);
        side = tape.add(graph.o2, graph.o3);
    }
    graph.total = tape.add(graph.o1, tape.scale(side, alpha));
    return graph;
}

Var finetune_objective_node(Tape& tape, ParamRegistry& params, const Matrix& x_support,
                            const std::vector<int>& support_pos, int num_classes, Head head) {
    const Var emb = embed_rows(tape, params, tape.constant(x_support));
    const Matrix onehot = one_hot(support_pos, num_classes);
    const Var probs = head == Head::Softmax
                          ? softmax_predict_node(tape, emb, params.get("phi_prime"), iota_vec(num_classes))
                          : attention_predict_node(tape, emb, emb, onehot);
    return mean_log_likelihood(tape, probs, onehot);
}

double objective_o1(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, Head head) {
    Tape tape;
    ParamRegistry reg(tape, params);
    const ObjectiveGraph graph = build_objective_graph(tape, reg, features, episode, lots_pool, {}, head, 0.0, false);
    return tape.value(graph.o1)(0, 0);
}

double objective_o2(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, const std::vector<PreparedSource>& sources) {
    Tape tape;
    ParamRegistry reg(tape, params);
    const ObjectiveGraph graph =
        build_objective_graph(tape, reg, features, episode, lots_pool, sources, Head::Attention, 1.0, false);
    if (!graph.o2.valid()) throw ContractError("objective_o2: no side-info sources");
    return tape.value(graph.o2)(0, 0);
}

double objective_o3(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, const std::vector<PreparedSource>& sources, Head head) {
    Tape tape;
    ParamRegistry reg(tape, params);
    const ObjectiveGraph graph =
        build_objective_graph(tape, reg, features, episode, lots_pool, sources, head, 1.0, true);
    if (!graph.o3.valid()) throw ContractError("objective_o3: no side-info sources");
    return tape.value(graph.o3)(0, 0);
}

TrainResult train(const Matrix& features, const ClassPool& lots_pool, const ClassPool& support_pool,
                  const std::vector<PreparedSource>& sources, const TrainConfig& cfg, std::uint64_t seed,
                  bool with_quasi) {
    cfg.validate();
    TrainResult result;
    add_embed_params(result.params, EmbedShape{features.cols(), cfg.hidden_dim, cfg.embed_dim}, seed);
    if (lots_pool.class_count() > 0) {
        add_head_params(result.params, cfg.embed_dim, lots_pool.class_count(), support_pool.class_count(), seed);
    } else if (support_pool.class_count() > 0) {
        // No lots classes means no phi and no episodes; the one-example head
        // still exists so fine-tuning works. Its init stream hangs off the
        // name, so the draw matches what add_head_params would have produced.
        Rng rng(mix_seed(seed, hash_name("phi_prime")));
        result.params.add("phi_prime", glorot_uniform(cfg.embed_dim, support_pool.class_count(), rng));
    }
    for (const PreparedSource& src : sources) add_mapping_params(result.params, src, seed);

    if (lots_pool.class_count() == 0) return result;  // nothing to sample episodes from

    const AdamConfig adam = cfg.adam();
    Rng episode_rng(mix_seed(seed, hash_name("episode-stream")));
    const int budget = cfg.resolved_iterations();
    result.log.reserve(static_cast<std::size_t>(budget));
    for (int it = 1; it <= budget; ++it) {
        const Episode episode = sample_episode(lots_pool, support_pool, cfg.shots, cfg.batch_size, episode_rng);
        Tape tape;
        ParamRegistry reg(tape, result.params);
        const ObjectiveGraph graph = build_objective_graph(tape, reg, features, episode, lots_pool, sources,
                                                           cfg.head, cfg.alpha, with_quasi);
        tape.backward(tape.scale(graph.total, -1.0));
        adam_step(result.params, reg.collect_adjoints(), adam);

        IterRecord rec;
        rec.iter = it;
        rec.o1 = tape.value(graph.o1)(0, 0);
        rec.o2 = graph.o2.valid() ? tape.value(graph.o2)(0, 0) : 0.0;
        rec.o3 = graph.o3.valid() ? tape.value(graph.o3)(0, 0) : 0.0;
        rec.total = tape.value(graph.total)(0, 0);
        result.log.push_back(rec);
    }
    return result;
}

std::vector<double> finetune(ParamStore& params, const Matrix& x_support, const std::vector<int>& support_pos,
                             int num_classes, Head head, const AdamConfig& adam, int iterations) {
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(std::max(iterations, 0)));
    for (int it = 0; it < iterations; ++it) {
        Tape tape;
        ParamRegistry reg(tape, params);
        const Var objective = finetune_objective_node(tape, reg, x_support, support_pos, num_classes, head);
        trace.push_back(tape.value(objective)(0, 0));
        tape.backward(tape.scale(objective, -1.0));
        adam_step(params, reg.collect_adjoints(), adam);
    }
    return trace;
}

TrialSplit draw_trial_split(const ClassPool& one_pool, int shots, Rng& rng) {
    TrialSplit split;
    for (int i = 0; i < one_pool.class_count(); ++i) {
        const auto& rows = one_pool.rows[static_cast<std::size_t>(i)];
        const int n = static_cast<int>(rows.size());
        if (n < shots + 1) {
            throw ConfigError("one-example class " + std::to_string(one_pool.classes[static_cast<std::size_t>(i)]) +
                              " has " + std::to_string(n) + " samples; " + std::to_string(shots) +
                              "-shot evaluation needs at least " + std::to_string(shots + 1));
        }
        std::vector<int> sel = rng.sample_without_replacement(n, shots);
        std::sort(sel.begin(), sel.end());
        std::vector<char> taken(static_cast<std::size_t>(n), 0);
        for (const int s : sel) {
            taken[static_cast<std::size_t>(s)] = 1;
            split.support_rows.push_back(rows[static_cast<std::size_t>(s)]);
            split.support_pos.push_back(i);
        }
        for (int s = 0; s < n; ++s) {
            if (!taken[static_cast<std::size_t>(s)]) {
                split.test_rows.push_back(rows[static_cast<std::size_t>(s)]);
                split.test_pos.push_back(i);
            }
        }
    }
    return split;
}

namespace {

struct TrialOutcome {
    double accuracy = 0.0;
    Matrix confusion_counts;  // one-example classes only
    Matrix kernel;
};

TrialOutcome run_trial(const DatasetBundle& bundle, const std::vector<PreparedSource>& prepared,
                       const TrainConfig& cfg, bool generalized, const ClassPool& lots_pool,
                       const ClassPool& one_pool, std::uint64_t tseed) {
    const int n_one = one_pool.class_count();
    const int n_lots = lots_pool.class_count();
    Rng rng(tseed);
    const TrialSplit split = draw_trial_split(one_pool, cfg.shots, rng);

    // Generalized-mode support for the lots classes, drawn after the split so
    // restricted and generalized trials share the same test partition.
    std::vector<int> union_rows;
    std::vector<int> union_class;
    if (generalized) {
        for (int i = 0; i < n_lots; ++i) {
            const auto& rows = lots_pool.rows[static_cast<std::size_t>(i)];
            const int n = static_cast<int>(rows.size());
            if (n < cfg.shots) {
                throw ConfigError("lots class " + std::to_string(lots_pool.classes[static_cast<std::size_t>(i)]) +
                                  " has " + std::to_string(n) + " samples; generalized evaluation needs " +
                                  std::to_string(cfg.shots) + " support samples");
            }
            std::vector<int> sel = rng.sample_without_replacement(n, cfg.shots);
            std::sort(sel.begin(), sel.end());
            for (const int s : sel) {
                union_rows.push_back(rows[static_cast<std::size_t>(s)]);
                union_class.push_back(i);
            }
        }
        for (std::size_t i = 0; i < split.support_rows.size(); ++i) {
            union_rows.push_back(split.support_rows[i]);
            union_class.push_back(n_lots + split.support_pos[i]);
        }
    }

    ClassPool support_pool;
    support_pool.classes = one_pool.classes;
    support_pool.rows.resize(static_cast<std::size_t>(n_one));
    for (std::size_t i = 0; i < split.support_rows.size(); ++i) {
        support_pool.rows[static_cast<std::size_t>(split.support_pos[i])].push_back(split.support_rows[i]);
    }

    TrainResult trained = train(bundle.features, lots_pool, support_pool, prepared, cfg, tseed, !generalized);
    const Matrix x_support = gather_rows(bundle.features, split.support_rows);
    finetune(trained.params, x_support, split.support_pos, n_one, cfg.head, cfg.adam(), cfg.finetune_iterations);

    const Matrix x_test = gather_rows(bundle.features, split.test_rows);
    Matrix probs;
    if (!generalized) {
        probs = cfg.head == Head::Softmax
                    ? softmax_predict(trained.params, x_test, "phi_prime", iota_vec(n_one))
                    : attention_predict(trained.params, x_test, x_support, split.support_pos, n_one);
    } else if (cfg.head == Head::Softmax) {
        probs = softmax_predict_union(trained.params, x_test);
    } else {
        probs = attention_predict(trained.params, x_test, gather_rows(bundle.features, union_rows), union_class,
                                  n_lots + n_one);
    }

    TrialOutcome outcome;
    outcome.confusion_counts = Matrix(n_one, n_one);
    int correct = 0;
    for (int r = 0; r < x_test.rows(); ++r) {
        const int truth = split.test_pos[static_cast<std::size_t>(r)];
        const int pred = argmax_row(probs, r);
        if (pred == (generalized ? n_lots + truth : truth)) ++correct;
        const int pred_one = generalized ? pred - n_lots : pred;
        if (pred_one >= 0) outcome.confusion_counts(truth, pred_one) += 1.0;
    }
    outcome.accuracy = static_cast<double>(correct) / static_cast<double>(x_test.rows());

    if (!prepared.empty()) {
        Tape tape;
        ParamRegistry reg(tape, trained.params);
        outcome.kernel = tape.value(build_label_kernel(tape, reg, prepared, one_pool.classes));
    }
    return outcome;
}

}  // namespace

EvalReport evaluate(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources, const TrainConfig& cfg,
                    bool generalized) {
    cfg.validate();
    bundle.validate();
    const std::vector<PreparedSource> prepared = prepare_sources(sources, bundle.class_names, cfg.sources);
    const ClassPool lots_pool = make_pool(bundle.labels, bundle.lots_classes);
    const ClassPool one_pool = make_pool(bundle.labels, bundle.one_classes);
    const int n_one = one_pool.class_count();

    EvalReport report;
    report.trials = cfg.trials;
    report.generalized = generalized;
    report.trial_seeds.resize(static_cast<std::size_t>(cfg.trials));
    for (int t = 0; t < cfg.trials; ++t) {
        report.trial_seeds[static_cast<std::size_t>(t)] =
            mix_seed(cfg.seed, hash_name("trial") + static_cast<std::uint64_t>(t));
    }

    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(cfg.trials));
#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < cfg.trials; ++t) {
        try {
            outcomes[static_cast<std::size_t>(t)] = run_trial(bundle, prepared, cfg, generalized, lots_pool,
                                                              one_pool, report.trial_seeds[static_cast<std::size_t>(t)]);
        } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }

    Matrix counts(n_one, n_one);
    Matrix kernel_sum;
    double sum = 0.0;
    for (const TrialOutcome& o : outcomes) {
        report.per_trial_accuracy.push_back(o.accuracy);
        sum += o.accuracy;
        counts = add(counts, o.confusion_counts);
        if (!o.kernel.empty()) kernel_sum = kernel_sum.empty() ? o.kernel : add(kernel_sum, o.kernel);
    }
    report.accuracy_mean = sum / static_cast<double>(cfg.trials);
    if (cfg.trials > 1) {
        double sq = 0.0;
        for (const double a : report.per_trial_accuracy) {
            const double d = a - report.accuracy_mean;
            sq += d * d;
        }
        report.accuracy_std = std::sqrt(sq / static_cast<double>(cfg.trials - 1));
    }

    report.confusion = Matrix(n_one, n_one);
    for (int i = 0; i < n_one; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_one; ++j) row += counts(i, j);
        if (row > 0.0) {
            for (int j = 0; j < n_one; ++j) report.confusion(i, j) = counts(i, j) / row;
        }
    }
    if (!kernel_sum.empty()) report.kernel = scale(kernel_sum, 1.0 / static_cast<double>(cfg.trials));
    for (const int gid : one_pool.classes) {
        report.one_class_names.push_back(bundle.class_names[static_cast<std::size_t>(gid)]);
    }
    return report;
}

EvalReport evaluate_generalized(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources,
                                const TrainConfig& cfg) {
    return evaluate(bundle, sources, cfg, true);
}

std::vector<std::pair<double, EvalReport>> sweep_alpha(const DatasetBundle& bundle,
                                                       const std::vector<SideInfoSource>& sources,
                                                       const TrainConfig& cfg, const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("sweep_alpha: empty grid");
    std::vector<double> points = grid;
    std::sort(points.begin(), points.end());
    std::vector<std::pair<double, EvalReport>> table;
    table.reserve(points.size());
    for (const double alpha : points) {
        TrainConfig point_cfg = cfg;
        point_cfg.alpha = alpha;
        table.emplace_back(alpha, evaluate(bundle, sources, point_cfg));
    }
    return table;
}

std::vector<ShotPoint> sweep_shots(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources,
                                   const TrainConfig& cfg, const std::vector<int>& grid) {
    if (grid.empty()) throw ConfigError("sweep_shots: empty grid");
    std::vector<int> points = grid;
    std::sort(points.begin(), points.end());
    std::vector<ShotPoint> table;
    table.reserve(points.size());
    for (const int shots : points) {
        ShotPoint point;
        point.shots = shots;
        TrainConfig fused_cfg = cfg;
        fused_cfg.shots = shots;
        point.fused = evaluate(bundle, sources, fused_cfg);
        TrainConfig baseline_cfg = fused_cfg;
        baseline_cfg.sources.clear();
        point.baseline = evaluate(bundle, sources, baseline_cfg);
        table.push_back(std::move(point));
    }
    return table;
}

}  // namespace fuseshot
