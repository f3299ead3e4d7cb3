#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fuseshot/adam.hpp"
#include "fuseshot/affinity.hpp"
#include "fuseshot/dataset.hpp"
#include "fuseshot/episode.hpp"
#include "fuseshot/regression.hpp"

namespace fuseshot {

// Which regression model forms the label probabilities: parametric softmax
// over per-class weight columns, or non-parametric attention over support
// embeddings.
enum class Head { Softmax, Attention };

std::string head_name(Head head);
Head parse_head(const std::string& name);  // ConfigError on unknown names

struct TrainConfig {
    Head head = Head::Attention;
    double alpha = 0.1;  // weight of the side-information terms
    int batch_size = 64;
    int shots = 1;
    int iterations = 0;  // 0 = head default (attention converges much faster)
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int finetune_iterations = 10;
    int trials = 40;
    std::uint64_t seed = 1;
    std::vector<std::string> sources;  // active side-info sources; empty = baseline
    int hidden_dim = 32;
    int embed_dim = 16;

    int resolved_iterations() const;  // iterations, or 100/500 by head when 0
    AdamConfig adam() const;
    void validate() const;
};

// Per-iteration objective values; terms that are inactive in a run (no
// sources, or quasi-labels disabled) are recorded as 0.
struct IterRecord {
    int iter = 0;
    double o1 = 0.0;
    double o2 = 0.0;
    double o3 = 0.0;
    double total = 0.0;
};

struct TrainResult {
    ParamStore params;
    std::vector<IterRecord> log;
};

// Episodic training. Each iteration samples an episode (label subset L from
// the lots pool, batch/train split of L's samples, the support pool's rows as
// S'), then takes one Adam step on -[O1 + alpha (O2 + O3)]. O2/O3 exist only
// when `sources` is non-empty and alpha > 0; O3 additionally requires
// `with_quasi` (it is dropped in generalized evaluation). The support pool is
// expected to hold exactly the labeled support rows, so episodes reuse them.
// With an empty lots pool there is nothing to train on and the initial
// parameters are returned unchanged.
TrainResult train(const Matrix& features, const ClassPool& lots_pool, const ClassPool& support_pool,
                  const std::vector<PreparedSource>& sources, const TrainConfig& cfg, std::uint64_t seed,
                  bool with_quasi);

// A few Adam steps maximizing mean y'^T log P(y'|x'; S') over the support
// pairs themselves. Only parameters the objective touches move: the embedding
// net, plus phi_prime for the softmax head. Returns the objective value per
// iteration (before each step).
std::vector<double> finetune(ParamStore& params, const Matrix& x_support, const std::vector<int>& support_pos,
                             int num_classes, Head head, const AdamConfig& adam, int iterations);

// Support/test partition of the one-example classes for a single evaluation
// trial: `shots` support rows per class, everything else held out.
struct TrialSplit {
    std::vector<int> support_rows;
    std::vector<int> support_pos;  // class position within the one-example pool
    std::vector<int> test_rows;
    std::vector<int> test_pos;
};

TrialSplit draw_trial_split(const ClassPool& one_pool, int shots, Rng& rng);

struct EvalReport {
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;  // sample std over trials
    int trials = 0;
    bool generalized = false;
    std::vector<double> per_trial_accuracy;
    std::vector<std::uint64_t> trial_seeds;
    // Confusion over the one-example classes: counts aggregated across trials,
    // then row-normalized (a row with no counted predictions stays zero). In
    // generalized mode predictions that land on a lots class still hurt
    // accuracy but have no column here.
    Matrix confusion;
    // Mean learned label-affinity kernel over the one-example classes; empty
    // when no sources are active.
    Matrix kernel;
    std::vector<std::string> one_class_names;
};

// Full protocol: per trial, draw the support/test split, train episodically,
// fine-tune on the support set, and classify every held-out sample of the
// one-example classes. Restricted mode searches labels over the one-example
// classes only; generalized mode searches the union of both pools (and for
// the attention head augments the support set with `shots` samples of every
// lots class, drawn per trial). Trials are independent and may run in
// parallel; their seeds depend only on cfg.seed and the trial index.
EvalReport evaluate(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources, const TrainConfig& cfg,
                    bool generalized = false);
EvalReport evaluate_generalized(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources,
                                const TrainConfig& cfg);

// Evaluation across an alpha grid (ascending), every point on the same trial
// seeds so the comparison is paired.
std::vector<std::pair<double, EvalReport>> sweep_alpha(const DatasetBundle& bundle,
                                                       const std::vector<SideInfoSource>& sources,
                                                       const TrainConfig& cfg, const std::vector<double>& grid);

// Paired fused-vs-baseline evaluation per shot count (ascending). The
// baseline run clears the active source list and keeps everything else.
struct ShotPoint {
    int shots = 0;
    EvalReport fused;
    EvalReport baseline;
};

std::vector<ShotPoint> sweep_shots(const DatasetBundle& bundle, const std::vector<SideInfoSource>& sources,
                                   const TrainConfig& cfg, const std::vector<int>& grid);

// One episode's objective graph with the component nodes exposed, so tests
// and the gradient suite can differentiate each term on its own. o2/o3 are
// invalid Vars when inactive. `quasi` echoes the quasi-label matrix the graph
// used; passing it back through `frozen_quasi` pins the quasi-labels across
// finite-difference evaluations (they are constants, not functions of the
// parameters being perturbed).
struct ObjectiveGraph {
    Var o1;
    Var o2;
    Var o3;
    Var total;
    Matrix quasi;
};

ObjectiveGraph build_objective_graph(Tape& tape, ParamRegistry& params, const Matrix& features,
                                     const Episode& episode, const ClassPool& lots_pool,
                                     const std::vector<PreparedSource>& sources, Head head, double alpha,
                                     bool with_quasi, const Matrix* frozen_quasi = nullptr);

// The fine-tuning objective as a graph node (queries and support are the same
// rows).
Var finetune_objective_node(Tape& tape, ParamRegistry& params, const Matrix& x_support,
                            const std::vector<int>& support_pos, int num_classes, Head head);

// Objective values at the current parameters for one episode, computed from
// the graph above one term at a time. `episode` rows index `features`;
// positions follow Episode's conventions.
double objective_o1(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, Head head);
double objective_o2(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, const std::vector<PreparedSource>& sources);
double objective_o3(const ParamStore& params, const Matrix& features, const Episode& episode,
                    const ClassPool& lots_pool, const std::vector<PreparedSource>& sources, Head head);

}  // namespace fuseshot
