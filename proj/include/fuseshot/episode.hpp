#pragma once

#include <vector>

#include "fuseshot/matrix.hpp"
#include "fuseshot/rng.hpp"

namespace fuseshot {

// Samples of a set of classes, as row indices into some feature matrix.
struct ClassPool {
    std::vector<int> classes;            // global class ids, ascending
    std::vector<std::vector<int>> rows;  // rows[i] = sample rows of classes[i]

    int class_count() const { return static_cast<int>(classes.size()); }
    int total_samples() const;
    int class_position(int class_id) const;  // -1 when absent
};

// Builds a pool over the given classes from a label vector (row i of the
// feature matrix has class labels[i]).
ClassPool make_pool(const std::vector<int>& labels, const std::vector<int>& classes);

// One training episode. The label subset L is drawn from the lots pool with
// |L| equal to the number of one-example classes; the support set carries
// `shots` samples per one-example class, the train split mirrors those counts
// over L, and the batch is drawn from the remaining samples of L's classes.
// All sampling is without replacement within the episode, so the train and
// batch splits are disjoint.
struct Episode {
    std::vector<int> lots_classes;  // L, ascending global ids
    std::vector<int> one_classes;   // L', ascending global ids

    std::vector<int> train_rows;  // S_train
    std::vector<int> train_pos;   // position of each row's class within L
    std::vector<int> batch_rows;  // S_batch
    std::vector<int> batch_pos;
    std::vector<int> support_rows;  // S'
    std::vector<int> support_pos;  // position within L'
};

Episode sample_episode(const ClassPool& lots, const ClassPool& oneshot, int shots, int batch_size, Rng& rng);

}  // namespace fuseshot
