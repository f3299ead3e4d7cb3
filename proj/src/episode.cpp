#include "fuseshot/episode.hpp"

#include <algorithm>

#include "fuseshot/common.hpp"

namespace fuseshot {

int ClassPool::total_samples() const {
    int n = 0;
    for (const auto& r : rows) n += static_cast<int>(r.size());
    return n;
}

int ClassPool::class_position(int class_id) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] == class_id) return static_cast<int>(i);
    }
    return -1;
}

ClassPool make_pool(const std::vector<int>& labels, const std::vector<int>& classes) {
    ClassPool pool;
    pool.classes = classes;
    std::sort(pool.classes.begin(), pool.classes.end());
    pool.rows.resize(pool.classes.size());
    for (std::size_t row = 0; row < labels.size(); ++row) {
        const int pos = pool.class_position(labels[row]);
        if (pos >= 0) pool.rows[static_cast<std::size_t>(pos)].push_back(static_cast<int>(row));
    }
    return pool;
}

Episode sample_episode(const ClassPool& lots, const ClassPool& oneshot, int shots, int batch_size, Rng& rng) {
    if (shots < 1) throw ConfigError("episode: shots must be >= 1");
    if (batch_size < 1) throw ConfigError("episode: batch size must be >= 1");
    const int n_one = oneshot.class_count();
    if (n_one < 1) throw ConfigError("episode: no one-example classes");
    if (lots.class_count() < n_one) {
        throw ConfigError("episode: needs >= " + std::to_string(n_one) + " lots classes, pool has " +
                          std::to_string(lots.class_count()));
    }
    for (int i = 0; i < n_one; ++i) {
        const int have = static_cast<int>(oneshot.rows[static_cast<std::size_t>(i)].size());
        if (have < shots) {
            throw ConfigError("episode: one-example class " + std::to_string(oneshot.classes[static_cast<std::size_t>(i)]) +
                              " has " + std::to_string(have) + " samples, needs " + std::to_string(shots));
        }
    }
    for (int i = 0; i < lots.class_count(); ++i) {
        const int have = static_cast<int>(lots.rows[static_cast<std::size_t>(i)].size());
        if (have < shots) {
            throw ConfigError("episode: lots class " + std::to_string(lots.classes[static_cast<std::size_t>(i)]) +
                              " has " + std::to_string(have) + " samples, needs " + std::to_string(shots));
        }
    }

    Episode ep;
    ep.one_classes = oneshot.classes;

    // L: a uniform subset of the lots classes, |L| = |L'|.
    std::vector<int> picked = rng.sample_without_replacement(lots.class_count(), n_one);
    std::sort(picked.begin(), picked.end());
    for (const int p : picked) ep.lots_classes.push_back(lots.classes[static_cast<std::size_t>(p)]);

    // S_train: `shots` samples per class of L, mirroring the support counts.
    std::vector<std::vector<char>> taken(picked.size());
    for (std::size_t li = 0; li < picked.size(); ++li) {
        const auto& rows = lots.rows[static_cast<std::size_t>(picked[li])];
        taken[li].assign(rows.size(), 0);
        std::vector<int> sel = rng.sample_without_replacement(static_cast<int>(rows.size()), shots);
        std::sort(sel.begin(), sel.end());
        for (const int s : sel) {
            taken[li][static_cast<std::size_t>(s)] = 1;
            ep.train_rows.push_back(rows[static_cast<std::size_t>(s)]);
            ep.train_pos.push_back(static_cast<int>(li));
        }
    }

    // S_batch: drawn from what the train split left over across L's classes.
    std::vector<int> rest_rows;
    std::vector<int> rest_pos;
    for (std::size_t li = 0; li < picked.size(); ++li) {
        const auto& rows = lots.rows[static_cast<std::size_t>(picked[li])];
        for (std::size_t s = 0; s < rows.size(); ++s) {
            if (taken[li][s]) continue;
            rest_rows.push_back(rows[s]);
            rest_pos.push_back(static_cast<int>(li));
        }
    }
    if (static_cast<int>(rest_rows.size()) < batch_size) {
        throw ConfigError("episode: batch size " + std::to_string(batch_size) + " exceeds the " +
                          std::to_string(rest_rows.size()) + " samples left after the train split");
    }
    std::vector<int> sel = rng.sample_without_replacement(static_cast<int>(rest_rows.size()), batch_size);
    std::sort(sel.begin(), sel.end());
    for (const int s : sel) {
        ep.batch_rows.push_back(rest_rows[static_cast<std::size_t>(s)]);
        ep.batch_pos.push_back(rest_pos[static_cast<std::size_t>(s)]);
    }

    // S': `shots` samples per one-example class.
    for (int ci = 0; ci < n_one; ++ci) {
        const auto& rows = oneshot.rows[static_cast<std::size_t>(ci)];
        std::vector<int> pick = rng.sample_without_replacement(static_cast<int>(rows.size()), shots);
        std::sort(pick.begin(), pick.end());
        for (const int s : pick) {
            ep.support_rows.push_back(rows[static_cast<std::size_t>(s)]);
            ep.support_pos.push_back(ci);
        }
    }
    return ep;
}

}  // namespace fuseshot
