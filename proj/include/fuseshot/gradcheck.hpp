#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace fuseshot {

// Central finite-difference validation of every training objective (O1, O2,
// O3, the combined objective, and the fine-tuning loss, each under both
// heads). Every point builds a fresh small random problem — random
// parameters, episode, class embeddings and tree — and compares tape adjoints
// against (f(p+h) - f(p-h)) / 2h coordinate by coordinate, subsampling large
// parameter matrices. Quasi-labels are frozen at the evaluation point, since
// the objective treats them as constants.
struct GradCheckReport {
    int points = 0;
    int checks = 0;         // individual coordinates compared
    double max_rel_err = 0.0;
    std::string worst;      // "objective param[index]" behind max_rel_err
    bool passed = false;
};

GradCheckReport run_gradient_suite(int points, std::uint64_t seed, std::ostream& out, double tolerance = 1e-4);

}  // namespace fuseshot
