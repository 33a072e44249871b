#pragma once

#include <array>
#include <vector>

#include "anyprot/common.hpp"
#include "anyprot/tensor.hpp"

namespace anyprot {

struct LossConfig {
    double lambda = 1.0;     // weight of the out-of-range penalty inside the angle loss
    double eps = 0.1;        // slack beyond pi tolerated by the penalty (radians)
    double angle_mix = 1.0;  // weight of the angle loss when combined with token NLL
};

// -sum_{i >= response_start} log softmax(logits_i)[targets_i]; rows before the
// response contribute nothing. Differentiable w.r.t. logits.
Tensor nll_loss(const Tensor& logits, const std::vector<int>& targets, int response_start);

// (1/6) sum_j |wrap(y_hat_j - y_j)|  — plain scalar, also the test oracle hook
double angle_distance(const std::array<double, 6>& y_hat, const std::array<double, 6>& y);

// (1/6) sum_j max(0, -(pi+eps) - y_hat_j, y_hat_j - (pi+eps))
double angle_constraint(const std::array<double, 6>& y_hat, double eps);

// Sum over residues/components the mask admits of
// (1/6)(|wrap(y_hat - y)| + lambda * out_of_range(y_hat)).
// y_hat is n x 6 and differentiable; y and mask are data.
Tensor angle_loss(const Tensor& y_hat, const std::vector<std::array<double, 6>>& y,
                  const std::vector<std::array<bool, 6>>& mask, const LossConfig& cfg);

}  // namespace anyprot
