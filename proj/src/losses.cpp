#include "anyprot/losses.hpp"

#include <cmath>
#include <memory>

#include "anyprot/geometry.hpp"

namespace anyprot {

Tensor nll_loss(const Tensor& logits, const std::vector<int>& targets, int response_start) {
    if (logits.shape.size() != 2)
        throw DimensionError("nll_loss expects a 2-d logits matrix");
    const size_t t = logits.shape[0], v = logits.shape[1];
    if (targets.size() != t)
        throw DimensionError("nll_loss: " + std::to_string(targets.size()) + " targets for " +
                             std::to_string(t) + " logit rows");
    if (response_start < 0 || static_cast<size_t>(response_start) > t)
        throw InputError("nll_loss: response start " + std::to_string(response_start) +
                         " outside [0, " + std::to_string(t) + "]");
    for (size_t i = static_cast<size_t>(response_start); i < t; ++i)
        if (targets[i] < 0 || static_cast<size_t>(targets[i]) >= v)
            throw InputError("nll_loss: target id " + std::to_string(targets[i]) +
                             " outside vocabulary of " + std::to_string(v));

    // log-sum-exp form so saturated logits cannot underflow the picked prob
    auto probs = std::make_shared<std::vector<double>>();  // rows >= j, for backward
    probs->resize((t - static_cast<size_t>(response_start)) * v);
    double loss = 0.0;
    const double* x = logits.data->data();
    for (size_t i = static_cast<size_t>(response_start); i < t; ++i) {
        const double* row = x + i * v;
        double m = row[0];
        for (size_t c = 1; c < v; ++c) m = std::max(m, row[c]);
        double z = 0.0;
        for (size_t c = 0; c < v; ++c) z += std::exp(row[c] - m);
        double lse = m + std::log(z);
        loss += lse - row[static_cast<size_t>(targets[i])];
        double* p = probs->data() + (i - static_cast<size_t>(response_start)) * v;
        for (size_t c = 0; c < v; ++c) p[c] = std::exp(row[c] - lse);
    }

    Tensor out = Tensor::scalar(loss);
    if (!grad_enabled() || !logits.requires_grad) return out;
    int j = response_start;
    std::vector<int> tg = targets;
    attach_node(out, {logits}, [probs, tg, j, t, v](Tensor& o) {
        double g = (*o.grad)[0];
        double* dx = o.node->parents[0].grad->data();
        for (size_t i = static_cast<size_t>(j); i < t; ++i) {
            const double* p = probs->data() + (i - static_cast<size_t>(j)) * v;
            double* drow = dx + i * v;
            for (size_t c = 0; c < v; ++c) drow[c] += g * p[c];
            drow[static_cast<size_t>(tg[i])] -= g;
        }
    });
    return out;
}

double angle_distance(const std::array<double, 6>& y_hat, const std::array<double, 6>& y) {
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += std::fabs(wrap_angle(y_hat[j] - y[j]));
    return s / 6.0;
}

double angle_constraint(const std::array<double, 6>& y_hat, double eps) {
    if (!(eps > 0)) throw InputError("angle constraint slack must be positive");
    const double lim = kPi + eps;
    double s = 0.0;
    for (int j = 0; j < 6; ++j) s += std::max({0.0, -lim - y_hat[j], y_hat[j] - lim});
    return s / 6.0;
}

Tensor angle_loss(const Tensor& y_hat, const std::vector<std::array<double, 6>>& y,
                  const std::vector<std::array<bool, 6>>& mask, const LossConfig& cfg) {
    if (!(cfg.lambda >= 0)) throw InputError("angle loss lambda must be nonnegative");
    if (!(cfg.eps > 0)) throw InputError("angle loss eps must be positive");
    if (y_hat.shape.size() != 2 || y_hat.shape[1] != 6)
        throw DimensionError("angle_loss expects an n x 6 prediction matrix");
    const size_t n = y_hat.shape[0];
    if (y.size() != n || mask.size() != n)
        throw DimensionError("angle_loss: prediction rows (" + std::to_string(n) +
                             "), target rows (" + std::to_string(y.size()) + ") and mask rows (" +
                             std::to_string(mask.size()) + ") must agree");

    const double lim = kPi + cfg.eps;
    double loss = 0.0;
    const double* yh = y_hat.data->data();
    for (size_t i = 0; i < n; ++i)
        for (int j = 0; j < 6; ++j) {
            if (!mask[i][static_cast<size_t>(j)]) continue;
            double p = yh[i * 6 + static_cast<size_t>(j)];
            double d = wrap_angle(p - y[i][static_cast<size_t>(j)]);
            loss += (std::fabs(d) + cfg.lambda * std::max({0.0, -lim - p, p - lim})) / 6.0;
        }

    Tensor out = Tensor::scalar(loss);
    if (!grad_enabled() || !y_hat.requires_grad) return out;
    auto yc = y;
    auto mc = mask;
    double lambda = cfg.lambda;
    attach_node(out, {y_hat}, [yc, mc, lambda, lim, n](Tensor& o) {
        double g = (*o.grad)[0] / 6.0;
        const double* yh = o.node->parents[0].data->data();
        double* dy = o.node->parents[0].grad->data();
        for (size_t i = 0; i < n; ++i)
            for (int j = 0; j < 6; ++j) {
                if (!mc[i][static_cast<size_t>(j)]) continue;
                double p = yh[i * 6 + static_cast<size_t>(j)];
                double d = wrap_angle(p - yc[i][static_cast<size_t>(j)]);
                double s = (d > 0) - (d < 0);  // subgradient 0 at the kink
                double c = p > lim ? 1.0 : (p < -lim ? -1.0 : 0.0);
                dy[i * 6 + static_cast<size_t>(j)] += g * (s + lambda * c);
            }
    });
    return out;
}

}  // namespace anyprot
