#include <array>
#include <cmath>
#include <vector>

#include "anyprot/losses.hpp"
#include "anyprot/tensor.hpp"
#include "doctest.h"

using namespace anyprot;

namespace {

using A6 = std::array<double, 6>;
using M6 = std::array<bool, 6>;
constexpr A6 kZeros = {0, 0, 0, 0, 0, 0};
constexpr M6 kAll = {true, true, true, true, true, true};

// reference from a different formulation: minimal circular distance
double circ_dist_oracle(double a, double b) {
    double d = std::fabs(std::fmod(a - b, kTwoPi));
    return std::min(d, kTwoPi - d);
}

}  // namespace

TEST_CASE("nll: closed forms and masking") {
    // uniform logits over V=4, two response rows -> 2 ln 4
    Tensor logits = Tensor::zeros({2, 4}, true);
    Tensor l = nll_loss(logits, {1, 3}, 0);
    CHECK(l.item() == doctest::Approx(2.0 * std::log(4.0)).epsilon(1e-12));

    // saturated correct logit -> ~0; wrong -> huge
    Tensor sat = Tensor::from({2, 3}, {50, 0, 0, 0, 50, 0});
    CHECK(nll_loss(sat, {0, 1}, 0).item() < 1e-6);
    CHECK(nll_loss(sat, {1, 1}, 0).item() > 49.0);

    // rows before the response start contribute nothing, bit for bit
    Tensor x = Tensor::from({3, 4}, {1, 2, 3, 4, -1, 0.5, 2, 0, 0.3, 0.1, -2, 1});
    double base = nll_loss(x, {0, 2, 3}, 1).item();
    double perturbed_target = nll_loss(x, {3, 2, 3}, 1).item();
    CHECK(base == perturbed_target);
    Tensor x2 = Tensor::from({3, 4}, {9, -9, 0, 4, -1, 0.5, 2, 0, 0.3, 0.1, -2, 1});
    CHECK(nll_loss(x2, {0, 2, 3}, 1).item() == base);

    // j == T is an empty response; beyond T or bad targets are errors
    CHECK(nll_loss(x, {0, 2, 3}, 3).item() == 0.0);
    CHECK_THROWS_AS((void)nll_loss(x, {0, 2, 3}, 4), InputError);
    CHECK_THROWS_AS((void)nll_loss(x, {0, 2}, 0), DimensionError);
    CHECK_THROWS_AS((void)nll_loss(x, {0, 2, 7}, 0), InputError);
    CHECK_THROWS_AS((void)nll_loss(x, {0, 2, -1}, 0), InputError);
    // pre-response target ids are never touched, so junk there is legal
    CHECK(nll_loss(x, {-5, 2, 3}, 1).item() == base);
}

TEST_CASE("nll: strictly decreasing in the correct logit") {
    double prev = 1e300;
    for (double bump : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        Tensor t = Tensor::from({1, 3}, {0.2 + bump, -0.1, 0.4});
        double v = nll_loss(t, {0}, 0).item();
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("nll: gradient matches finite differences and flows upstream") {
    Rng rng(77);
    ParameterSet ps;
    ps.insert("logits", Tensor::zeros({4, 5}, true), true);
    for (size_t i = 0; i < 20; ++i) ps.at("logits").mut(static_cast<int>(i)) = rng.uniform(-2, 2);
    std::vector<int> tg = {1, 4, 0, 2};
    double worst = grad_check([&](ParameterSet& p) { return nll_loss(p.at("logits"), tg, 1); }, ps);
    CHECK(worst < 1e-6);

    // composite: logits produced by a matmul; gradient reaches the weights
    ParameterSet ps2;
    ps2.insert("h", Tensor::zeros({3, 4}, true), true);
    ps2.insert("w", Tensor::zeros({4, 6}, true), true);
    for (size_t i = 0; i < 12; ++i) ps2.at("h").mut(static_cast<int>(i)) = rng.uniform(-1, 1);
    for (size_t i = 0; i < 24; ++i) ps2.at("w").mut(static_cast<int>(i)) = rng.uniform(-1, 1);
    std::vector<int> tg2 = {5, 0, 3};
    double worst2 = grad_check(
        [&](ParameterSet& p) { return nll_loss(matmul(p.at("h"), p.at("w")), tg2, 0); }, ps2);
    CHECK(worst2 < 1e-6);
}

TEST_CASE("angle distance: examples, symmetry, periodicity, oracle") {
    CHECK(angle_distance(kZeros, kZeros) == 0.0);

    A6 a = kZeros, b = kZeros;
    a[2] = kPi - 0.1;
    b[2] = -kPi + 0.1;  // wraps to 0.2 apart
    CHECK(angle_distance(a, b) == doctest::Approx(0.2 / 6.0).epsilon(1e-12));

    A6 c = kZeros;
    c[0] = kPi;  // exactly pi off
    CHECK(angle_distance(c, kZeros) == doctest::Approx(kPi / 6.0).epsilon(1e-12));

    Rng rng(123);
    for (int trial = 0; trial < 10000; ++trial) {
        A6 u, v, u_shift;
        for (int j = 0; j < 6; ++j) {
            u[j] = rng.uniform(-8, 8);
            v[j] = rng.uniform(-8, 8);
            u_shift[j] = u[j] + kTwoPi * static_cast<double>(static_cast<int>(rng.below(7)) - 3);
        }
        double d = angle_distance(u, v);
        CHECK(d == doctest::Approx(angle_distance(v, u)).epsilon(1e-12));  // symmetric
        CHECK(d >= 0.0);
        CHECK(d <= kPi + 1e-12);
        double oracle = 0.0;
        for (int j = 0; j < 6; ++j) oracle += circ_dist_oracle(u[j], v[j]);
        CHECK(d == doctest::Approx(oracle / 6.0).epsilon(1e-9));
        CHECK(angle_distance(u_shift, v) == doctest::Approx(d).epsilon(1e-9));  // 2pi-periodic
    }
}

TEST_CASE("angle constraint: slack band and magnitudes") {
    CHECK(angle_constraint(kZeros, 0.1) == 0.0);
    A6 edge;
    for (int j = 0; j < 6; ++j) edge[j] = (j % 2 ? 1 : -1) * (kPi + 0.1);
    CHECK(angle_constraint(edge, 0.1) == 0.0);  // boundary is in range

    A6 over = kZeros;
    over[1] = kPi + 0.1 + 0.3;
    CHECK(angle_constraint(over, 0.1) == doctest::Approx(0.05).epsilon(1e-12));
    A6 under = kZeros;
    under[4] = -(kPi + 0.1) - 0.6;
    CHECK(angle_constraint(under, 0.1) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS((void)angle_constraint(kZeros, 0.0), InputError);
}

TEST_CASE("angle loss: composition, mask, and lambda linearity") {
    LossConfig cfg;

    // perfect in-range prediction -> exactly zero
    std::vector<A6> y = {{0.3, -1.0, 2.0, 1.9, 2.0, 2.1}, {-2.9, 3.0, 0.0, 1.8, 2.1, 2.0}};
    Tensor yh = Tensor::zeros({2, 6}, true);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 6; ++j) yh.mut(static_cast<int>(static_cast<size_t>(i * 6 + j))) = y[static_cast<size_t>(i)][static_cast<size_t>(j)];
    std::vector<M6> mask(2, kAll);
    CHECK(angle_loss(yh, y, mask, cfg).item() == 0.0);

    // single residue, one component exactly pi off -> pi/6
    Tensor one = Tensor::zeros({1, 6}, true);
    one.mut(static_cast<int>(0)) = kPi;
    CHECK(angle_loss(one, {kZeros}, {kAll}, cfg).item() ==
          doctest::Approx(kPi / 6.0).epsilon(1e-12));

    // doubling lambda doubles only the constraint part
    Tensor out = Tensor::zeros({1, 6}, true);
    out.mut(static_cast<int>(0)) = kPi + cfg.eps + 0.9;  // out of range by 0.9
    out.mut(static_cast<int>(1)) = 1.0;                  // plain distance-1 error vs 0
    LossConfig twice = cfg;
    twice.lambda = 2.0;
    double l1 = angle_loss(out, {kZeros}, {kAll}, cfg).item();
    double l2 = angle_loss(out, {kZeros}, {kAll}, twice).item();
    double constraint_part = angle_constraint({kPi + cfg.eps + 0.9, 1, 0, 0, 0, 0}, cfg.eps);
    CHECK(l2 - l1 == doctest::Approx(constraint_part).epsilon(1e-12));

    // masked components contribute nothing even with wild values
    Tensor wild = Tensor::zeros({2, 6}, true);
    wild.mut(static_cast<int>(0 * 6 + 0)) = 1e6;
    wild.mut(static_cast<int>(1 * 6 + 5)) = -40.0;
    std::vector<M6> holes(2, kAll);
    holes[0][0] = false;
    holes[1][5] = false;
    CHECK(angle_loss(wild, {kZeros, kZeros}, holes, cfg).item() == 0.0);
    std::vector<M6> none(2, M6{false, false, false, false, false, false});
    CHECK(angle_loss(wild, {kZeros, kZeros}, none, cfg).item() == 0.0);

    CHECK_THROWS_AS((void)angle_loss(wild, {kZeros}, holes, cfg), DimensionError);
    CHECK_THROWS_AS((void)angle_loss(wild, {kZeros, kZeros}, {kAll}, cfg), DimensionError);
    LossConfig bad = cfg;
    bad.lambda = -1;
    CHECK_THROWS_AS((void)angle_loss(wild, {kZeros, kZeros}, holes, bad), InputError);
}

TEST_CASE("angle loss: subgradient passes finite differences away from kinks") {
    LossConfig cfg;
    Rng rng(2026);
    const double margin = 0.05;  // rejection distance from |.| and max kinks
    int accepted = 0;
    while (accepted < 12) {
        std::vector<A6> y(3);
        Tensor yh = Tensor::zeros({3, 6}, true);
        bool ok = true;
        for (int i = 0; i < 3 && ok; ++i)
            for (int j = 0; j < 6 && ok; ++j) {
                double t = rng.uniform(-kPi, kPi);
                double p = rng.uniform(-4.0, 4.0);  // sometimes beyond the range limit
                double d = p - t;
                double dw = std::fabs(std::remainder(d, kTwoPi));
                if (dw < margin || std::fabs(dw - kPi) < margin) ok = false;       // |.| kinks
                if (std::fabs(std::fabs(p) - (kPi + cfg.eps)) < margin) ok = false;  // max kink
                y[static_cast<size_t>(i)][static_cast<size_t>(j)] = t;
                yh.mut(static_cast<int>(static_cast<size_t>(i * 6 + j))) = p;
            }
        if (!ok) continue;
        ++accepted;
        std::vector<M6> mask(3, kAll);
        mask[1][2] = false;  // one hole to exercise masked backward
        ParameterSet ps;
        ps.insert("yh", yh, true);
        double worst =
            grad_check([&](ParameterSet& p) { return angle_loss(p.at("yh"), y, mask, cfg); }, ps);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("angle loss: gradient is zero at masked slots and correct sign") {
    LossConfig cfg;
    Tensor yh = Tensor::zeros({1, 6}, true);
    yh.mut(static_cast<int>(0)) = 0.5;   // above target 0 -> positive sign
    yh.mut(static_cast<int>(1)) = -0.5;  // below -> negative
    yh.mut(static_cast<int>(2)) = 7.0;   // beyond pi+eps: wrapped distance sign + constraint sign
    std::vector<M6> mask = {kAll};
    mask[0][3] = false;
    yh.mut(static_cast<int>(3)) = 2.2;  // masked, must get zero grad
    Tensor l = angle_loss(yh, {kZeros}, mask, cfg);
    backward(l);
    const double* g = yh.grad->data();
    CHECK(g[0] == doctest::Approx(1.0 / 6.0));
    CHECK(g[1] == doctest::Approx(-1.0 / 6.0));
    // 7.0 wraps to 7-2pi ~ 0.717 > 0 and sits above pi+eps, so both terms push down
    CHECK(g[2] == doctest::Approx((1.0 + cfg.lambda) / 6.0));
    CHECK(g[3] == 0.0);
}
