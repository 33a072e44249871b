#include <cmath>
#include <cstdio>
#include <fstream>

#include "anyprot/common.hpp"
#include "anyprot/geometry.hpp"
#include "doctest.h"

using namespace anyprot;

namespace {


TorsionProfile random_profile(int n, uint64_t seed) {
    Rng rng(seed);
    TorsionProfile t;
    t.angles.assign(static_cast<size_t>(n), {0, 0, 0, 0, 0, 0});
    auto mask = terminal_mask(n);
    for (int i = 0; i < n; ++i)
        for (int s = 0; s < 6; ++s) {
            if (!mask[static_cast<size_t>(i)][static_cast<size_t>(s)]) continue;
            if (s == kTheta1 || s == kTheta2 || s == kTheta3)
                t.angles[static_cast<size_t>(i)][static_cast<size_t>(s)] = rng.uniform(1.5, 2.5);
            else
                t.angles[static_cast<size_t>(i)][static_cast<size_t>(s)] =
                    wrap_angle(rng.uniform(-kPi, kPi));
        }
    return t;
}

Eigen::Matrix3d euler(double a, double b, double c) {
    return (Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(b, Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(c, Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

Backbone rigid_move(const Backbone& b, const Eigen::Matrix3d& rot, const Eigen::Vector3d& shift) {
    Backbone out = b;
    for (Residue& r : out.residues) {
        r.n = rot * r.n + shift;
        r.ca = rot * r.ca + shift;
        r.c = rot * r.c + shift;
    }
    return out;
}

}  // namespace

TEST_CASE("wrap_angle examples and properties") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0).epsilon(1e-14));
    CHECK(wrap_angle(kPi) == doctest::Approx(-kPi).epsilon(1e-14));
    CHECK(wrap_angle(kPi) < kPi);

    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(-40.0, 40.0);
        const double w = wrap_angle(a);
        CHECK(w >= -kPi);
        CHECK(w < kPi);
        CHECK(wrap_angle(w) == w);  // idempotent
        const int k = static_cast<int>(rng.below(7)) - 3;
        CHECK(wrap_angle(a + 2.0 * kPi * k) == doctest::Approx(w).epsilon(1e-11));
    }
}

TEST_CASE("terminal mask marks undefined angles") {
    auto m = terminal_mask(4);
    CHECK_FALSE(m[0][kPhi]);
    CHECK_FALSE(m[0][kOmega]);
    CHECK_FALSE(m[0][kTheta3]);
    CHECK(m[0][kPsi]);
    CHECK(m[0][kTheta1]);
    CHECK(m[0][kTheta2]);
    CHECK_FALSE(m[3][kPsi]);
    CHECK_FALSE(m[3][kTheta2]);
    CHECK(m[3][kPhi]);
    for (int s = 0; s < 6; ++s) CHECK(m[1][static_cast<size_t>(s)]);
}

TEST_CASE("trans-planar zigzag gives omega = +-pi") {
    // atoms at (1.2k, 0.8*(k odd), 0): every 4 consecutive atoms are a planar
    // trans quadruple, so all dihedrals are +-pi
    Backbone b;
    auto atom = [](int k) { return Eigen::Vector3d(1.2 * k, 0.8 * (k % 2), 0.0); };
    b.residues.push_back({atom(0), atom(1), atom(2)});
    b.residues.push_back({atom(3), atom(4), atom(5)});
    TorsionProfile t = extract_angles(b);
    CHECK(std::abs(std::abs(t.angles[1][kOmega]) - kPi) < 1e-9);
    CHECK(std::abs(std::abs(t.angles[1][kPhi]) - kPi) < 1e-9);
    CHECK(std::abs(std::abs(t.angles[0][kPsi]) - kPi) < 1e-9);
}

TEST_CASE("extract_angles outputs stay in range and masks terminals") {
    TorsionProfile t = extract_angles(reconstruct_backbone(random_profile(9, 21)));
    for (const auto& a : t.angles)
        for (double v : a) {
            CHECK(v >= -kPi);
            CHECK(v < kPi);
        }
    CHECK(t.angles[0][kPhi] == 0.0);
    CHECK(t.angles[0][kOmega] == 0.0);
    CHECK(t.angles[0][kTheta3] == 0.0);
    CHECK(t.angles[8][kPsi] == 0.0);
    CHECK(t.angles[8][kTheta2] == 0.0);
}

TEST_CASE("degenerate atom triples raise geometry errors") {
    Backbone b;
    b.residues.push_back({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});  // collinear N-CA-C
    b.residues.push_back({{3, 1, 0}, {4, 0, 0}, {5, 1, 0}});
    CHECK_THROWS_AS(extract_angles(b), GeometryError);

    Backbone short_chain;
    short_chain.residues.push_back({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    CHECK_THROWS_AS(extract_angles(short_chain), GeometryError);
}

TEST_CASE("two-residue placement matches hand arithmetic") {
    // planar profile: psi0 = omega1 = phi1 = -pi keeps every atom in z = 0,
    // and each placement reduces to a rotation by (pi - theta) in the plane
    TorsionProfile t;
    t.angles.assign(2, {0, 0, 0, 0, 0, 0});
    const double th10 = 2.0, th20 = 2.1, th31 = 1.9, th11 = 2.05;
    t.angles[0][kTheta1] = th10;
    t.angles[0][kTheta2] = th20;
    t.angles[0][kPsi] = -kPi;
    t.angles[1][kTheta3] = th31;
    t.angles[1][kTheta1] = th11;
    t.angles[1][kOmega] = -kPi;
    t.angles[1][kPhi] = -kPi;

    Backbone b = reconstruct_backbone(t);
    const Eigen::Vector3d n0(0, 0, 0), ca0(1.458, 0, 0);
    const Eigen::Vector3d c0 = ca0 + 1.525 * Eigen::Vector3d(-std::cos(th10), std::sin(th10), 0);
    // A trans dihedral keeps the quadruple coplanar with the outer atoms anti,
    // so the chain zigzags in the plane: each bond direction turns by
    // (pi - theta), alternating sides.
    const double a1 = (kPi - th10);            // polar angle of CA0->C0
    const double a2 = a1 - (kPi - th20);       // polar angle of C0->N1
    const double a3 = a2 + (kPi - th31);       // polar angle of N1->CA1 (zigzag alternates)
    const double a4 = a3 - (kPi - th11);       // polar angle of CA1->C1
    const Eigen::Vector3d n1 = c0 + 1.329 * Eigen::Vector3d(std::cos(a2), std::sin(a2), 0);
    const Eigen::Vector3d ca1 = n1 + 1.458 * Eigen::Vector3d(std::cos(a3), std::sin(a3), 0);
    const Eigen::Vector3d c1 = ca1 + 1.525 * Eigen::Vector3d(std::cos(a4), std::sin(a4), 0);

    CHECK((b.residues[0].n - n0).norm() < 1e-12);
    CHECK((b.residues[0].ca - ca0).norm() < 1e-12);
    CHECK((b.residues[0].c - c0).norm() < 1e-12);
    CHECK((b.residues[1].n - n1).norm() < 1e-9);
    CHECK((b.residues[1].ca - ca1).norm() < 1e-9);
    CHECK((b.residues[1].c - c1).norm() < 1e-9);
}

TEST_CASE("reconstruction is deterministic") {
    TorsionProfile t = random_profile(12, 31);
    Backbone a = reconstruct_backbone(t);
    Backbone b = reconstruct_backbone(t);
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.residues[static_cast<size_t>(i)].n == b.residues[static_cast<size_t>(i)].n);
        CHECK(a.residues[static_cast<size_t>(i)].ca == b.residues[static_cast<size_t>(i)].ca);
        CHECK(a.residues[static_cast<size_t>(i)].c == b.residues[static_cast<size_t>(i)].c);
    }
}

TEST_CASE("angle round trip over random profiles") {
    for (uint64_t trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(trial % 14);
        TorsionProfile t = random_profile(n, 1000 + trial);
        Backbone b = reconstruct_backbone(t);
        TorsionProfile r = extract_angles(b);
        auto mask = terminal_mask(n);
        for (int i = 0; i < n; ++i)
            for (int s = 0; s < 6; ++s) {
                if (!mask[static_cast<size_t>(i)][static_cast<size_t>(s)]) continue;
                const double diff = wrap_angle(r.angles[static_cast<size_t>(i)][static_cast<size_t>(s)] -
                                               t.angles[static_cast<size_t>(i)][static_cast<size_t>(s)]);
                CHECK(std::abs(diff) < 1e-6);
            }
        // coordinate round trip
        Backbone b2 = reconstruct_backbone(r);
        CHECK(kabsch_rmsd(b, b2) < 1e-6);
    }
}

TEST_CASE("kabsch_rmsd basics") {
    Backbone a = reconstruct_backbone(random_profile(10, 41));
    CHECK(kabsch_rmsd(a, a) < 1e-9);

    Backbone moved = rigid_move(a, euler(0.7, -0.3, 1.9), {5.0, -2.0, 11.0});
    CHECK(kabsch_rmsd(a, moved) < 1e-9);
    CHECK(kabsch_rmsd(a, moved, true) < 1e-9);

    // symmetry and rigid invariance
    Backbone b = reconstruct_backbone(random_profile(10, 42));
    const double ab = kabsch_rmsd(a, b);
    CHECK(std::abs(ab - kabsch_rmsd(b, a)) < 1e-9);
    Backbone b_moved = rigid_move(b, euler(-1.1, 0.4, 0.2), {-3.0, 7.0, 0.5});
    CHECK(std::abs(ab - kabsch_rmsd(a, b_moved)) < 1e-9);

    Backbone shorter = a;
    shorter.residues.pop_back();
    CHECK_THROWS_AS(kabsch_rmsd(a, shorter), InputError);
}

TEST_CASE("kabsch_rmsd matches an exhaustive rotation-grid search") {
    // 3 CA points per structure; translation handled by centering, rotation by
    // a zoomed grid over euler angles
    Backbone a, b;
    a.residues.push_back({{0, 0, 0}, {0.0, 0.0, 0.0}, {0, 0, 0}});
    a.residues.push_back({{0, 0, 0}, {2.1, 0.3, -0.5}, {0, 0, 0}});
    a.residues.push_back({{0, 0, 0}, {1.0, 2.2, 0.9}, {0, 0, 0}});
    b.residues.push_back({{0, 0, 0}, {0.2, -0.1, 0.4}, {0, 0, 0}});
    b.residues.push_back({{0, 0, 0}, {1.8, 1.1, 0.0}, {0, 0, 0}});
    b.residues.push_back({{0, 0, 0}, {-0.3, 1.9, 1.2}, {0, 0, 0}});

    Eigen::Matrix3d p, q;
    for (int i = 0; i < 3; ++i) {
        p.row(i) = a.residues[static_cast<size_t>(i)].ca;
        q.row(i) = b.residues[static_cast<size_t>(i)].ca;
    }
    p.rowwise() -= p.colwise().mean();
    q.rowwise() -= q.colwise().mean();

    auto rmsd_at = [&](double x, double y, double z) {
        const Eigen::Matrix3d r = euler(x, y, z);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += (r * p.row(i).transpose() - q.row(i).transpose()).squaredNorm();
        return std::sqrt(s / 3.0);
    };

    double cx = 0, cy = 0, cz = 0, span = kPi, best = 1e18;
    for (int stage = 0; stage < 6; ++stage) {
        double bx = cx, by = cy, bz = cz;
        const int steps = stage == 0 ? 24 : 8;
        for (int i = -steps; i <= steps; ++i)
            for (int j = -steps; j <= steps; ++j)
                for (int k = -steps; k <= steps; ++k) {
                    const double x = cx + span * i / steps;
                    const double y = cy + span * j / steps;
                    const double z = cz + span * k / steps;
                    const double v = rmsd_at(x, y, z);
                    if (v < best) {
                        best = v;
                        bx = x;
                        by = y;
                        bz = z;
                    }
                }
        cx = bx;
        cy = by;
        cz = bz;
        span = span * 2.0 / (stage == 0 ? 24 : 8);
    }

    const double analytic = kabsch_rmsd(a, b);
    CHECK(analytic <= best + 1e-9);  // grid can never beat the optimum
    CHECK(std::abs(analytic - best) < 1e-3);
}

TEST_CASE("tm_score examples") {
    Backbone a = reconstruct_backbone(random_profile(16, 51));
    CHECK(tm_score(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    Backbone jiggled = a;
    jiggled.residues[5].ca += Eigen::Vector3d(0.8, 0, 0);
    CHECK(tm_score(a, jiggled) < 1.0);

    // all d_i = d0 -> exactly 0.5
    const int L = 30;
    std::vector<double> d(static_cast<size_t>(L), tm_d0(L));
    CHECK(tm_from_distances(d, L) == doctest::Approx(0.5).epsilon(1e-14));

    // closed form at L = 30, all d_i = 2
    const double d0 = 1.24 * std::cbrt(30.0 - 15.0) - 1.8;
    const double expect = 1.0 / (1.0 + (2.0 / d0) * (2.0 / d0));
    std::vector<double> d2(30, 2.0);
    CHECK(tm_from_distances(d2, 30) == doctest::Approx(expect).epsilon(1e-12));

    // d0 clamp engages for short chains
    CHECK(tm_d0(15) == 0.5);
    CHECK(tm_d0(2) == 0.5);
    CHECK(tm_d0(30) == doctest::Approx(d0).epsilon(1e-14));
}

TEST_CASE("backbone files round trip in both formats") {
    Backbone b = reconstruct_backbone(random_profile(7, 61));

    write_backbone_jsonl(b, "bb_test.jsonl");
    Backbone rj = read_backbone("bb_test.jsonl");
    REQUIRE(rj.size() == b.size());
    for (int i = 0; i < b.size(); ++i)
        CHECK((rj.residues[static_cast<size_t>(i)].ca - b.residues[static_cast<size_t>(i)].ca).norm() <
              1e-12);

    write_backbone_pdb(b, "bb_test.pdb");
    Backbone rp = read_backbone("bb_test.pdb");
    REQUIRE(rp.size() == b.size());
    for (int i = 0; i < b.size(); ++i) {
        CHECK((rp.residues[static_cast<size_t>(i)].n - b.residues[static_cast<size_t>(i)].n).norm() < 2e-3);
        CHECK((rp.residues[static_cast<size_t>(i)].ca - b.residues[static_cast<size_t>(i)].ca).norm() <
              2e-3);
        CHECK((rp.residues[static_cast<size_t>(i)].c - b.residues[static_cast<size_t>(i)].c).norm() < 2e-3);
    }

    CHECK_THROWS_AS(read_backbone("no_such_backbone.jsonl"), IoError);
    {
        std::ofstream bad("bb_bad.jsonl");
        bad << "{\"index\": 0, \"N\": [0,0]}\n";
    }
    CHECK_THROWS_AS(read_backbone("bb_bad.jsonl"), IoError);
    std::remove("bb_test.jsonl");
    std::remove("bb_test.pdb");
    std::remove("bb_bad.jsonl");
}
