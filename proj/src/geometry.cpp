#include "anyprot/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace anyprot {

namespace {


constexpr double kDegenerateCross = 1e-9;

Eigen::Vector3d unit_or_throw(const Eigen::Vector3d& v, const char* what) {
    const double n = v.norm();
    if (n < kDegenerateCross) throw GeometryError(std::string(what) + ": degenerate atom triple");
    return v / n;
}

}  // namespace

double wrap_angle(double a) {
    if (!std::isfinite(a)) throw GeometryError("wrap_angle: non-finite input");
    double r = std::fmod(a + kPi, 2.0 * kPi);
    if (r < 0) r += 2.0 * kPi;
    r -= kPi;
    if (r >= kPi) r -= 2.0 * kPi;  // r+2pi can round up to exactly 2pi
    return r;
}

std::vector<std::array<bool, 6>> terminal_mask(int n_residues) {
    std::vector<std::array<bool, 6>> mask(static_cast<size_t>(n_residues),
                                          {true, true, true, true, true, true});
    if (n_residues == 0) return mask;
    mask[0][kPhi] = mask[0][kOmega] = mask[0][kTheta3] = false;
    mask[static_cast<size_t>(n_residues - 1)][kPsi] = false;
    mask[static_cast<size_t>(n_residues - 1)][kTheta2] = false;
    return mask;
}

double bond_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d u = a - b, v = c - b;
    if (u.norm() < kDegenerateCross || v.norm() < kDegenerateCross)
        throw GeometryError("bond_angle: coincident atoms");
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

double dihedral(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                const Eigen::Vector3d& d) {
    const Eigen::Vector3d b1 = b - a, b2 = c - b, b3 = d - c;
    const Eigen::Vector3d n1 = b1.cross(b2), n2 = b2.cross(b3);
    if (n1.norm() < kDegenerateCross || n2.norm() < kDegenerateCross)
        throw GeometryError("dihedral: collinear atom triple");
    const Eigen::Vector3d b2u = unit_or_throw(b2, "dihedral");
    return std::atan2(n1.cross(n2).dot(b2u), n1.dot(n2));
}

void validate_backbone(const Backbone& b) {
    if (b.size() < 2) throw GeometryError("backbone: fewer than 2 residues");
    for (const Residue& r : b.residues)
        for (const Eigen::Vector3d* p : {&r.n, &r.ca, &r.c})
            if (!p->allFinite()) throw GeometryError("backbone: non-finite coordinate");
    for (int i = 0; i + 1 < b.size(); ++i) {
        const double d = (b.residues[static_cast<size_t>(i + 1)].ca -
                          b.residues[static_cast<size_t>(i)].ca)
                             .norm();
        if (!(d > 0.0 && d < 10.0))
            throw GeometryError("backbone: CA-CA distance " + std::to_string(d) + " out of range");
    }
}

TorsionProfile extract_angles(const Backbone& b) {
    validate_backbone(b);
    const int L = b.size();
    TorsionProfile t;
    t.angles.assign(static_cast<size_t>(L), {0, 0, 0, 0, 0, 0});
    const auto& rs = b.residues;
    for (int i = 0; i < L; ++i) {
        auto& a = t.angles[static_cast<size_t>(i)];
        a[kTheta1] = wrap_angle(bond_angle(rs[i].n, rs[i].ca, rs[i].c));
        if (i > 0) {
            a[kPhi] = wrap_angle(dihedral(rs[i - 1].c, rs[i].n, rs[i].ca, rs[i].c));
            a[kOmega] = wrap_angle(dihedral(rs[i - 1].ca, rs[i - 1].c, rs[i].n, rs[i].ca));
            a[kTheta3] = wrap_angle(bond_angle(rs[i - 1].c, rs[i].n, rs[i].ca));
        }
        if (i + 1 < L) {
            a[kPsi] = wrap_angle(dihedral(rs[i].n, rs[i].ca, rs[i].c, rs[i + 1].n));
            a[kTheta2] = wrap_angle(bond_angle(rs[i].ca, rs[i].c, rs[i + 1].n));
        }
    }
    return t;
}

namespace {

// Natural extension of reference frame: place D from the three prior atoms
// with bond length r (C-D), bond angle theta at C (B-C-D) and dihedral chi
// (A-B-C-D). Paired with dihedral() above so the round trip is exact.
Eigen::Vector3d place_atom(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& c, double r, double theta, double chi) {
    const Eigen::Vector3d bc = unit_or_throw(c - b, "place_atom");
    const Eigen::Vector3d n = unit_or_throw((b - a).cross(c - b), "place_atom");
    const Eigen::Vector3d m = n.cross(bc);
    const double st = std::sin(theta);
    return c + r * (-std::cos(theta) * bc + st * std::cos(chi) * m + st * std::sin(chi) * n);
}

}  // namespace

Backbone reconstruct_backbone(const TorsionProfile& t) {
    const int L = t.size();
    if (L < 2) throw GeometryError("reconstruct_backbone: fewer than 2 residues");
    Backbone b;
    b.residues.resize(static_cast<size_t>(L));
    // canonical frame for residue 0: N at the origin, CA on +x, C in the
    // xy-plane at bond angle theta1.
    const double th1 = t.angles[0][kTheta1];
    b.residues[0].n = {0, 0, 0};
    b.residues[0].ca = {kBondNCa, 0, 0};
    b.residues[0].c =
        b.residues[0].ca + kBondCaC * Eigen::Vector3d(-std::cos(th1), std::sin(th1), 0.0);
    for (int i = 1; i < L; ++i) {
        const Residue& prev = b.residues[static_cast<size_t>(i - 1)];
        Residue& cur = b.residues[static_cast<size_t>(i)];
        const auto& prev_a = t.angles[static_cast<size_t>(i - 1)];
        const auto& a = t.angles[static_cast<size_t>(i)];
        cur.n = place_atom(prev.n, prev.ca, prev.c, kBondCN, prev_a[kTheta2], prev_a[kPsi]);
        cur.ca = place_atom(prev.ca, prev.c, cur.n, kBondNCa, a[kTheta3], a[kOmega]);
        cur.c = place_atom(prev.c, cur.n, cur.ca, kBondCaC, a[kTheta1], a[kPhi]);
    }
    return b;
}

namespace {

Eigen::MatrixXd stack_atoms(const Backbone& b, bool all_atoms) {
    const int L = b.size();
    Eigen::MatrixXd m(all_atoms ? 3 * L : L, 3);
    for (int i = 0; i < L; ++i) {
        const Residue& r = b.residues[static_cast<size_t>(i)];
        if (all_atoms) {
            m.row(3 * i) = r.n;
            m.row(3 * i + 1) = r.ca;
            m.row(3 * i + 2) = r.c;
        } else {
            m.row(i) = r.ca;
        }
    }
    return m;
}

// Aligned per-point distances after the optimal rigid superposition of p onto q.
std::vector<double> kabsch_distances(Eigen::MatrixXd p, Eigen::MatrixXd q) {
    const Eigen::RowVector3d pc = p.colwise().mean(), qc = q.colwise().mean();
    p.rowwise() -= pc;
    q.rowwise() -= qc;
    const Eigen::Matrix3d h = p.transpose() * q;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
    const Eigen::Matrix3d rot = svd.matrixV() * d * svd.matrixU().transpose();
    std::vector<double> out(static_cast<size_t>(p.rows()));
    for (int i = 0; i < p.rows(); ++i)
        out[static_cast<size_t>(i)] = (rot * p.row(i).transpose() - q.row(i).transpose()).norm();
    return out;
}

}  // namespace

double kabsch_rmsd(const Backbone& a, const Backbone& b, bool all_atoms) {
    if (a.size() != b.size()) throw InputError("kabsch_rmsd: residue count mismatch");
    if (a.size() < 1) throw InputError("kabsch_rmsd: empty backbone");
    const std::vector<double> d = kabsch_distances(stack_atoms(a, all_atoms), stack_atoms(b, all_atoms));
    double s = 0.0;
    for (double v : d) s += v * v;
    return std::sqrt(s / static_cast<double>(d.size()));
}

double tm_d0(int length) {
    const double raw = 1.24 * std::cbrt(static_cast<double>(length) - 15.0) - 1.8;
    return std::max(0.5, raw);
}

double tm_from_distances(const std::vector<double>& d, int length) {
    if (length < 1) throw InputError("tm_from_distances: length < 1");
    const double d0 = tm_d0(length);
    double s = 0.0;
    for (double v : d) s += 1.0 / (1.0 + (v / d0) * (v / d0));
    return s / static_cast<double>(length);
}

double tm_score(const Backbone& a, const Backbone& b) {
    if (a.size() != b.size()) throw InputError("tm_score: residue count mismatch");
    if (a.size() < 1) throw InputError("tm_score: empty backbone");
    const std::vector<double> d = kabsch_distances(stack_atoms(a, false), stack_atoms(b, false));
    return tm_from_distances(d, b.size());
}

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

namespace {

Eigen::Vector3d json_vec3(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
        throw IoError(std::string("backbone json: missing 3-vector field ") + key);
    return {j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>()};
}

Backbone read_backbone_jsonl(std::istream& in) {
    Backbone b;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IoError(std::string("backbone json: ") + e.what());
        }
        Residue r{json_vec3(j, "N"), json_vec3(j, "CA"), json_vec3(j, "C")};
        b.residues.push_back(r);
    }
    return b;
}

Backbone read_backbone_pdb(std::istream& in) {
    Backbone b;
    std::string line;
    int cur_seq = INT32_MIN;
    Residue cur{};
    int have = 0;  // bitmask N=1, CA=2, C=4
    auto flush = [&]() {
        if (have == 0) return;
        if (have != 7) throw IoError("backbone pdb: residue missing one of N/CA/C");
        b.residues.push_back(cur);
        have = 0;
    };
    while (std::getline(in, line)) {
        if (line.rfind("ATOM", 0) != 0) continue;
        if (line.size() < 54) throw IoError("backbone pdb: short ATOM record");
        std::string name = line.substr(12, 4);
        name.erase(0, name.find_first_not_of(' '));
        name.erase(name.find_last_not_of(' ') + 1);
        const int seq = std::stoi(line.substr(22, 4));
        const double x = std::stod(line.substr(30, 8));
        const double y = std::stod(line.substr(38, 8));
        const double z = std::stod(line.substr(46, 8));
        if (seq != cur_seq) {
            flush();
            cur_seq = seq;
        }
        if (name == "N") {
            cur.n = {x, y, z};
            have |= 1;
        } else if (name == "CA") {
            cur.ca = {x, y, z};
            have |= 2;
        } else if (name == "C") {
            cur.c = {x, y, z};
            have |= 4;
        }
    }
    flush();
    return b;
}

}  // namespace

Backbone read_backbone(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read backbone file " + path);
    // detect the format from the first record
    std::string first;
    std::streampos start = in.tellg();
    while (std::getline(in, first)) {
        const size_t at = first.find_first_not_of(" \t\r");
        if (at != std::string::npos) {
            in.seekg(start);
            Backbone b = first[at] == '{' ? read_backbone_jsonl(in) : read_backbone_pdb(in);
            if (b.residues.empty()) throw IoError("backbone file has no residues: " + path);
            return b;
        }
        start = in.tellg();
    }
    throw IoError("backbone file is empty: " + path);
}

void write_backbone_jsonl(const Backbone& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (int i = 0; i < b.size(); ++i) {
        const Residue& r = b.residues[static_cast<size_t>(i)];
        nlohmann::json j;
        j["index"] = i;
        j["N"] = {r.n.x(), r.n.y(), r.n.z()};
        j["CA"] = {r.ca.x(), r.ca.y(), r.ca.z()};
        j["C"] = {r.c.x(), r.c.y(), r.c.z()};
        out << j.dump() << "\n";
    }
    if (!out.good()) throw IoError("write failed: " + path);
}

void write_backbone_pdb(const Backbone& b, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    char buf[96];
    int serial = 1;
    for (int i = 0; i < b.size(); ++i) {
        const Residue& r = b.residues[static_cast<size_t>(i)];
        const struct {
            const char* name;
            const Eigen::Vector3d& p;
        } atoms[3] = {{" N  ", r.n}, {" CA ", r.ca}, {" C  ", r.c}};
        for (const auto& a : atoms) {
            std::snprintf(buf, sizeof(buf), "ATOM  %5d %s GLY A%4d    %8.3f%8.3f%8.3f  1.00  0.00\n",
                          serial++, a.name, i + 1, a.p.x(), a.p.y(), a.p.z());
            out << buf;
        }
    }
    out << "END\n";
    if (!out.good()) throw IoError("write failed: " + path);
}

}  // namespace anyprot
