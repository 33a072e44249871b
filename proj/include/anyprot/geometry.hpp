#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anyprot/common.hpp"

namespace anyprot {

// Backbone atoms of one residue, ångströms.
struct Residue {
    Eigen::Vector3d n, ca, c;
};

struct Backbone {
    std::vector<Residue> residues;
    int size() const { return static_cast<int>(residues.size()); }
};

// Per-residue six-angle representation, radians, each in [-pi, pi).
// Slot order: phi, psi, omega, theta1, theta2, theta3.
//   phi_i    = dihedral(C_{i-1}, N_i, CA_i, C_i)
//   psi_i    = dihedral(N_i, CA_i, C_i, N_{i+1})
//   omega_i  = dihedral(CA_{i-1}, C_{i-1}, N_i, CA_i)
//   theta1_i = bond angle(N_i, CA_i, C_i)
//   theta2_i = bond angle(CA_i, C_i, N_{i+1})
//   theta3_i = bond angle(C_{i-1}, N_i, CA_i)
// The first residue has no phi/omega/theta3, the last no psi/theta2; those
// slots are stored as 0 and excluded from loss accounting via terminal_mask.
struct TorsionProfile {
    std::vector<std::array<double, 6>> angles;
    int size() const { return static_cast<int>(angles.size()); }
};

inline constexpr int kPhi = 0, kPsi = 1, kOmega = 2, kTheta1 = 3, kTheta2 = 4, kTheta3 = 5;

// Ideal backbone bond lengths (ångströms) used for reconstruction.
inline constexpr double kBondNCa = 1.458;
inline constexpr double kBondCaC = 1.525;
inline constexpr double kBondCN = 1.329;

// ((a + pi) mod 2pi) - pi, result in [-pi, pi); wrap(pi) == -pi.
double wrap_angle(double a);

// true where the angle is defined (interior of the chain).
std::vector<std::array<bool, 6>> terminal_mask(int n_residues);

double bond_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c);
double dihedral(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                const Eigen::Vector3d& d);

// Throws GeometryError when the chain is too short, has non-finite
// coordinates, or consecutive CA atoms are coincident/too far apart.
void validate_backbone(const Backbone& b);

TorsionProfile extract_angles(const Backbone& b);
Backbone reconstruct_backbone(const TorsionProfile& t);

// Minimal RMSD over rigid superpositions of CA atoms (SVD of the covariance
// with reflection correction). `all_atoms` switches to N/CA/C.
double kabsch_rmsd(const Backbone& a, const Backbone& b, bool all_atoms = false);

// (1/L) sum 1/(1+(d_i/d0)^2) over CA pairs under the Kabsch superposition,
// normalized by the second argument's length.
double tm_score(const Backbone& a, const Backbone& b);
double tm_d0(int length);  // 1.24 (L-15)^(1/3) - 1.8, clamped below at 0.5
double tm_from_distances(const std::vector<double>& d, int length);

// Backbone files: JSON-lines {"index": i, "N": [x,y,z], "CA": ..., "C": ...}
// (default writer output) or a minimal PDB subset with ATOM records for
// N/CA/C. The reader detects the format from the first record.
Backbone read_backbone(const std::string& path);
void write_backbone_jsonl(const Backbone& b, const std::string& path);
void write_backbone_pdb(const Backbone& b, const std::string& path);

}  // namespace anyprot
