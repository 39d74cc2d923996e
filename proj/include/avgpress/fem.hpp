#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "avgpress/mesh.hpp"

namespace avgpress {

using SparseMatrix = Eigen::SparseMatrix<double>;

// P1 stiffness and consistent mass matrices over all mesh vertices.
struct SystemMatrices {
  SparseMatrix stiffness;
  SparseMatrix mass;
};

SystemMatrices assemble(const TriangleMesh& mesh);

// Generalized problem K u = kappa M u restricted to a subspace of the P1 space.
// A reduced coefficient vector u maps to nodal values through `prolongation`
// (vertex_count x dimension).
struct ReducedSystem {
  SparseMatrix stiffness;
  SparseMatrix mass;
  SparseMatrix prolongation;
  // Integral of each reduced basis function (P^T M 1) and |Omega| = 1^T M 1.
  Eigen::VectorXd load;
  Eigen::VectorXd nodal_load;  // M 1 over all vertices
  double omega_area = 0.0;
  // Dimension of the full Dirichlet-reduced space V_0h, whatever the subspace.
  int dof = 0;

  int dimension() const { return static_cast<int>(stiffness.rows()); }
  Eigen::VectorXd embed(const Eigen::VectorXd& reduced) const { return prolongation * reduced; }
};

// Eliminates the rows and columns of the constrained nodes. Throws
// ParameterError when the node set is empty or covers every node.
ReducedSystem apply_dirichlet(const SystemMatrices& matrices,
                              std::span<const int> dirichlet_nodes);

// Which eigenfunctions to compute. Only x2-even modes have a nonzero mean, so
// the symmetric sector carries everything the objective and its shape
// derivative need; the full sector also returns the x2-odd modes.
enum class Sector { kFull, kSymmetric };

// Dirichlet elimination followed, for Sector::kSymmetric, by restriction to
// mirror-even functions (requires a mirror-symmetric mesh).
ReducedSystem reduce_system(const SystemMatrices& matrices, const TriangleMesh& mesh,
                            Sector sector);

struct EigenSolveOptions {
  double residual_tol = 1e-8;
  std::uint64_t start_seed = 0x5eed;
  // Problems at or below this dimension use a dense generalized solver.
  int dense_limit = 400;
};

// Eigenpairs with kappa <= cutoff, ascending, M-orthonormal, with nodal modes
// (zeros on Gamma_D) and their means.
struct DiscreteEigenBasis {
  std::vector<double> kappas;
  Eigen::MatrixXd modes;  // vertex_count x mode_count
  std::vector<double> means;
  double omega_area = 0.0;
  double cutoff = 0.0;
  int dof = 0;
  Sector sector = Sector::kFull;
  // Worst relative residual |K u - kappa M u| / |kappa M u| over the modes.
  double max_residual = 0.0;

  int size() const { return static_cast<int>(kappas.size()); }
  // dim V_0h at least 10 times the cutoff.
  bool dof_rule_satisfied() const { return dof >= 10.0 * cutoff; }
};

// Number of eigenvalues strictly below `shift` (Sylvester inertia of K - shift M).
int count_eigenvalues_below(const ReducedSystem& system, double shift);

DiscreteEigenBasis solve_eigen(const ReducedSystem& system, double cutoff,
                               const EigenSolveOptions& options = {});

// Exact P1 mean: sum over triangles of area (v_a + v_b + v_c) / 3, over |Omega|.
double mode_mean(const Eigen::VectorXd& nodal, const TriangleMesh& mesh);

// Mesh plus the spectral data computed on it.
struct DomainSpectrum {
  TriangleMesh mesh;
  DiscreteEigenBasis basis;
};

DomainSpectrum compute_spectrum(TriangleMesh mesh, double cutoff, Sector sector,
                                const EigenSolveOptions& options = {});

}  // namespace avgpress
