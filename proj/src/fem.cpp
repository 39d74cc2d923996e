#include "avgpress/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "avgpress/errors.hpp"
#include "avgpress/log.hpp"
#include "avgpress/rng.hpp"

namespace avgpress {

namespace {

using Triplet = Eigen::Triplet<double>;

// Flips each mode so its first significant nodal value is positive.
void fix_signs(Eigen::MatrixXd& modes) {
  for (int c = 0; c < modes.cols(); ++c) {
    auto col = modes.col(c);
    const double scale = col.cwiseAbs().maxCoeff();
    for (int i = 0; i < col.size(); ++i) {
      if (std::abs(col(i)) > 1e-8 * scale) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
  }
}

struct RitzSet {
  Eigen::MatrixXd vectors;  // reduced coordinates, M-orthonormal
  std::vector<double> kappas;
};

// Rayleigh-Ritz on span(basis): returns ascending pairs of the projected pencil.
RitzSet rayleigh_ritz(const ReducedSystem& sys, const Eigen::MatrixXd& basis) {
  const Eigen::MatrixXd kb = sys.stiffness * basis;
  const Eigen::MatrixXd mb = sys.mass * basis;
  Eigen::MatrixXd kh = basis.transpose() * kb;
  Eigen::MatrixXd mh = basis.transpose() * mb;
  kh = 0.5 * (kh + kh.transpose()).eval();
  mh = 0.5 * (mh + mh.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(kh, mh);
  if (es.info() != Eigen::Success) throw NumericError("projected eigenproblem failed");
  RitzSet out;
  out.vectors = basis * es.eigenvectors();
  out.kappas.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

RitzSet solve_dense(const ReducedSystem& sys) {
  const Eigen::MatrixXd k = Eigen::MatrixXd(sys.stiffness);
  const Eigen::MatrixXd m = Eigen::MatrixXd(sys.mass);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(k, m);
  if (es.info() != Eigen::Success) throw NumericError("dense generalized eigensolver failed");
  RitzSet out;
  out.vectors = es.eigenvectors();
  out.kappas.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

// Shift-invert Lanczos for K^{-1} M in the M inner product, with full
// reorthogonalization. Converged wanted vectors are locked; a fresh random
// start deflated against them picks up eigenvalues missed by a previous run
// (repeated or nearly repeated ones).
Eigen::MatrixXd lanczos_wanted(const ReducedSystem& sys, int wanted, double cutoff,
                               const EigenSolveOptions& opt) {
  const int n = sys.dimension();
  Eigen::SimplicialLDLT<SparseMatrix> k_factor(sys.stiffness);
  if (k_factor.info() != Eigen::Success) throw NumericError("stiffness factorization failed");

  Eigen::MatrixXd locked(n, 0);
  Eigen::MatrixXd m_locked(n, 0);
  Rng rng(opt.start_seed);
  const double theta_min = 1.0 / cutoff;
  constexpr double kRitzTol = 1e-11;

  auto orthogonalize = [&](Eigen::VectorXd& w, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd& mq, int cols) {
    for (int pass = 0; pass < 2; ++pass) {
      if (locked.cols() > 0) w -= locked * (m_locked.transpose() * w);
      if (cols > 0) w -= q.leftCols(cols) * (mq.leftCols(cols).transpose() * w);
    }
  };

  for (int run = 0; locked.cols() < wanted; ++run) {
    if (run > 30) throw NumericError("Lanczos failed to resolve the requested eigenvalues");
    const int remaining = wanted - static_cast<int>(locked.cols());
    const int space = n - static_cast<int>(locked.cols());
    const int m_max = std::min(space, std::max(2 * remaining + 60, 3 * remaining));

    Eigen::MatrixXd q(n, m_max);
    Eigen::MatrixXd mq(n, m_max);
    std::vector<double> alpha;
    std::vector<double> beta;  // beta[j] couples q_j and q_{j+1}

    auto fresh_vector = [&](int cols) -> bool {
      for (int attempt = 0; attempt < 5; ++attempt) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = rng.uniform(-1.0, 1.0);
        orthogonalize(v, q, mq, cols);
        const double nrm = std::sqrt(v.dot(sys.mass * v));
        if (nrm > 1e-10) {
          q.col(cols) = v / nrm;
          mq.col(cols) = sys.mass * q.col(cols);
          return true;
        }
      }
      return false;
    };
    if (!fresh_vector(0)) break;

    Eigen::MatrixXd ritz_vectors;
    int converged_wanted = 0;
    int m = 0;
    for (int j = 0; j < m_max; ++j) {
      Eigen::VectorXd w = k_factor.solve(mq.col(j));
      const double a = w.dot(mq.col(j));
      alpha.push_back(a);
      w -= a * q.col(j);
      if (j > 0) w -= beta[j - 1] * q.col(j - 1);
      orthogonalize(w, q, mq, j + 1);
      const double b = std::sqrt(std::max(0.0, w.dot(sys.mass * w)));
      m = j + 1;

      const bool last = (m == m_max);
      const bool breakdown = b <= 1e-12 * std::abs(a);
      if (last || breakdown || (m >= remaining && (m - remaining) % 10 == 0)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
        Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
        Eigen::VectorXd sub = Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1);
        tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
        const auto& theta = tri.eigenvalues();
        const auto& s = tri.eigenvectors();
        std::vector<int> good;
        bool all_wanted_converged = true;
        for (int i = 0; i < m; ++i) {
          const double bound = (breakdown ? 0.0 : b) * std::abs(s(m - 1, i));
          const bool conv = bound <= kRitzTol * std::abs(theta(i));
          if (theta(i) >= theta_min) {
            if (conv) good.push_back(i);
            else all_wanted_converged = false;
          }
        }
        converged_wanted = static_cast<int>(good.size());
        if (converged_wanted >= remaining || last || breakdown ||
            (all_wanted_converged && converged_wanted > 0 &&
             m >= converged_wanted + 40)) {
          ritz_vectors.resize(n, converged_wanted);
          for (int c = 0; c < converged_wanted; ++c) {
            ritz_vectors.col(c) = q.leftCols(m) * s.col(good[c]);
          }
          break;
        }
      }
      if (breakdown) break;
      beta.push_back(b);
      q.col(j + 1) = w / b;
      mq.col(j + 1) = sys.mass * q.col(j + 1);
    }

    if (ritz_vectors.cols() == 0) {
      if (m >= space) break;
      continue;
    }
    // Lock against the existing set with a second M-orthogonalization.
    for (int c = 0; c < ritz_vectors.cols() && locked.cols() < wanted; ++c) {
      Eigen::VectorXd v = ritz_vectors.col(c);
      for (int pass = 0; pass < 2; ++pass) {
        if (locked.cols() > 0) v -= locked * (m_locked.transpose() * v);
      }
      const double nrm = std::sqrt(v.dot(sys.mass * v));
      if (nrm < 0.5) continue;
      v /= nrm;
      locked.conservativeResize(Eigen::NoChange, locked.cols() + 1);
      m_locked.conservativeResize(Eigen::NoChange, m_locked.cols() + 1);
      locked.col(locked.cols() - 1) = v;
      m_locked.col(m_locked.cols() - 1) = sys.mass * v;
    }
  }
  return locked;
}

}  // namespace

SystemMatrices assemble(const TriangleMesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<Triplet> kt;
  std::vector<Triplet> mt;
  kt.reserve(9 * mesh.triangle_count());
  mt.reserve(9 * mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a = mesh.signed_area(t);
    if (!(a > 0.0)) throw NumericError("triangle " + std::to_string(t) + " has non-positive area");
    // Edge opposite vertex i; grad phi_i is that edge rotated, over 2A.
    std::array<Point, 3> e;
    for (int i = 0; i < 3; ++i) {
      e[i] = mesh.vertices[tri[(i + 2) % 3]] - mesh.vertices[tri[(i + 1) % 3]];
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        kt.emplace_back(tri[i], tri[j], e[i].dot(e[j]) / (4.0 * a));
        mt.emplace_back(tri[i], tri[j], a / 12.0 * (i == j ? 2.0 : 1.0));
      }
    }
  }
  SystemMatrices out;
  out.stiffness.resize(n, n);
  out.mass.resize(n, n);
  out.stiffness.setFromTriplets(kt.begin(), kt.end());
  out.mass.setFromTriplets(mt.begin(), mt.end());
  return out;
}

namespace {

ReducedSystem project(const SystemMatrices& mats, SparseMatrix prolongation, int dof) {
  ReducedSystem out;
  const SparseMatrix pt = prolongation.transpose();
  out.stiffness = pt * mats.stiffness * prolongation;
  out.mass = pt * mats.mass * prolongation;
  const Eigen::VectorXd row_integrals = mats.mass * Eigen::VectorXd::Ones(mats.mass.rows());
  out.load = pt * row_integrals;
  out.nodal_load = row_integrals;
  out.omega_area = row_integrals.sum();
  out.prolongation = std::move(prolongation);
  out.dof = dof;
  return out;
}

std::vector<char> constrained_mask(int n, std::span<const int> dirichlet_nodes) {
  std::vector<char> fixed(n, 0);
  for (int v : dirichlet_nodes) {
    if (v < 0 || v >= n) throw ParameterError("Dirichlet node index out of range");
    fixed[v] = 1;
  }
  return fixed;
}

}  // namespace

ReducedSystem apply_dirichlet(const SystemMatrices& matrices,
                              std::span<const int> dirichlet_nodes) {
  const int n = static_cast<int>(matrices.stiffness.rows());
  const auto fixed = constrained_mask(n, dirichlet_nodes);
  std::vector<Triplet> pt;
  int col = 0;
  for (int v = 0; v < n; ++v) {
    if (!fixed[v]) pt.emplace_back(v, col++, 1.0);
  }
  if (col == 0 || col == n) throw ParameterError("Dirichlet set must be a proper nonempty subset");
  SparseMatrix p(n, col);
  p.setFromTriplets(pt.begin(), pt.end());
  return project(matrices, std::move(p), col);
}

ReducedSystem reduce_system(const SystemMatrices& matrices, const TriangleMesh& mesh,
                            Sector sector) {
  if (sector == Sector::kFull) return apply_dirichlet(matrices, mesh.dirichlet_nodes);
  if (!mesh.is_mirror_symmetric(1e-12)) {
    throw ParameterError("symmetric sector requires a mirror-symmetric mesh");
  }
  const int n = mesh.vertex_count();
  const auto fixed = constrained_mask(n, mesh.dirichlet_nodes);
  std::vector<int> orbit(n, -1);
  std::vector<Triplet> pt;
  int col = 0;
  int dof = 0;
  for (int v = 0; v < n; ++v) {
    if (fixed[v]) continue;
    ++dof;
    const int w = mesh.mirror[v];
    if (fixed[w]) throw ParameterError("mirror of a free node is constrained");
    if (orbit[v] < 0) {
      orbit[v] = col;
      orbit[w] = col;
      ++col;
    }
    pt.emplace_back(v, orbit[v], 1.0);
  }
  if (col == 0) throw ParameterError("Dirichlet set must be a proper nonempty subset");
  SparseMatrix p(n, col);
  p.setFromTriplets(pt.begin(), pt.end());
  return project(matrices, std::move(p), dof);
}

int count_eigenvalues_below(const ReducedSystem& system, double shift) {
  SparseMatrix a = system.stiffness - shift * system.mass;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("shifted factorization failed (shift on an eigenvalue?)");
  const auto& d = ldlt.vectorD();
  int negatives = 0;
  for (int i = 0; i < d.size(); ++i) {
    if (d(i) == 0.0) throw NumericError("singular shifted matrix; shift coincides with an eigenvalue");
    if (d(i) < 0.0) ++negatives;
  }
  return negatives;
}

DiscreteEigenBasis solve_eigen(const ReducedSystem& system, double cutoff,
                               const EigenSolveOptions& options) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw ParameterError("eigen cutoff must be positive");
  const int n = system.dimension();
  if (system.dof < 10.0 * cutoff) {
    warn_once(fmt::format("dof {} is below 10 x cutoff {}; eigenvalues near the cutoff are inaccurate",
                          system.dof, cutoff));
  }
  const int wanted = count_eigenvalues_below(system, cutoff);

  RitzSet pairs;
  if (wanted == 0) {
    pairs.vectors.resize(n, 0);
  } else if (n <= options.dense_limit || 2 * wanted + 60 >= n) {
    pairs = solve_dense(system);
  } else {
    pairs = rayleigh_ritz(system, lanczos_wanted(system, wanted, cutoff, options));
  }

  int count = 0;
  while (count < static_cast<int>(pairs.kappas.size()) && pairs.kappas[count] <= cutoff) ++count;
  if (count != wanted) {
    throw NumericError("eigensolver found " + std::to_string(count) + " eigenvalues below the cutoff, inertia says " +
                       std::to_string(wanted));
  }

  DiscreteEigenBasis out;
  out.cutoff = cutoff;
  out.dof = system.dof;
  out.omega_area = system.omega_area;
  out.kappas.assign(pairs.kappas.begin(), pairs.kappas.begin() + count);
  const Eigen::MatrixXd reduced = pairs.vectors.leftCols(count);

  for (int c = 0; c < count; ++c) {
    const Eigen::VectorXd u = reduced.col(c);
    const Eigen::VectorXd mu = system.mass * u;
    const Eigen::VectorXd r = system.stiffness * u - out.kappas[c] * mu;
    const double rel = r.norm() / std::max(std::abs(out.kappas[c]) * mu.norm(), 1e-300);
    out.max_residual = std::max(out.max_residual, rel);
  }
  if (out.max_residual > options.residual_tol) {
    throw NumericError("eigenpair residual " + std::to_string(out.max_residual) + " exceeds tolerance");
  }
  if (count > 0) {
    const Eigen::MatrixXd gram = reduced.transpose() * (system.mass * reduced);
    const double orth = (gram - Eigen::MatrixXd::Identity(count, count)).cwiseAbs().maxCoeff();
    if (orth > 1e-8) throw NumericError("eigenvectors lost M-orthonormality");
  }

  out.modes = system.prolongation * reduced;
  fix_signs(out.modes);
  out.means.resize(count);
  for (int c = 0; c < count; ++c) {
    out.means[c] = system.nodal_load.dot(out.modes.col(c)) / system.omega_area;
  }
  return out;
}

double mode_mean(const Eigen::VectorXd& nodal, const TriangleMesh& mesh) {
  double s = 0.0;
  double area = 0.0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& [a, b, c] = mesh.triangles[t];
    const double at = mesh.signed_area(t);
    s += at * (nodal(a) + nodal(b) + nodal(c)) / 3.0;
    area += at;
  }
  return s / area;
}

DomainSpectrum compute_spectrum(TriangleMesh mesh, double cutoff, Sector sector,
                                const EigenSolveOptions& options) {
  const SystemMatrices mats = assemble(mesh);
  const ReducedSystem sys = reduce_system(mats, mesh, sector);
  DomainSpectrum out{std::move(mesh), solve_eigen(sys, cutoff, options)};
  out.basis.sector = sector;
  return out;
}

}  // namespace avgpress
