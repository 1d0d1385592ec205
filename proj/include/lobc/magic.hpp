#pragma once

// Magic-basis machinery for two-qubit gates: the canonical decomposition
// U = phase · (R1⊗S1) · Ω(α,β,γ) · (R2⊗S2) with Ω diagonal in the magic
// basis, the local-equivalence fingerprint, membership and entangling tests.

#include "lobc/matrix.hpp"
#include "lobc/state.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace lobc {

struct DecompositionError : Error {
  using Error::Error;
};

/// Columns are |Φ0>, |Φ1>, |Φ2>, |Φ3>.
inline const Mat& magic_basis_matrix() {
  static const Mat q = [] {
    const double s = 1.0 / std::sqrt(2.0);
    const cplx i(0, 1);
    Mat m(4, 4);
    m.col(0) << s, 0, 0, s;
    m.col(1) << -i * s, 0, 0, i * s;
    m.col(2) << 0, -i * s, -i * s, 0;
    m.col(3) << 0, s, -s, 0;
    return m;
  }();
  return q;
}

inline std::array<double, 4> magic_phases_from_angles(double alpha, double beta,
                                                      double gamma) {
  return {alpha - beta + gamma, -alpha + beta + gamma, alpha + beta - gamma,
          -alpha - beta - gamma};
}

/// Ω(α,β,γ) = exp(i(α XX + β YY + γ ZZ)), diagonal in the magic basis.
inline Mat omega_from_angles(double alpha, double beta, double gamma) {
  const auto ph = magic_phases_from_angles(alpha, beta, gamma);
  Vec d(4);
  for (int k = 0; k < 4; ++k) d(k) = std::polar(1.0, ph[k]);
  const Mat& q = magic_basis_matrix();
  return q * d.asDiagonal() * q.adjoint();
}

/// M(α,β,γ) = CNOT (H⊗I) T_z(β) (R_z(α)⊗R_z(γ)) (H⊗I) CNOT.
inline Mat m_gate(double alpha, double beta, double gamma) {
  const Mat hi = kron(gates::hadamard(), gates::identity(2));
  const Mat rz2 = kron(gates::rz(alpha), gates::rz(gamma));
  return gates::cnot() * hi * gates::tz(beta) * rz2 * hi * gates::cnot();
}

struct CanonicalForm {
  double alpha = 0, beta = 0, gamma = 0;
  Mat pre_a, pre_b;    // applied first (R2 ⊗ S2)
  Mat post_a, post_b;  // applied last (R1 ⊗ S1)
  cplx phase{1.0, 0.0};

  Mat reconstruct() const {
    return phase * kron(post_a, post_b) * omega_from_angles(alpha, beta, gamma) *
           kron(pre_a, pre_b);
  }
};

namespace detail {

// Diagonalizes a unitary complex symmetric 4×4 matrix with a real orthogonal
// eigenbasis: S = P diag(λ) Pᵀ, det(P) = +1. Re(S) and Im(S) are commuting
// real symmetric matrices; eigenvectors of Re(S) are refined inside
// degenerate eigenspaces by diagonalizing Im(S) there.
inline std::pair<Eigen::Matrix4d, Vec> diagonalize_unitary_symmetric(
    const Mat& s) {
  using RMat = Eigen::Matrix4d;
  const RMat x = s.real();
  const RMat y = s.imag();

  auto attempt = [&](const RMat& primary, const RMat& secondary) {
    Eigen::SelfAdjointEigenSolver<RMat> es(primary);
    RMat p = es.eigenvectors();
    Eigen::Vector4d ev = es.eigenvalues();
    for (int lo = 0; lo < 4;) {
      int hi = lo + 1;
      while (hi < 4 && std::abs(ev(hi) - ev(lo)) < 1e-8) ++hi;
      if (hi - lo > 1) {
        Eigen::MatrixXd block =
            p.middleCols(lo, hi - lo).transpose() * secondary *
            p.middleCols(lo, hi - lo);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sub(block);
        p.middleCols(lo, hi - lo) =
            p.middleCols(lo, hi - lo) * sub.eigenvectors();
      }
      lo = hi;
    }
    return p;
  };

  RMat p = attempt(x, y);
  Mat d = p.transpose() * s * p;
  double offdiag = max_abs(d - Mat(d.diagonal().asDiagonal()));
  if (offdiag > 1e-9) {
    // Rare near-degenerate layout: random rotations of (Re, Im) separate
    // coincident eigenvalues of either part.
    RandomStream rng(0xD1A60);
    for (int tries = 0; tries < 32 && offdiag > 1e-9; ++tries) {
      const double t = rng.uniform(0.0, pi);
      p = attempt(std::cos(t) * x + std::sin(t) * y,
                  -std::sin(t) * x + std::cos(t) * y);
      d = p.transpose() * s * p;
      offdiag = max_abs(d - Mat(d.diagonal().asDiagonal()));
    }
    if (offdiag > 1e-9)
      throw DecompositionError("failed to diagonalize in the magic basis");
  }
  if (p.determinant() < 0) p.col(3) *= -1.0;
  Vec lambda = d.diagonal();
  for (int k = 0; k < 4; ++k) lambda(k) /= std::abs(lambda(k));
  return {p, lambda};
}

}  // namespace detail

/// Canonical decomposition of a two-qubit unitary. The returned form
/// satisfies phase · (post_a⊗post_b) · Ω(α,β,γ) · (pre_a⊗pre_b) = U within
/// 1e-9 in max-entry norm; angles are one representative of the local
/// equivalence class, not a Weyl-chamber reduction.
inline CanonicalForm canonical_decompose(const Mat& u) {
  if (u.rows() != 4 || u.cols() != 4)
    throw DimensionError("canonical_decompose: need a 4x4 matrix");
  require_unitary(u, 1e-10);
  const Mat& q = magic_basis_matrix();

  Mat m = q.adjoint() * u * q;
  const cplx det = m.determinant();
  const cplx root = std::pow(det, 0.25);
  m /= root;

  const Mat s = m.transpose() * m;
  auto [p, lambda] = detail::diagonalize_unitary_symmetric(s);

  std::array<double, 4> phi;
  for (int k = 0; k < 4; ++k) phi[k] = std::arg(lambda(k)) / 2.0;

  // det(D) must be +1; a π branch flip on one phase fixes -1.
  double sum = phi[0] + phi[1] + phi[2] + phi[3];
  if (std::cos(sum) < 0) {
    phi[0] += pi;
    sum += pi;
  }
  // Σφ is now an even multiple of π; shift phases by 2π (which leaves
  // e^{iφ} unchanged) until the sum vanishes and the angle map inverts.
  int twists = static_cast<int>(std::lround(sum / (2.0 * pi)));
  for (int k = 0; twists != 0 && k < 4; ++k) {
    phi[k] -= 2.0 * pi * (twists > 0 ? 1 : -1);
    twists += (twists > 0 ? -1 : 1);
  }

  Vec dinv(4), d(4);
  for (int k = 0; k < 4; ++k) {
    d(k) = std::polar(1.0, phi[k]);
    dinv(k) = std::polar(1.0, -phi[k]);
  }
  Mat o1 = m * p * dinv.asDiagonal();
  if (max_abs(Mat(o1.imag().cast<cplx>())) > 1e-8)
    throw DecompositionError("left orthogonal factor is not real");

  CanonicalForm cf;
  cf.alpha = (phi[0] - phi[1] + phi[2] - phi[3]) / 4.0;
  cf.beta = (-phi[0] + phi[1] + phi[2] - phi[3]) / 4.0;
  cf.gamma = (phi[0] + phi[1] - phi[2] - phi[3]) / 4.0;
  cf.phase = root;

  const Mat post = q * o1 * q.adjoint();
  const Mat pre = q * p.transpose().cast<cplx>() * q.adjoint();
  std::tie(cf.post_a, cf.post_b) = kron_factor(post, 2, 2, 2, 2, 1e-8);
  std::tie(cf.pre_a, cf.pre_b) = kron_factor(pre, 2, 2, 2, 2, 1e-8);

  if (max_abs(cf.reconstruct() - u) > 1e-9)
    throw DecompositionError("canonical decomposition failed to reconstruct");
  return cf;
}

/// Local-equivalence fingerprint: the sorted multiset of pairwise gaps of
/// the magic-basis eigenphases of UᵀU (computed in the magic basis). Each
/// gap is folded to [0, π], which removes the global-phase and conjugation
/// ambiguities of the spectrum.
inline std::vector<double> canonical_invariants(const Mat& u) {
  require_unitary(u, 1e-10);
  const Mat& q = magic_basis_matrix();
  const Mat m = q.adjoint() * u * q;
  const Mat s = m.transpose() * m;
  Eigen::ComplexEigenSolver<Mat> es(s);
  std::array<double, 4> theta;
  for (int k = 0; k < 4; ++k) theta[k] = std::arg(es.eigenvalues()(k));
  std::vector<double> gaps;
  for (int k = 0; k < 4; ++k)
    for (int l = k + 1; l < 4; ++l)
      gaps.push_back(std::abs(std::remainder(theta[k] - theta[l], 2.0 * pi)));
  std::sort(gaps.begin(), gaps.end());
  return gaps;
}

inline bool invariants_equal(const std::vector<double>& a,
                             const std::vector<double>& b, double tol = 1e-8) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

/// True when all canonical angles are integer multiples of π/4 within tol,
/// i.e. the gate is locally equivalent to a Clifford gate.
inline bool in_L(const Mat& u, double tol = 1e-8) {
  CanonicalForm cf = canonical_decompose(u);
  for (double x : {cf.alpha, cf.beta, cf.gamma}) {
    if (std::abs(std::remainder(x, pi / 4.0)) > tol) return false;
  }
  return true;
}

/// True when some overall phase makes U real in the magic basis; such gates
/// map every product state to a product state.
inline bool is_nonentangling(const Mat& u, double tol = 1e-8) {
  require_unitary(u, 1e-10);
  const Mat& q = magic_basis_matrix();
  const Mat m = q.adjoint() * u * q;
  Eigen::Index r = 0, c = 0;
  m.cwiseAbs().maxCoeff(&r, &c);
  const cplx phase = std::abs(m(r, c)) / m(r, c);
  return max_abs(Mat((phase * m).imag().cast<cplx>())) <= tol;
}

/// Product-state test in magic components: |Σ_k c_k²| vanishes exactly on
/// product states.
inline bool magic_product_criterion(const StateVector& psi, double tol = 1e-9) {
  if (psi.dim() != 4)
    throw DimensionError("magic_product_criterion: need a two-qubit state");
  StateVector work = psi;
  const Vec c = magic_basis_matrix().adjoint() * work.amplitudes();
  cplx total = 0;
  for (int k = 0; k < 4; ++k) total += c(k) * c(k);
  return std::abs(total) <= tol;
}

/// Weyl-chamber representative of the canonical class, for reporting:
/// c1 ≥ c2 ≥ |c3| with c1 ≤ π/4 and c3 ≥ 0 except on chiral classes.
inline std::array<double, 3> canonical_class(const Mat& u, double tol = 1e-9) {
  CanonicalForm cf = canonical_decompose(u);
  std::array<double, 3> c{cf.alpha, cf.beta, cf.gamma};
  for (auto& x : c) {
    x = std::remainder(x, pi / 2.0);  // π/2 shifts are local
    if (x < -pi / 4.0 + tol) x = pi / 4.0;  // boundary: -π/4 ≡ π/4
  }
  int negatives = 0;
  for (auto& x : c)
    if (x < -tol) {
      x = -x;
      ++negatives;
    } else if (x < 0) {
      x = 0.0;
    }
  std::sort(c.begin(), c.end(), std::greater<double>());
  if (negatives % 2 == 1) {
    // sign flips are local only in pairs; park the leftover on the smallest
    // coordinate unless a zero or the π/4 boundary absorbs it
    if (!(c[2] < tol) && !(c[0] > pi / 4.0 - tol)) c[2] = -c[2];
  }
  return c;
}

}  // namespace lobc
