#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check: spectral matrix exponential, brute-force Pauli searches and random
// complete Kraus sets.

#include "lobc/matrix.hpp"
#include "lobc/state.hpp"

#include <optional>
#include <vector>

namespace lobc::testing {

/// exp(iH) for hermitian H via spectral decomposition.
inline Mat exp_i_hermitian(const Mat& h) {
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Vec phases(h.rows());
  for (Eigen::Index k = 0; k < h.rows(); ++k)
    phases(k) = std::polar(1.0, es.eigenvalues()(k));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Independent route to Ω(α,β,γ) = exp(i(αXX+βYY+γZZ)).
inline Mat omega_oracle(double a, double b, double c) {
  using gates::sigma;
  Mat h = a * kron(sigma(1), sigma(1)) + b * kron(sigma(2), sigma(2)) +
          c * kron(sigma(3), sigma(3));
  return exp_i_hermitian(h);
}

/// True if w equals some phase times σ_p ⊗ σ_q.
inline bool is_pauli_pair_up_to_phase(const Mat& w, double tol = 1e-9) {
  for (int p = 0; p < 4; ++p) {
    for (int q = 0; q < 4; ++q) {
      const Mat pq = kron(gates::sigma(p), gates::sigma(q));
      // pick the phase from the largest entry of pq
      Eigen::Index r = 0, c = 0;
      pq.cwiseAbs().maxCoeff(&r, &c);
      const cplx phase = w(r, c) / pq(r, c);
      if (std::abs(std::abs(phase) - 1.0) > tol) continue;
      if (max_abs(w - phase * pq) <= tol) return true;
    }
  }
  return false;
}

/// All (p,q) with fidelity((σ_p⊗σ_q)·state, target) ≥ 1 - tol.
inline std::vector<std::pair<int, int>> pauli_corrections_oracle(
    const StateVector& state, const StateVector& target,
    const std::vector<std::string>& qubits, double tol = 1e-9) {
  std::vector<std::pair<int, int>> hits;
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) {
      StateVector s = state;
      s.apply(gates::sigma(p), {qubits[0]});
      s.apply(gates::sigma(q), {qubits[1]});
      if (fidelity_up_to_phase(s, target) >= 1.0 - tol) hits.emplace_back(p, q);
    }
  return hits;
}

/// Random complete Kraus set: k operators of size d×d cut from a Haar
/// isometry, so Σ K†K = I by construction.
inline KrausSet random_kraus_set(int d, int k, RandomStream& rng) {
  Mat u = haar_random_unitary(d * k, rng);
  Mat iso = u.leftCols(d);
  KrausSet ks;
  for (int i = 0; i < k; ++i)
    ks.operators.push_back(iso.middleRows(i * d, d));
  return ks;
}

/// Haar-random normalized state on the given subsystems.
inline StateVector random_state(std::vector<Subsystem> subs,
                                RandomStream& rng) {
  int total = 1;
  for (const auto& s : subs) total *= s.dim;
  Vec amps(total);
  for (int i = 0; i < total; ++i)
    amps(i) = cplx(rng.gaussian(), rng.gaussian());
  amps /= amps.norm();
  return StateVector(std::move(subs), std::move(amps));
}

/// Random hermitian unitary (spectrum ±1) of dimension d.
inline Mat random_hermitian_unitary(int d, RandomStream& rng, int n_minus = -1) {
  Mat u = haar_random_unitary(d, rng);
  if (n_minus < 0) n_minus = 1 + static_cast<int>(rng.below(d - 1 > 0 ? d - 1 : 1));
  Vec signs(d);
  for (int i = 0; i < d; ++i) signs(i) = (i < n_minus) ? -1.0 : 1.0;
  return u * signs.asDiagonal() * u.adjoint();
}

/// Haar-random rank-r projector of dimension d.
inline Mat random_projector(int d, int r, RandomStream& rng) {
  Mat u = haar_random_unitary(d, rng);
  Mat p = Mat::Zero(d, d);
  for (int i = 0; i < r; ++i) p += u.col(i) * u.col(i).adjoint();
  return p;
}

/// Regularized upper incomplete gamma Q(a,x), series + continued fraction.
inline double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) throw Error("gamma_q domain");
  if (x == 0) return 1.0;
  const double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // lower series, Q = 1 - P
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
  }
  // Lentz continued fraction for Q directly
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

/// Upper-tail p-value of a chi-square statistic.
inline double chi_square_pvalue(double statistic, int dof) {
  return gamma_q(dof / 2.0, statistic / 2.0);
}

}  // namespace lobc::testing
