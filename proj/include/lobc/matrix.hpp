#pragma once

// Dense complex matrix primitives, fixed gate tables and the seeded random
// stream used everywhere else. Matrices are Eigen dynamic-size complex
// doubles; subsystem ordering follows the usual Kronecker convention
// (first factor is the slow index).

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lobc {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double pi = 3.14159265358979323846;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct LabelError : Error {
  using Error::Error;
};
struct NonUnitaryError : Error {
  using Error::Error;
};
struct CompletenessError : Error {
  using Error::Error;
};
struct FactorizationError : Error {
  using Error::Error;
};

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat dagger(const Mat& m) { return m.adjoint(); }

/// Max-entry norm ‖·‖_max.
inline double max_abs(const Mat& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double unitarity_defect(const Mat& u) {
  if (u.rows() != u.cols()) return 1.0;
  return max_abs(Mat(u.adjoint() * u) - Mat::Identity(u.rows(), u.cols()));
}

inline bool is_unitary(const Mat& u, double tol = 1e-10) {
  return unitarity_defect(u) <= tol;
}

inline void require_unitary(const Mat& u, double tol = 1e-10) {
  if (!is_unitary(u, tol))
    throw NonUnitaryError("matrix is not unitary within tolerance " +
                          std::to_string(tol));
}

namespace gates {

inline Mat identity(int d = 2) { return Mat::Identity(d, d); }

/// Pauli matrix by index 0..3 = I, X, Y, Z.
inline const Mat& sigma(int j) {
  static const Mat table[4] = {
      (Mat(2, 2) << 1, 0, 0, 1).finished(),
      (Mat(2, 2) << 0, 1, 1, 0).finished(),
      (Mat(2, 2) << 0, cplx(0, -1), cplx(0, 1), 0).finished(),
      (Mat(2, 2) << 1, 0, 0, -1).finished()};
  if (j < 0 || j > 3) throw DimensionError("pauli index out of range");
  return table[j];
}

inline const Mat& hadamard() {
  static const Mat h =
      (Mat(2, 2) << 1, 1, 1, -1).finished() / std::sqrt(2.0);
  return h;
}

inline const Mat& cnot() {
  static const Mat m = (Mat(4, 4) << 1, 0, 0, 0,  //
                        0, 1, 0, 0,               //
                        0, 0, 0, 1,               //
                        0, 0, 1, 0)
                           .finished();
  return m;
}

inline const Mat& cz() {
  static const Mat m = Vec((Vec(4) << 1, 1, 1, -1).finished()).asDiagonal();
  return m;
}

inline const Mat& swap_gate() {
  static const Mat m = (Mat(4, 4) << 1, 0, 0, 0,  //
                        0, 0, 1, 0,               //
                        0, 1, 0, 0,               //
                        0, 0, 0, 1)
                           .finished();
  return m;
}

inline const Mat& iswap() {
  static const Mat m = (Mat(4, 4) << 1, 0, 0, 0,            //
                        0, 0, cplx(0, 1), 0,                //
                        0, cplx(0, 1), 0, 0,                //
                        0, 0, 0, 1)
                           .finished();
  return m;
}

/// R_z(t) = diag(e^{it/2}, e^{-it/2}) = exp(i t Z / 2).
inline Mat rz(double theta) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = std::polar(1.0, theta / 2.0);
  m(1, 1) = std::polar(1.0, -theta / 2.0);
  return m;
}

inline Vec rz_diagonal(double theta) {
  Vec d(2);
  d << std::polar(1.0, theta / 2.0), std::polar(1.0, -theta / 2.0);
  return d;
}

/// T_z(t) = R_z(-t) ⊕ R_z(t) = exp(-i t Z⊗Z / 2).
inline Vec tz_diagonal(double theta) {
  const cplx a = std::polar(1.0, -theta / 2.0);
  const cplx b = std::polar(1.0, theta / 2.0);
  Vec d(4);
  d << a, b, b, a;
  return d;
}

inline Mat tz(double theta) { return Mat(tz_diagonal(theta).asDiagonal()); }

/// Cyclic-shift Weyl operator X|k> = |k+1 mod d>.
inline Mat weyl_x(int d) {
  Mat m = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) m((k + 1) % d, k) = 1.0;
  return m;
}

/// Clock Weyl operator Z|k> = ω^k|k>, ω = e^{2πi/d}.
inline Mat weyl_z(int d) {
  Mat m = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) m(k, k) = std::polar(1.0, 2.0 * pi * k / d);
  return m;
}

inline Mat weyl(int d, int m, int n) {
  Mat x = Mat::Identity(d, d);
  for (int i = 0; i < m; ++i) x = weyl_x(d) * x;
  Mat z = Mat::Identity(d, d);
  for (int i = 0; i < n; ++i) z = weyl_z(d) * z;
  return x * z;
}

}  // namespace gates

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic seeded random stream. Substreams are derived from the seed
/// and an index, never from the draw position, so trial-level parallelism
/// cannot change the numbers. Doubles are built from raw 64-bit draws to
/// keep sequences identical across standard-library implementations.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    // xoshiro256** state from splitmix64, the reference seeding procedure.
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t v, int k) {
      return (v << k) | (v >> (64 - k));
    };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * pi * u2);
  }

  /// Independent stream addressed by (seed, index).
  RandomStream substream(std::uint64_t index) const {
    std::uint64_t s = seed_ ^ (0xA02BDBF7BB3C0A7ULL * (index + 1));
    return RandomStream(splitmix64(s));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Haar-random d×d unitary: QR of a complex Gaussian matrix with the R
/// diagonal phases folded back into Q.
inline Mat haar_random_unitary(int d, RandomStream& rng) {
  if (d < 1) throw DimensionError("haar_random_unitary: d must be >= 1");
  Mat g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      g(i, j) = cplx(rng.gaussian(), rng.gaussian()) / std::sqrt(2.0);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < d; ++k) {
    cplx rkk = r(k, k);
    cplx phase = std::abs(rkk) > 0 ? rkk / std::abs(rkk) : cplx(1, 0);
    q.col(k) *= phase;
  }
  return q;
}

/// Splits W ≈ A ⊗ B (A is ra×ca, B is rb×cb) via the rank-one rearrangement
/// and rescales so both factors are unitary when W is. Throws if the
/// residual exceeds tol.
inline std::pair<Mat, Mat> kron_factor(const Mat& w, int ra, int ca, int rb,
                                       int cb, double tol = 1e-8) {
  if (w.rows() != ra * rb || w.cols() != ca * cb)
    throw DimensionError("kron_factor: shape mismatch");
  // R[(i,j),(k,l)] = W[(i,k),(j,l)]: rank one exactly when W is a product.
  Mat r(ra * ca, rb * cb);
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < ca; ++j)
      for (int k = 0; k < rb; ++k)
        for (int l = 0; l < cb; ++l)
          r(i * ca + j, k * cb + l) = w(i * rb + k, j * cb + l);
  Eigen::JacobiSVD<Mat> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double s0 = svd.singularValues()(0);
  Mat a(ra, ca), b(rb, cb);
  for (int i = 0; i < ra; ++i)
    for (int j = 0; j < ca; ++j) a(i, j) = std::sqrt(s0) * svd.matrixU()(i * ca + j, 0);
  for (int k = 0; k < rb; ++k)
    for (int l = 0; l < cb; ++l)
      b(k, l) = std::sqrt(s0) * std::conj(svd.matrixV()(k * cb + l, 0));
  // Distribute scale so each factor is unitary on its own.
  const double na = std::sqrt(Mat(a.adjoint() * a).real().trace() / ca);
  if (na > 0) {
    a /= na;
    b *= na;
  }
  if (max_abs(kron(a, b) - w) > tol)
    throw FactorizationError("kron_factor: residual above tolerance");
  return {a, b};
}

}  // namespace lobc
