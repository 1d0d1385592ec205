#pragma once

// State vectors over labeled subsystems of mixed dimension. Subsystems are
// addressed by label, never by position: operations reorder amplitudes
// internally as needed, so protocol code reads like the pen-and-paper
// description it implements.

#include "lobc/matrix.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobc {

struct Subsystem {
  std::string label;
  int dim = 2;
};

class StateVector {
 public:
  StateVector() = default;

  StateVector(std::vector<Subsystem> subs, Vec amplitudes)
      : subs_(std::move(subs)), amps_(std::move(amplitudes)) {
    int total = 1;
    for (const auto& s : subs_) {
      if (s.dim < 1) throw DimensionError("subsystem dimension must be >= 1");
      total *= s.dim;
    }
    if (amps_.size() != total)
      throw DimensionError("amplitude vector length does not match dims");
    for (size_t i = 0; i < subs_.size(); ++i)
      for (size_t j = i + 1; j < subs_.size(); ++j)
        if (subs_[i].label == subs_[j].label)
          throw LabelError("duplicate subsystem label: " + subs_[i].label);
  }

  static StateVector basis_state(std::vector<Subsystem> subs,
                                 const std::vector<int>& levels) {
    if (levels.size() != subs.size())
      throw DimensionError("basis_state: one level per subsystem required");
    int total = 1;
    for (const auto& s : subs) total *= s.dim;
    int index = 0;
    for (size_t i = 0; i < subs.size(); ++i) {
      if (levels[i] < 0 || levels[i] >= subs[i].dim)
        throw DimensionError("basis_state: level out of range");
      index = index * subs[i].dim + levels[i];
    }
    Vec amps = Vec::Zero(total);
    amps(index) = 1.0;
    return StateVector(std::move(subs), std::move(amps));
  }

  /// |Φ+_d> = (1/√d) Σ_k |kk> on two fresh d-dimensional subsystems.
  static StateVector maximally_entangled(int d, const std::string& a,
                                         const std::string& b) {
    Vec amps = Vec::Zero(static_cast<Eigen::Index>(d) * d);
    for (int k = 0; k < d; ++k) amps(k * d + k) = 1.0 / std::sqrt(double(d));
    return StateVector({{a, d}, {b, d}}, std::move(amps));
  }

  bool empty() const { return subs_.empty(); }
  const std::vector<Subsystem>& subsystems() const { return subs_; }
  const Vec& amplitudes() const { return amps_; }
  Vec& amplitudes() { return amps_; }
  int dim() const { return static_cast<int>(amps_.size()); }
  double norm() const { return amps_.norm(); }

  bool has(std::string_view label) const {
    return find(label) != subs_.size();
  }

  int position(std::string_view label) const {
    size_t p = find(label);
    if (p == subs_.size())
      throw LabelError("unknown subsystem label: " + std::string(label));
    return static_cast<int>(p);
  }

  int dim_of(std::string_view label) const {
    return subs_[position(label)].dim;
  }

  /// Tensor product; labels must not collide.
  StateVector tensor(const StateVector& other) const {
    if (empty()) return other;
    if (other.empty()) return *this;
    std::vector<Subsystem> subs = subs_;
    for (const auto& s : other.subs_) {
      if (has(s.label)) throw LabelError("tensor: label collision " + s.label);
      subs.push_back(s);
    }
    Vec amps(amps_.size() * other.amps_.size());
    for (Eigen::Index i = 0; i < amps_.size(); ++i)
      amps.segment(i * other.amps_.size(), other.amps_.size()) =
          amps_(i) * other.amps_;
    return StateVector(std::move(subs), std::move(amps));
  }

  /// Reorders subsystems into the given label order (must be a permutation
  /// of the current labels).
  void reorder(const std::vector<std::string>& order) {
    if (order.size() != subs_.size())
      throw LabelError("reorder: wrong number of labels");
    std::vector<int> perm(order.size());
    for (size_t i = 0; i < order.size(); ++i) perm[i] = position(order[i]);
    permute(perm);
  }

  void apply(const Mat& u, const std::vector<std::string>& targets) {
    std::vector<int> pos(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) pos[i] = position(targets[i]);
    int m = 1;
    for (int p : pos) m *= subs_[p].dim;
    if (u.rows() != m || u.cols() != m)
      throw DimensionError("apply: operator dimension does not match targets");
    move_to_back(pos);
    const Eigen::Index rest = amps_.size() / m;
    Eigen::Map<Mat> block(amps_.data(), m, rest);
    block = u * block;
  }

  /// Diagonal operator on the target tuple; avoids materializing the matrix.
  void apply_diagonal(const Vec& d, const std::vector<std::string>& targets) {
    std::vector<int> pos(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) pos[i] = position(targets[i]);
    int m = 1;
    for (int p : pos) m *= subs_[p].dim;
    if (d.size() != m)
      throw DimensionError("apply_diagonal: dimension mismatch");
    move_to_back(pos);
    const Eigen::Index rest = amps_.size() / m;
    Eigen::Map<Mat> block(amps_.data(), m, rest);
    block = d.asDiagonal() * block;
  }

  /// Applies one Kraus operator (rows = product of kept output dims,
  /// cols = product of input dims); inputs not named in outputs are removed
  /// from the state. Returns the unnormalized result.
  StateVector after_kraus(const Mat& k, const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) const {
    StateVector work = *this;
    std::vector<int> pos(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i)
      pos[i] = work.position(inputs[i]);
    int din = 1;
    for (int p : pos) din *= work.subs_[p].dim;
    int dout = 1;
    std::vector<Subsystem> out_subs;
    for (const auto& label : outputs) {
      bool is_input = std::find(inputs.begin(), inputs.end(), label) != inputs.end();
      if (!is_input)
        throw LabelError("after_kraus: output must be one of the inputs");
      out_subs.push_back(work.subs_[work.position(label)]);
      dout *= out_subs.back().dim;
    }
    if (k.cols() != din || k.rows() != dout)
      throw DimensionError("after_kraus: operator shape mismatch");
    work.move_to_back(pos);
    const Eigen::Index rest = work.amps_.size() / din;
    Eigen::Map<const Mat> block(work.amps_.data(), din, rest);
    Mat mapped = k * block;
    std::vector<Subsystem> subs(work.subs_.begin(),
                                work.subs_.end() - inputs.size());
    for (auto& s : out_subs) subs.push_back(std::move(s));
    Vec amps(mapped.size());
    Eigen::Map<Mat>(amps.data(), dout, rest) = mapped;
    return StateVector(std::move(subs), std::move(amps));
  }

  void normalize() {
    const double n = amps_.norm();
    if (n > 0) amps_ /= n;
  }

  void scale(cplx c) { amps_ *= c; }

 private:
  std::vector<Subsystem> subs_;
  Vec amps_;

  size_t find(std::string_view label) const {
    for (size_t i = 0; i < subs_.size(); ++i)
      if (subs_[i].label == label) return i;
    return subs_.size();
  }

  // Moves the given positions (in order) to the end of the subsystem list.
  void move_to_back(const std::vector<int>& pos) {
    std::vector<int> perm;
    perm.reserve(subs_.size());
    std::vector<char> is_target(subs_.size(), 0);
    for (int p : pos) is_target[p] = 1;
    for (size_t i = 0; i < subs_.size(); ++i)
      if (!is_target[i]) perm.push_back(static_cast<int>(i));
    for (int p : pos) perm.push_back(p);
    permute(perm);
  }

  void permute(const std::vector<int>& perm) {
    bool identity = true;
    for (size_t i = 0; i < perm.size(); ++i)
      if (perm[i] != static_cast<int>(i)) identity = false;
    if (identity) return;

    const size_t n = subs_.size();
    std::vector<int> old_stride(n, 1);
    for (size_t i = n; i-- > 1;)
      old_stride[i - 1] = old_stride[i] * subs_[i].dim;

    std::vector<Subsystem> new_subs(n);
    for (size_t i = 0; i < n; ++i) new_subs[i] = subs_[perm[i]];

    // stride of new position i in the old layout
    std::vector<int> stride_in_old(n);
    for (size_t i = 0; i < n; ++i) stride_in_old[i] = old_stride[perm[i]];

    Vec out(amps_.size());
    std::vector<int> digits(n, 0);
    int old_index = 0;
    for (Eigen::Index ni = 0; ni < out.size(); ++ni) {
      out(ni) = amps_(old_index);
      // increment mixed-radix counter over the new layout (last digit fastest)
      for (size_t i = n; i-- > 0;) {
        ++digits[i];
        old_index += stride_in_old[i];
        if (digits[i] < new_subs[i].dim) break;
        old_index -= digits[i] * stride_in_old[i];
        digits[i] = 0;
      }
    }
    amps_ = std::move(out);
    subs_ = std::move(new_subs);
  }
};

/// |<a|b>| after aligning subsystem order; invariant under global phase.
inline double fidelity_up_to_phase(const StateVector& a, const StateVector& b) {
  if (a.subsystems().size() != b.subsystems().size())
    throw DimensionError("fidelity: different subsystem structure");
  StateVector bb = b;
  std::vector<std::string> order;
  for (const auto& s : a.subsystems()) {
    order.push_back(s.label);
    if (b.dim_of(s.label) != s.dim)
      throw DimensionError("fidelity: dimension mismatch for " + s.label);
  }
  bb.reorder(order);
  const cplx ip = a.amplitudes().dot(bb.amplitudes());
  return std::min(1.0, std::abs(ip));
}

struct SchmidtDecomposition {
  Eigen::VectorXd coefficients;  // descending, Σλ² = 1
  Mat left_basis;                // columns |l_k>
  Mat right_basis;               // columns |r_k>
  std::vector<Subsystem> left_subs, right_subs;
};

/// Schmidt decomposition across the bipartition (left labels | rest).
/// ψ = Σ_k λ_k |l_k>|r_k> with the subsystem order (left..., rest...).
inline SchmidtDecomposition schmidt(const StateVector& psi,
                                    const std::vector<std::string>& left,
                                    bool want_bases = true) {
  if (left.empty())
    throw DimensionError("schmidt: left side of the cut is empty");
  StateVector work = psi;
  std::vector<std::string> order = left;
  for (const auto& s : psi.subsystems()) {
    if (std::find(left.begin(), left.end(), s.label) == left.end())
      order.push_back(s.label);
  }
  if (order.size() != psi.subsystems().size())
    throw LabelError("schmidt: cut labels are not a subset of the state");
  if (order.size() == left.size())
    throw DimensionError("schmidt: right side of the cut is empty");
  work.reorder(order);

  SchmidtDecomposition out;
  int dl = 1, dr = 1;
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& s = work.subsystems()[i];
    if (i < left.size()) {
      out.left_subs.push_back(s);
      dl *= s.dim;
    } else {
      out.right_subs.push_back(s);
      dr *= s.dim;
    }
  }
  // With (left major, right minor) ordering the amplitudes viewed
  // column-major form M^T, so map as (dr × dl) and transpose.
  Eigen::Map<const Mat> mt(work.amplitudes().data(), dr, dl);
  Mat m = mt.transpose();
  if (want_bases) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.coefficients = svd.singularValues();
    out.left_basis = svd.matrixU();
    out.right_basis = svd.matrixV().conjugate();
  } else if (std::min(dl, dr) > 32) {
    Eigen::BDCSVD<Mat> svd(m);
    out.coefficients = svd.singularValues();
  } else {
    Eigen::JacobiSVD<Mat> svd(m);
    out.coefficients = svd.singularValues();
  }
  return out;
}

struct KrausSet {
  std::vector<Mat> operators;

  int input_dim() const {
    return operators.empty() ? 0 : static_cast<int>(operators[0].cols());
  }

  double completeness_defect() const {
    if (operators.empty()) return 1.0;
    const int d = input_dim();
    Mat sum = Mat::Zero(d, d);
    for (const auto& k : operators) sum += k.adjoint() * k;
    return max_abs(sum - Mat::Identity(d, d));
  }
};

/// Computational-basis measurement that removes the measured subsystem.
inline KrausSet computational_basis_kraus(int d) {
  KrausSet ks;
  for (int m = 0; m < d; ++m) {
    Mat k = Mat::Zero(1, d);
    k(0, m) = 1.0;
    ks.operators.push_back(std::move(k));
  }
  return ks;
}

struct MeasureOutcome {
  int index = 0;
  double probability = 0.0;
  StateVector state;  // renormalized
};

inline constexpr double branch_prune_threshold = 1e-12;

/// Exhaustive expansion of a generalized measurement. Outcomes below the
/// pruning threshold are dropped and their mass reported.
inline std::vector<MeasureOutcome> measure_enumerate(
    const StateVector& psi, const KrausSet& kraus,
    const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs, double* pruned_mass = nullptr,
    double completeness_tol = 1e-9) {
  if (kraus.completeness_defect() > completeness_tol)
    throw CompletenessError("Kraus set is not complete");
  std::vector<MeasureOutcome> out;
  double pruned = 0.0;
  for (size_t i = 0; i < kraus.operators.size(); ++i) {
    StateVector post = psi.after_kraus(kraus.operators[i], inputs, outputs);
    const double p = post.norm() * post.norm();
    if (p < branch_prune_threshold) {
      pruned += p;
      continue;
    }
    post.normalize();
    out.push_back({static_cast<int>(i), p, std::move(post)});
  }
  if (pruned_mass) *pruned_mass = pruned;
  return out;
}

/// Samples one outcome by the Born rule.
inline MeasureOutcome measure_sample(const StateVector& psi,
                                     const KrausSet& kraus,
                                     const std::vector<std::string>& inputs,
                                     const std::vector<std::string>& outputs,
                                     RandomStream& rng,
                                     double completeness_tol = 1e-9) {
  if (kraus.completeness_defect() > completeness_tol)
    throw CompletenessError("Kraus set is not complete");
  std::vector<double> probs(kraus.operators.size());
  std::vector<StateVector> posts(kraus.operators.size());
  for (size_t i = 0; i < kraus.operators.size(); ++i) {
    posts[i] = psi.after_kraus(kraus.operators[i], inputs, outputs);
    probs[i] = posts[i].norm() * posts[i].norm();
  }
  const double u = rng.uniform();
  double acc = 0.0;
  size_t pick = probs.size() - 1;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  posts[pick].normalize();
  return {static_cast<int>(pick), probs[pick], std::move(posts[pick])};
}

}  // namespace lobc
