#pragma once

// Two-party protocol execution: named subsystems with per-party ownership,
// private measurement records, an ebit/cbit ledger and a single broadcast.
// The state is kept as a set of product fragments that merge on demand, so
// long protocols never materialize one huge vector.
//
// Locality is enforced structurally: before the broadcast, a party handle
// can only read its own record; touching the other record throws. The LOCC
// baseline opts out via CommunicationMode::interactive and is flagged as
// such in reports.

#include "lobc/matrix.hpp"
#include "lobc/state.hpp"

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace lobc {

struct LocalityError : Error {
  using Error::Error;
};
struct OwnershipError : Error {
  using Error::Error;
};
struct BroadcastError : Error {
  using Error::Error;
};

enum class Party { alice = 0, bob = 1 };

inline Party other(Party p) {
  return p == Party::alice ? Party::bob : Party::alice;
}

inline const char* party_name(Party p) {
  return p == Party::alice ? "alice" : "bob";
}

struct Event {
  Party party = Party::alice;
  std::string label;
  int outcome = 0;
  int arity = 1;
  double probability = 1.0;
};

struct Transcript {
  std::vector<Event> events;  // chronological, both parties interleaved
  std::map<std::string, int> halting_rounds;
  bool success = true;
  double final_fidelity = 0.0;

  double probability() const {
    double p = 1.0;
    for (const auto& e : events) p *= e.probability;
    return p;
  }
};

struct EbitLedger {
  double allocated_ebits = 0.0;
  double touched_ebits = 0.0;
  int cbits_broadcast = 0;
};

/// log2(d) with exact integer results for powers of two, so ledger sums of
/// qubit protocols are whole-number exact.
inline double ebits_for_dim(int d) {
  if (d < 1) throw DimensionError("ebits_for_dim: d must be >= 1");
  if ((d & (d - 1)) == 0) {
    int l = 0;
    while ((1 << l) < d) ++l;
    return static_cast<double>(l);
  }
  return std::log2(static_cast<double>(d));
}

inline int bits_for_arity(int arity) {
  int b = 0;
  while ((1 << b) < arity) ++b;
  return b;
}

/// The one place outcomes are drawn. Sampling draws by the Born rule;
/// the branch enumerator substitutes a replaying source.
class OutcomeSource {
 public:
  virtual ~OutcomeSource() = default;
  virtual int pick(const std::vector<double>& probabilities) = 0;
};

class SamplingSource final : public OutcomeSource {
 public:
  explicit SamplingSource(RandomStream rng) : rng_(rng) {}
  int pick(const std::vector<double>& probs) override {
    const double u = rng_.uniform();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  RandomStream rng_;
};

/// Kraus set for a (rotated) Bell-basis measurement on a d⊗d pair.
/// d = 2 uses the Pauli basis {(Rσ_jR†⊗I)|Φ+>}, general d the Weyl basis
/// {(X^mZ^n⊗I)|Φ+_d>} with j = m·d + n. The receiver ends up holding
/// teleport_error_op(d, j, R) applied to the source state.
inline KrausSet teleport_kraus(int d, const Mat* rotation = nullptr) {
  KrausSet ks;
  const int n = d * d;
  for (int j = 0; j < n; ++j) {
    Mat w;
    if (d == 2) {
      w = gates::sigma(j);
      if (rotation) w = (*rotation) * w * rotation->adjoint();
    } else {
      if (rotation)
        throw DimensionError("rotated teleport basis is qubit-only");
      w = gates::weyl(d, j / d, j % d);
    }
    Vec b = Vec::Zero(n);
    for (int k = 0; k < d; ++k)
      for (int r = 0; r < d; ++r) b(r * d + k) += w(r, k) / std::sqrt(double(d));
    ks.operators.push_back(b.adjoint());
  }
  return ks;
}

inline Mat teleport_error_op(int d, int j, const Mat* rotation = nullptr) {
  if (d == 2) {
    Mat w = gates::sigma(j);
    if (rotation) w = (*rotation) * w * rotation->adjoint();
    return w.adjoint();
  }
  return gates::weyl(d, j / d, j % d).adjoint();
}

enum class CommunicationMode { broadcast_only, interactive };

class Session {
 public:
  explicit Session(CommunicationMode mode = CommunicationMode::broadcast_only)
      : mode_(mode) {}

  void set_outcome_source(OutcomeSource* src) { source_ = src; }
  CommunicationMode mode() const { return mode_; }
  bool interactive() const { return mode_ == CommunicationMode::interactive; }

  /// Registers an input state; every subsystem label gets an owner.
  void add_system(StateVector sv,
                  const std::vector<std::pair<std::string, Party>>& owners) {
    for (const auto& s : sv.subsystems()) {
      bool assigned = false;
      for (const auto& [label, p] : owners)
        if (label == s.label) {
          register_subsystem(label, s.dim, p);
          assigned = true;
        }
      if (!assigned)
        throw OwnershipError("no owner assigned for subsystem " + s.label);
    }
    fragments_.push_back(std::move(sv));
    relink(fragments_.size() - 1);
  }

  /// Tensors in a fresh maximally entangled d⊗d pair and charges the ledger.
  void allocate_ebit(int d, const std::string& alice_half,
                     const std::string& bob_half) {
    register_subsystem(alice_half, d, Party::alice);
    register_subsystem(bob_half, d, Party::bob);
    fragments_.push_back(
        StateVector::maximally_entangled(d, alice_half, bob_half));
    relink(fragments_.size() - 1);
    ledger_.allocated_ebits += ebits_for_dim(d);
  }

  Party owner(const std::string& label) const { return info(label).owner; }
  bool alive(const std::string& label) const {
    auto it = live_.find(label);
    return it != live_.end();
  }

  const EbitLedger& ledger() const { return ledger_; }
  Transcript& transcript() { return transcript_; }
  const Transcript& transcript() const { return transcript_; }
  bool broadcast_done() const { return broadcast_done_; }
  cplx accumulated_phase() const { return phase_; }

  const std::vector<Event>& record(Party whose, Party asking) const {
    if (whose != asking && !broadcast_done_ && !interactive())
      throw LocalityError(std::string("party ") + party_name(asking) +
                          " read " + party_name(whose) +
                          "'s record before broadcast");
    return records_[static_cast<int>(whose)];
  }

  /// Party-scoped operations; the handle is the locality boundary.
  class Handle {
   public:
    Handle(Session& s, Party p) : s_(&s), p_(p) {}

    Party party() const { return p_; }
    const std::vector<Event>& record() const { return s_->record(p_, p_); }
    const std::vector<Event>& record_of(Party whose) const {
      return s_->record(whose, p_);
    }

    void apply(const Mat& u, const std::vector<std::string>& targets) {
      s_->check_open();
      s_->check_owned(p_, targets);
      s_->fragments_[static_cast<size_t>(s_->fragment_for(targets))].apply(
          u, targets);
    }

    void apply_diagonal(const Vec& d, const std::vector<std::string>& targets) {
      s_->check_open();
      s_->check_owned(p_, targets);
      s_->fragments_[static_cast<size_t>(s_->fragment_for(targets))]
          .apply_diagonal(d, targets);
    }

    int measure(const KrausSet& ks, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs,
                const std::string& label) {
      s_->check_open();
      s_->check_owned(p_, inputs);
      return s_->do_measure(p_, ks, inputs, outputs, label);
    }

    int measure_computational(const std::string& target,
                              const std::string& label) {
      const int d = s_->info(target).dim;
      return measure(computational_basis_kraus(d), {target}, {}, label);
    }

    /// Teleportation*: Bell measurement on (source, own ebit half) with no
    /// message and no correction. The partner half is left holding
    /// teleport_error_op(d, outcome) applied to the source state.
    int teleport_star(const std::string& source, const std::string& own_half,
                      const std::string& partner_half,
                      const std::string& label,
                      const Mat* rotation = nullptr) {
      s_->check_open();
      s_->check_owned(p_, {source, own_half});
      if (s_->owner(partner_half) != other(p_))
        throw OwnershipError("teleport*: partner half " + partner_half +
                             " is not held by the other party");
      const int d = s_->info(source).dim;
      if (s_->info(own_half).dim != d || s_->info(partner_half).dim != d)
        throw DimensionError("teleport*: source and ebit dimensions differ");
      const int out =
          s_->do_measure(p_, teleport_kraus(d, rotation), {source, own_half},
                         {}, label);
      s_->ledger_.touched_ebits += ebits_for_dim(d);
      return out;
    }

   private:
    Session* s_;
    Party p_;
  };

  Handle as(Party p) { return Handle(*this, p); }

  struct Correction {
    Party party;
    Mat op;
    std::vector<std::string> targets;
  };
  using CorrectionRule = std::function<std::vector<Correction>(const Session&)>;

  /// The single broadcast: every recorded outcome bit is charged to the
  /// ledger, then the rule's strictly-local corrections are applied.
  void broadcast_and_correct(const CorrectionRule& rule) {
    if (broadcast_done_)
      throw BroadcastError("broadcast_and_correct may be called once");
    broadcast_done_ = true;
    for (const auto& e : transcript_.events)
      ledger_.cbits_broadcast += bits_for_arity(e.arity);
    if (!rule) return;
    for (const auto& c : rule(*this)) {
      check_owned(c.party, c.targets);
      fragments_[static_cast<size_t>(fragment_for(c.targets))].apply(
          c.op, c.targets);
    }
  }

  /// The fragment holding `labels`, reordered to start with them; throws if
  /// they are not yet in one fragment or the fragment carries extras and
  /// exact = true.
  StateVector state_of(const std::vector<std::string>& labels,
                       bool exact = true) const {
    if (labels.empty()) throw LabelError("state_of: no labels");
    const int fi = info(labels[0]).fragment;
    StateVector frag = fragments_[fi];
    for (const auto& l : labels)
      if (info(l).fragment != fi)
        throw LabelError("state_of: labels span fragments");
    if (exact && frag.subsystems().size() != labels.size())
      throw LabelError("state_of: fragment carries extra subsystems");
    std::vector<std::string> order = labels;
    for (const auto& s : frag.subsystems())
      if (std::find(labels.begin(), labels.end(), s.label) == labels.end())
        order.push_back(s.label);
    frag.reorder(order);
    return frag;
  }

  /// Tensor of all live fragments (diagnostics; exponential in total size).
  StateVector full_state() const {
    StateVector all;
    for (const auto& f : fragments_)
      if (!f.empty()) all = all.tensor(f);
    return all;
  }

  std::vector<std::string> live_labels() const {
    std::vector<std::string> out;
    for (const auto& [label, info] : live_) out.push_back(label);
    return out;
  }

 private:
  struct SubInfo {
    int fragment = -1;
    int dim = 0;
    Party owner = Party::alice;
  };

  CommunicationMode mode_;
  std::vector<StateVector> fragments_;  // empty slots are retired
  std::unordered_map<std::string, SubInfo> live_;
  std::array<std::vector<Event>, 2> records_;
  Transcript transcript_;
  EbitLedger ledger_;
  OutcomeSource* source_ = nullptr;
  bool broadcast_done_ = false;
  cplx phase_{1.0, 0.0};

  const SubInfo& info(const std::string& label) const {
    auto it = live_.find(label);
    if (it == live_.end())
      throw LabelError("unknown or consumed subsystem: " + label);
    return it->second;
  }

  void register_subsystem(const std::string& label, int dim, Party owner) {
    if (live_.count(label))
      throw LabelError("subsystem label collision: " + label);
    live_[label] = SubInfo{-1, dim, owner};
  }

  void relink(size_t fragment_index) {
    for (const auto& s : fragments_[fragment_index].subsystems())
      live_[s.label].fragment = static_cast<int>(fragment_index);
  }

  void check_open() const {
    if (broadcast_done_)
      throw BroadcastError("no operations after the broadcast");
  }

  void check_owned(Party p, const std::vector<std::string>& labels) const {
    for (const auto& l : labels)
      if (info(l).owner != p)
        throw OwnershipError(std::string(party_name(p)) +
                             " does not own subsystem " + l);
  }

  /// Merges fragments until all labels share one; returns its index.
  int fragment_for(const std::vector<std::string>& labels) {
    const int target = info(labels[0]).fragment;
    for (const auto& l : labels) {
      const int fi = info(l).fragment;
      if (fi == target) continue;
      fragments_[target] = fragments_[target].tensor(fragments_[fi]);
      fragments_[fi] = StateVector();
      relink(target);
    }
    return target;
  }

  int do_measure(Party p, const KrausSet& ks,
                 const std::vector<std::string>& inputs,
                 const std::vector<std::string>& outputs,
                 const std::string& label) {
    if (!source_) throw Error("session has no outcome source");
    if (ks.completeness_defect() > 1e-9)
      throw CompletenessError("Kraus set is not complete");
    const int fi = fragment_for(inputs);
    const StateVector& frag = fragments_[static_cast<size_t>(fi)];
    std::vector<StateVector> posts;
    std::vector<double> probs;
    posts.reserve(ks.operators.size());
    for (const auto& k : ks.operators) {
      posts.push_back(frag.after_kraus(k, inputs, outputs));
      const double n = posts.back().norm();
      probs.push_back(n * n);
    }
    const int outcome = source_->pick(probs);
    StateVector post = std::move(posts[static_cast<size_t>(outcome)]);
    post.normalize();
    for (const auto& in : inputs)
      if (std::find(outputs.begin(), outputs.end(), in) == outputs.end())
        live_.erase(in);
    if (post.empty()) {
      phase_ *= post.amplitudes()(0);
      fragments_[static_cast<size_t>(fi)] = StateVector();
    } else {
      fragments_[static_cast<size_t>(fi)] = std::move(post);
      relink(static_cast<size_t>(fi));
    }
    Event e{p, label, outcome, static_cast<int>(ks.operators.size()),
            probs[static_cast<size_t>(outcome)]};
    records_[static_cast<int>(p)].push_back(e);
    transcript_.events.push_back(std::move(e));
    return outcome;
  }
};

}  // namespace lobc
