#pragma once

// Exhaustive branch enumeration and Monte Carlo trajectories over protocol
// scripts. A script is ordinary imperative code over a Session; enumeration
// re-runs it depth-first with a replaying outcome source, so scripts stay
// free of enumeration concerns.

#include "lobc/session.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace lobc {

struct EnumerationOverflow : Error {
  using Error::Error;
};

using Script = std::function<void(Session&)>;

class ReplaySource final : public OutcomeSource {
 public:
  explicit ReplaySource(std::vector<int> forced) : forced_(std::move(forced)) {}

  int pick(const std::vector<double>& probs) override {
    int choice = -1;
    if (depth_ < forced_.size()) {
      choice = forced_[depth_];
    } else {
      for (size_t i = 0; i < probs.size(); ++i)
        if (probs[i] >= branch_prune_threshold) {
          choice = static_cast<int>(i);
          break;
        }
      if (choice < 0) throw Error("measurement with no outcome above threshold");
    }
    fork_probs_.push_back(probs);
    chosen_.push_back(choice);
    path_prob_ *= probs[static_cast<size_t>(choice)];
    ++depth_;
    return choice;
  }

  const std::vector<int>& chosen() const { return chosen_; }
  const std::vector<std::vector<double>>& fork_probs() const {
    return fork_probs_;
  }
  double path_probability() const { return path_prob_; }

 private:
  std::vector<int> forced_;
  std::vector<int> chosen_;
  std::vector<std::vector<double>> fork_probs_;
  size_t depth_ = 0;
  double path_prob_ = 1.0;
};

struct BranchStats {
  long branch_count = 0;
  double pruned_mass = 0.0;
};

/// Depth-first expansion of every measurement outcome. The visitor receives
/// the completed session and the branch probability; throws
/// EnumerationOverflow past max_branches.
template <typename Visitor>
BranchStats for_each_branch(const Session& prototype, const Script& script,
                            long max_branches, Visitor&& visit) {
  BranchStats stats;
  std::vector<int> word;
  for (;;) {
    Session s = prototype;
    ReplaySource src(word);
    s.set_outcome_source(&src);
    script(s);
    s.set_outcome_source(nullptr);

    const auto& chosen = src.chosen();
    const auto& forks = src.fork_probs();
    double path = 1.0;
    for (size_t d = 0; d < forks.size(); ++d) {
      if (d >= word.size()) {
        for (double q : forks[d])
          if (q < branch_prune_threshold) stats.pruned_mass += path * q;
      }
      path *= forks[d][static_cast<size_t>(chosen[d])];
    }

    if (++stats.branch_count > max_branches)
      throw EnumerationOverflow("branch count exceeds max_branches");
    visit(s, src.path_probability());

    word.assign(chosen.begin(), chosen.end());
    bool advanced = false;
    while (!word.empty()) {
      const auto& probs = forks[word.size() - 1];
      int next = -1;
      for (size_t i = static_cast<size_t>(word.back()) + 1; i < probs.size();
           ++i)
        if (probs[i] >= branch_prune_threshold) {
          next = static_cast<int>(i);
          break;
        }
      if (next >= 0) {
        word.back() = next;
        advanced = true;
        break;
      }
      word.pop_back();
    }
    if (!advanced) break;
  }
  return stats;
}

struct Branch {
  double probability = 0.0;
  StateVector state;
  Transcript transcript;
};

struct BranchSet {
  std::vector<Branch> branches;
  double pruned_mass = 0.0;

  double total_probability() const {
    double p = pruned_mass;
    for (const auto& b : branches) p += b.probability;
    return p;
  }
};

inline BranchSet enumerate_branches(const Session& prototype,
                                    const Script& script,
                                    long max_branches = 1 << 20) {
  BranchSet out;
  BranchStats stats =
      for_each_branch(prototype, script, max_branches,
                      [&](const Session& s, double prob) {
                        out.branches.push_back(
                            {prob, s.full_state(), s.transcript()});
                      });
  out.pruned_mass = stats.pruned_mass;
  return out;
}

/// One Born-rule trajectory; deterministic for a fixed stream.
inline Session sample_trajectory(const Session& prototype,
                                 const Script& script, RandomStream rng) {
  Session s = prototype;
  SamplingSource src(rng);
  s.set_outcome_source(&src);
  script(s);
  s.set_outcome_source(nullptr);
  return s;
}

}  // namespace lobc
