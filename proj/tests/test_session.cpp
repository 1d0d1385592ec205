#include "lobc/branch.hpp"
#include "lobc/session.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>

using namespace lobc;
using lobc::testing::chi_square_pvalue;
using lobc::testing::random_state;

namespace {

Session one_qubit_proto(const StateVector& source_state) {
  Session s;
  s.add_system(source_state, {{"q", Party::alice}});
  return s;
}

}  // namespace

TEST_CASE("ebit ledger") {
  Session s;
  SECTION("d=2 charges one ebit, d=4 charges two") {
    s.allocate_ebit(2, "a1", "b1");
    REQUIRE(s.ledger().allocated_ebits == 1.0);
    s.allocate_ebit(4, "a2", "b2");
    REQUIRE(s.ledger().allocated_ebits == 3.0);
    REQUIRE(s.ledger().touched_ebits == 0.0);
  }
  SECTION("fresh pair is maximally entangled") {
    s.allocate_ebit(3, "a1", "b1");
    auto sd = schmidt(s.state_of({"a1", "b1"}), {"a1"});
    for (int k = 0; k < 3; ++k)
      REQUIRE(sd.coefficients(k) ==
              Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-12));
  }
  SECTION("label collisions are rejected") {
    s.allocate_ebit(2, "a1", "b1");
    REQUIRE_THROWS_AS(s.allocate_ebit(2, "a1", "x"), LabelError);
  }
}

TEST_CASE("teleport* identity") {
  RandomStream rng(101);
  SECTION("receiver holds E_j times the source, all four outcomes, d=2") {
    for (int trial = 0; trial < 25; ++trial) {
      StateVector src = random_state({{"q", 2}}, rng);
      Session proto = one_qubit_proto(src);
      proto.allocate_ebit(2, "ea", "eb");
      Script script = [](Session& s) {
        s.as(Party::alice).teleport_star("q", "ea", "eb", "teleport*(q)");
      };
      int seen = 0;
      for_each_branch(proto, script, 16, [&](const Session& s, double p) {
        REQUIRE(p == Catch::Approx(0.25).margin(1e-12));
        const int j = s.transcript().events.at(0).outcome;
        StateVector received = s.state_of({"eb"});
        received.apply(dagger(teleport_error_op(2, j)), {"eb"});
        StateVector want({{"eb", 2}}, src.amplitudes());
        REQUIRE(fidelity_up_to_phase(received, want) >= 1.0 - 1e-10);
        ++seen;
      });
      REQUIRE(seen == 4);
    }
  }
  SECTION("rotated Bell basis errors are R σ_j R†") {
    Mat r = haar_random_unitary(2, rng);
    StateVector src = random_state({{"q", 2}}, rng);
    Session proto = one_qubit_proto(src);
    proto.allocate_ebit(2, "ea", "eb");
    Script script = [&](Session& s) {
      s.as(Party::alice).teleport_star("q", "ea", "eb", "teleport*", &r);
    };
    for_each_branch(proto, script, 16, [&](const Session& s, double) {
      const int j = s.transcript().events.at(0).outcome;
      StateVector received = s.state_of({"eb"});
      const Mat ej = teleport_error_op(2, j, &r);
      const Mat expect_err = r * gates::sigma(j) * r.adjoint();
      REQUIRE(max_abs(ej - expect_err) < 1e-12);
      received.apply(dagger(ej), {"eb"});
      StateVector want({{"eb", 2}}, src.amplitudes());
      REQUIRE(fidelity_up_to_phase(received, want) >= 1.0 - 1e-10);
    });
  }
  SECTION("qudit teleport with the Weyl basis, d=3") {
    StateVector src = random_state({{"q", 3}}, rng);
    Session proto = one_qubit_proto(src);
    proto.allocate_ebit(3, "ea", "eb");
    Script script = [](Session& s) {
      s.as(Party::alice).teleport_star("q", "ea", "eb", "teleport*");
    };
    int seen = 0;
    for_each_branch(proto, script, 16, [&](const Session& s, double p) {
      REQUIRE(p == Catch::Approx(1.0 / 9.0).margin(1e-12));
      const int j = s.transcript().events.at(0).outcome;
      StateVector received = s.state_of({"eb"});
      received.apply(dagger(teleport_error_op(3, j)), {"eb"});
      StateVector want({{"eb", 3}}, src.amplitudes());
      REQUIRE(fidelity_up_to_phase(received, want) >= 1.0 - 1e-10);
      ++seen;
    });
    REQUIRE(seen == 9);
    REQUIRE(proto.ledger().allocated_ebits ==
            Catch::Approx(std::log2(3.0)).margin(1e-12));
  }
  SECTION("teleport* of |0> with outcome σ_x leaves |1> at the receiver") {
    Session proto =
        one_qubit_proto(StateVector::basis_state({{"q", 2}}, {0}));
    proto.allocate_ebit(2, "ea", "eb");
    Script script = [](Session& s) {
      s.as(Party::alice).teleport_star("q", "ea", "eb", "teleport*");
    };
    bool checked = false;
    for_each_branch(proto, script, 16, [&](const Session& s, double) {
      if (s.transcript().events.at(0).outcome != 1) return;
      StateVector received = s.state_of({"eb"});
      StateVector one = StateVector::basis_state({{"eb", 2}}, {1});
      REQUIRE(fidelity_up_to_phase(received, one) >= 1.0 - 1e-12);
      checked = true;
    });
    REQUIRE(checked);
  }
  SECTION("touched ebits accrue per teleport") {
    Session proto =
        one_qubit_proto(StateVector::basis_state({{"q", 2}}, {0}));
    proto.allocate_ebit(2, "ea", "eb");
    Session s = sample_trajectory(
        proto,
        [](Session& ses) {
          ses.as(Party::alice).teleport_star("q", "ea", "eb", "t");
        },
        RandomStream(7));
    REQUIRE(s.ledger().touched_ebits == 1.0);
    REQUIRE(s.ledger().allocated_ebits == 1.0);
  }
}

TEST_CASE("locality enforcement") {
  Session proto;
  proto.add_system(StateVector::basis_state({{"qa", 2}, {"qb", 2}}, {0, 0}),
                   {{"qa", Party::alice}, {"qb", Party::bob}});

  SECTION("reading the other record before broadcast is a hard error") {
    Script malformed = [](Session& s) {
      auto alice = s.as(Party::alice);
      alice.measure_computational("qa", "alice measures");
      // Bob conditions on Alice's record: forbidden pre-broadcast.
      auto bob = s.as(Party::bob);
      if (!bob.record_of(Party::alice).empty() &&
          bob.record_of(Party::alice)[0].outcome == 1)
        bob.apply(gates::sigma(1), {"qb"});
    };
    Session s = proto;
    SamplingSource src{RandomStream(1)};
    s.set_outcome_source(&src);
    REQUIRE_THROWS_AS(malformed(s), LocalityError);
  }
  SECTION("own-record conditioning is allowed") {
    Script fine = [](Session& s) {
      auto alice = s.as(Party::alice);
      alice.measure_computational("qa", "alice measures");
      if (alice.record()[0].outcome == 0)
        s.as(Party::bob).apply(gates::identity(2), {"qb"});
    };
    Session s = proto;
    SamplingSource src{RandomStream(1)};
    s.set_outcome_source(&src);
    REQUIRE_NOTHROW(fine(s));
  }
  SECTION("interactive sessions may cross-reference records") {
    Session s(CommunicationMode::interactive);
    s.add_system(StateVector::basis_state({{"qa", 2}, {"qb", 2}}, {0, 0}),
                 {{"qa", Party::alice}, {"qb", Party::bob}});
    SamplingSource src{RandomStream(1)};
    s.set_outcome_source(&src);
    s.as(Party::alice).measure_computational("qa", "alice measures");
    REQUIRE_NOTHROW(s.as(Party::bob).record_of(Party::alice));
  }
  SECTION("records become public after broadcast") {
    Session s = proto;
    SamplingSource src{RandomStream(1)};
    s.set_outcome_source(&src);
    s.as(Party::alice).measure_computational("qa", "alice measures");
    s.broadcast_and_correct({});
    REQUIRE_NOTHROW(s.as(Party::bob).record_of(Party::alice));
  }
  SECTION("acting on the other party's subsystem is rejected") {
    Session s = proto;
    SamplingSource src{RandomStream(1)};
    s.set_outcome_source(&src);
    REQUIRE_THROWS_AS(s.as(Party::alice).apply(gates::sigma(1), {"qb"}),
                      OwnershipError);
  }
}

TEST_CASE("broadcast") {
  Session proto;
  proto.add_system(StateVector::basis_state({{"qa", 2}, {"qb", 2}}, {0, 0}),
                   {{"qa", Party::alice}, {"qb", Party::bob}});
  Session s = proto;
  SamplingSource src{RandomStream(3)};
  s.set_outcome_source(&src);
  s.as(Party::alice).measure_computational("qa", "m1");

  SECTION("cbits are charged at broadcast time only") {
    REQUIRE(s.ledger().cbits_broadcast == 0);
    s.broadcast_and_correct({});
    REQUIRE(s.ledger().cbits_broadcast == 1);
  }
  SECTION("broadcast happens at most once") {
    s.broadcast_and_correct({});
    REQUIRE_THROWS_AS(s.broadcast_and_correct({}), BroadcastError);
  }
  SECTION("no operations after the broadcast") {
    s.broadcast_and_correct({});
    REQUIRE_THROWS_AS(s.as(Party::bob).apply(gates::sigma(1), {"qb"}),
                      BroadcastError);
  }
  SECTION("corrections are applied per party") {
    s.broadcast_and_correct([](const Session& ses) {
      std::vector<Session::Correction> cs;
      cs.push_back({Party::bob, gates::sigma(1), {"qb"}});
      (void)ses;
      return cs;
    });
    StateVector qb = s.state_of({"qb"});
    REQUIRE(fidelity_up_to_phase(
                qb, StateVector::basis_state({{"qb", 2}}, {1})) >=
            1.0 - 1e-12);
  }
}

TEST_CASE("branch enumeration") {
  RandomStream rng(202);
  StateVector joint = random_state({{"qa", 2}, {"qb", 2}}, rng);
  Session proto;
  proto.add_system(joint, {{"qa", Party::alice}, {"qb", Party::bob}});
  Script script = [](Session& s) {
    s.as(Party::alice).measure_computational("qa", "alice");
    s.as(Party::bob).measure_computational("qb", "bob");
  };

  SECTION("probabilities sum to one and match transcripts") {
    BranchSet bs = enumerate_branches(proto, script);
    REQUIRE(bs.branches.size() == 4);
    REQUIRE(bs.total_probability() == Catch::Approx(1.0).margin(1e-9));
    for (const auto& b : bs.branches)
      REQUIRE(b.probability ==
              Catch::Approx(b.transcript.probability()).margin(1e-9));
  }
  SECTION("overflow guard throws") {
    REQUIRE_THROWS_AS(enumerate_branches(proto, script, 3),
                      EnumerationOverflow);
  }
  SECTION("deterministic outcomes are pruned, not enumerated") {
    Session p2;
    p2.add_system(StateVector::basis_state({{"q", 2}}, {1}),
                  {{"q", Party::alice}});
    Script sc = [](Session& s) {
      s.as(Party::alice).measure_computational("q", "m");
    };
    BranchSet bs = enumerate_branches(p2, sc);
    REQUIRE(bs.branches.size() == 1);
    REQUIRE(bs.branches[0].transcript.events[0].outcome == 1);
    REQUIRE(bs.pruned_mass < 1e-12);
  }
  SECTION("sampling matches enumeration (chi-square)") {
    BranchSet bs = enumerate_branches(proto, script);
    std::map<std::pair<int, int>, double> expect;
    for (const auto& b : bs.branches)
      expect[{b.transcript.events[0].outcome,
              b.transcript.events[1].outcome}] = b.probability;
    std::map<std::pair<int, int>, int> counts;
    const int n = 100000;
    RandomStream seeds(404);
    for (int t = 0; t < n; ++t) {
      Session s = sample_trajectory(proto, script, seeds.substream(t));
      counts[{s.transcript().events[0].outcome,
              s.transcript().events[1].outcome}]++;
    }
    double stat = 0;
    for (const auto& [k, p] : expect) {
      const double e = p * n;
      const double o = counts[k];
      stat += (o - e) * (o - e) / e;
    }
    const double pval =
        chi_square_pvalue(stat, static_cast<int>(expect.size()) - 1);
    REQUIRE(pval > 0.001);
  }
  SECTION("fixed seed gives identical transcripts") {
    Session a = sample_trajectory(proto, script, RandomStream(5));
    Session b = sample_trajectory(proto, script, RandomStream(5));
    REQUIRE(a.transcript().events.size() == b.transcript().events.size());
    for (size_t i = 0; i < a.transcript().events.size(); ++i) {
      REQUIRE(a.transcript().events[i].outcome ==
              b.transcript().events[i].outcome);
      REQUIRE(a.transcript().events[i].probability ==
              b.transcript().events[i].probability);
    }
  }
}

TEST_CASE("gamma_q sanity anchors") {
  // chi-square(1) at x=1: p = erfc(1/sqrt2) ≈ 0.317311
  REQUIRE(chi_square_pvalue(1.0, 1) == Catch::Approx(0.3173105).margin(1e-6));
  // chi-square(2) at x=2: p = e^{-1} ≈ 0.367879
  REQUIRE(chi_square_pvalue(2.0, 2) ==
          Catch::Approx(std::exp(-1.0)).margin(1e-9));
  // chi-square(10) at x=25: p ≈ 0.0053455 (tail)
  REQUIRE(chi_square_pvalue(25.0, 10) ==
          Catch::Approx(0.005345505487).margin(1e-9));
}
