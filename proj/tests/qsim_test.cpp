#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"
#include "qv/qsim/circuit.hpp"
#include "qv/qsim/state_vector.hpp"
#include "oracles.hpp"

using namespace qv;
using namespace qv::qsim;

namespace {

constexpr double kPi = std::numbers::pi;

using oracle::dense_expectations;
using oracle::dense_final_state;
using oracle::DenseMatrix;
using oracle::random_angles;

}  // namespace

TEST(StateVectorTest, GroundState) {
  auto s1 = init_ground(1);
  ASSERT_EQ(s1.dimension(), 2u);
  EXPECT_EQ(s1.amplitudes()[0], Complex(1.0, 0.0));
  EXPECT_EQ(s1.amplitudes()[1], Complex(0.0, 0.0));

  auto s2 = init_ground(2);
  ASSERT_EQ(s2.dimension(), 4u);
  EXPECT_EQ(s2.amplitudes()[0], Complex(1.0, 0.0));
  for (int i = 1; i < 4; ++i) EXPECT_EQ(s2.amplitudes()[i], Complex(0.0, 0.0));

  auto s4 = init_ground(4);
  EXPECT_EQ(s4.dimension(), 16u);
  EXPECT_DOUBLE_EQ(s4.norm(), 1.0);
}

TEST(StateVectorTest, QubitCountRange) {
  EXPECT_THROW(init_ground(0), ConfigError);
  EXPECT_THROW(init_ground(17), ConfigError);
  EXPECT_NO_THROW(init_ground(16));
}

TEST(StateVectorTest, RyRotations) {
  auto flipped = apply_gate(init_ground(1), Gate::ry(0, kPi));
  EXPECT_NEAR(flipped.amplitudes()[0].real(), 0.0, 1e-15);
  EXPECT_NEAR(flipped.amplitudes()[1].real(), 1.0, 1e-15);

  auto same = apply_gate(init_ground(1), Gate::ry(0, 0.0));
  EXPECT_EQ(same.amplitudes()[0], Complex(1.0, 0.0));
  EXPECT_EQ(same.amplitudes()[1], Complex(0.0, 0.0));
}

TEST(StateVectorTest, CnotTruthTable) {
  // |10>: qubit 0 set, qubit 1 clear -> basis index 1.
  auto s = apply_gate(init_ground(2), Gate::ry(0, kPi));
  s = apply_gate(std::move(s), Gate::cnot(0, 1));
  EXPECT_NEAR(std::abs(s.amplitudes()[3]), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitudes()[1]), 0.0, 1e-15);

  // Control clear: nothing happens.
  auto t = apply_gate(init_ground(2), Gate::cnot(0, 1));
  EXPECT_EQ(t.amplitudes()[0], Complex(1.0, 0.0));
}

TEST(StateVectorTest, ExpectationZ) {
  EXPECT_DOUBLE_EQ(expectation_z(init_ground(1), 0), 1.0);
  EXPECT_NEAR(expectation_z(apply_gate(init_ground(1), Gate::ry(0, kPi)), 0), -1.0, 1e-12);
  EXPECT_NEAR(expectation_z(apply_gate(init_ground(1), Gate::ry(0, kPi / 2)), 0), 0.0, 1e-12);
}

TEST(StateVectorTest, InvalidTargets) {
  auto s = init_ground(2);
  EXPECT_THROW(s.apply(Gate::ry(2, 0.1)), StructuralError);
  EXPECT_THROW(s.apply(Gate::cnot(1, 1)), StructuralError);
  EXPECT_THROW(s.apply(Gate::cz(-1, 0)), StructuralError);
  EXPECT_THROW(s.expectation_z(5), StructuralError);
}

TEST(GateTest, EveryGateIsUnitary) {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double angle = rng.uniform(-4 * kPi, 4 * kPi);
    for (const Gate& g : {Gate::ry(0, angle), Gate::rx(0, angle), Gate::rz(0, angle),
                          Gate::cnot(0, 1), Gate::cz(0, 1)}) {
      const auto m = g.matrix();
      const int d = g.arity() == 1 ? 2 : 4;
      DenseMatrix u(d, d);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) u(r, c) = m[r * d + c];
      const DenseMatrix defect = u * u.adjoint() - DenseMatrix::Identity(d, d);
      EXPECT_LT(defect.cwiseAbs().maxCoeff(), 1e-12) << to_string(g.kind);
    }
  }
}

TEST(RandomLayersTest, Deterministic) {
  EXPECT_EQ(generate_random_layers(4, 4, 99), generate_random_layers(4, 4, 99));
  EXPECT_NE(generate_random_layers(4, 4, 99), generate_random_layers(4, 4, 100));
  EXPECT_TRUE(generate_random_layers(4, 0, 99).empty());
}

TEST(RandomLayersTest, LayerConstruction) {
  const auto two = generate_random_layers(2, 1, 5);
  ASSERT_EQ(two.size(), 1u);
  int rotations = 0;
  int cnots = 0;
  for (const auto& g : two[0]) {
    if (g.is_rotation()) ++rotations;
    if (g.kind == GateKind::kCNOT) ++cnots;
  }
  EXPECT_EQ(rotations, 2);
  EXPECT_EQ(cnots, 2);

  const auto one = generate_random_layers(1, 3, 5);
  for (const auto& layer : one) EXPECT_EQ(layer.size(), 1u);

  const auto four = generate_random_layers(4, 4, 5);
  ASSERT_EQ(four.size(), 4u);
  for (const auto& layer : four) {
    ASSERT_EQ(layer.size(), 8u);
    for (int q = 0; q < 4; ++q) {
      EXPECT_EQ(layer[4 + q].targets[0], q);
      EXPECT_EQ(layer[4 + q].targets[1], (q + 1) % 4);
      EXPECT_GE(layer[q].angle, 0.0);
      EXPECT_LT(layer[q].angle, 2 * kPi);
    }
  }
}

TEST(RunCircuitTest, ZeroLayersGiveCosine) {
  for (double p : {0.0, 0.1, 0.25, 0.5, 0.77, 1.0}) {
    const auto spec = CircuitSpec::random(1, 0, 3);
    const double angle = kPi * p;
    const auto z = run_circuit(spec, std::span(&angle, 1));
    ASSERT_EQ(z.size(), 1u);
    EXPECT_NEAR(z[0], std::cos(kPi * p), 1e-12);
  }
  const auto spec4 = CircuitSpec::random(4, 0, 3);
  const std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(run_circuit(spec4, zeros), std::vector<double>(4, 1.0));
}

TEST(RunCircuitTest, AngleCountMismatch) {
  const auto spec = CircuitSpec::random(4, 1, 3);
  const std::vector<double> three(3, 0.0);
  EXPECT_THROW(run_circuit(spec, three), StructuralError);
  CircuitRunner runner(spec);
  EXPECT_THROW(runner.run(three), StructuralError);
}

TEST(RunCircuitTest, MatchesDenseUnitaryOracle) {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int layers = static_cast<int>(rng.below(5));
    const auto spec = CircuitSpec::random(n, layers, rng.next());
    const auto angles = random_angles(rng, n);
    const auto psi = dense_final_state(spec, angles);
    const auto expected = dense_expectations(psi, n);
    const auto got = run_circuit(spec, angles);
    CircuitRunner runner(spec);
    const auto fast = runner.run(angles);
    for (int q = 0; q < n; ++q) {
      EXPECT_NEAR(got[q], expected[q], 1e-10);
      EXPECT_NEAR(fast[q], expected[q], 1e-10);
      EXPECT_LE(std::abs(got[q]), 1.0 + 1e-12);
    }
  }
}

TEST(RunCircuitTest, RunnerHandlesCzAndMixedGates) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(4));
    CircuitSpec spec;
    spec.n_qubits = n;
    for (int q = 0; q < n; ++q) spec.measured_qubits.push_back(q);
    for (int l = 0; l < 3; ++l) {
      Layer layer;
      for (int g = 0; g < 6; ++g) {
        const int a = static_cast<int>(rng.below(n));
        int b = static_cast<int>(rng.below(n - 1));
        if (b >= a) ++b;
        switch (rng.below(5)) {
          case 0: layer.push_back(Gate::rx(a, rng.uniform(0, 6))); break;
          case 1: layer.push_back(Gate::ry(a, rng.uniform(0, 6))); break;
          case 2: layer.push_back(Gate::rz(a, rng.uniform(0, 6))); break;
          case 3: layer.push_back(Gate::cnot(a, b)); break;
          default: layer.push_back(Gate::cz(a, b)); break;
        }
      }
      spec.random_layers.push_back(layer);
    }
    const auto angles = random_angles(rng, n);
    const auto expected = dense_expectations(dense_final_state(spec, angles), n);
    CircuitRunner runner(spec);
    const auto fast = runner.run(angles);
    for (int q = 0; q < n; ++q) EXPECT_NEAR(fast[q], expected[q], 1e-10);
  }
}

TEST(RunCircuitTest, NormPreservedOnSixteenQubits) {
  SplitMix64 rng(1);
  const auto spec = CircuitSpec::random(16, 2, 77);
  auto state = init_ground(16);
  const auto angles = random_angles(rng, 16);
  for (int q = 0; q < 16; ++q) {
    state.apply(Gate::ry(q, angles[q]));
    ASSERT_LT(std::abs(state.norm() - 1.0), 1e-12);
  }
  for (const auto& layer : spec.random_layers) {
    for (const auto& g : layer) {
      state.apply(g);
      ASSERT_LT(std::abs(state.norm() - 1.0), 1e-12);
    }
  }
  CircuitRunner runner(spec);
  const auto fast = runner.run(angles);
  for (int q = 0; q < 16; ++q) EXPECT_NEAR(fast[q], state.expectation_z(q), 1e-10);
}

TEST(RunCircuitTest, Deterministic) {
  const auto spec = CircuitSpec::random(4, 4, 123);
  const std::vector<double> angles{0.3, 1.2, 2.9, 0.0};
  const auto a = run_circuit(spec, angles);
  const auto b = run_circuit(spec, angles);
  EXPECT_EQ(a, b);
  CircuitRunner r1(spec);
  CircuitRunner r2(spec);
  EXPECT_EQ(r1.run(angles), r2.run(angles));
  EXPECT_EQ(r1.executions(), 1u);
}
