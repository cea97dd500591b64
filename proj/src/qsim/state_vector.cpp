#include "qv/qsim/state_vector.hpp"

#include <cmath>

#include "qv/common/error.hpp"

namespace qv::qsim {

namespace {

void apply_single(std::vector<Complex>& amps, int qubit, const std::vector<Complex>& m) {
  const std::size_t stride = std::size_t{1} << qubit;
  const std::size_t n = amps.size();
  for (std::size_t base = 0; base < n; base += 2 * stride) {
    for (std::size_t j = base; j < base + stride; ++j) {
      const Complex a = amps[j];
      const Complex b = amps[j + stride];
      amps[j] = m[0] * a + m[1] * b;
      amps[j + stride] = m[2] * a + m[3] * b;
    }
  }
}

}  // namespace

StateVector::StateVector(int n_qubits)
    : n_qubits_(n_qubits), amplitudes_(std::size_t{1} << n_qubits, Complex{0.0, 0.0}) {}

StateVector StateVector::ground(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count " + std::to_string(n_qubits) + " outside 1.." +
                      std::to_string(kMaxQubits));
  }
  StateVector s(n_qubits);
  s.amplitudes_[0] = 1.0;
  return s;
}

void StateVector::apply(const Gate& gate) {
  validate_gate(gate, n_qubits_);
  if (gate.is_rotation()) {
    apply_single(amplitudes_, gate.targets[0], gate.matrix());
    return;
  }
  const std::size_t a = std::size_t{1} << gate.targets[0];
  const std::size_t b = std::size_t{1} << gate.targets[1];
  const std::size_t n = amplitudes_.size();
  if (gate.kind == GateKind::kCNOT) {
    for (std::size_t i = 0; i < n; ++i) {
      if ((i & a) && !(i & b)) std::swap(amplitudes_[i], amplitudes_[i | b]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if ((i & a) && (i & b)) amplitudes_[i] = -amplitudes_[i];
    }
  }
}

double StateVector::expectation_z(int qubit) const {
  if (qubit < 0 || qubit >= n_qubits_) {
    throw StructuralError("measured qubit " + std::to_string(qubit) + " out of range");
  }
  const std::size_t mask = std::size_t{1} << qubit;
  double z = 0.0;
  for (std::size_t i = 0; i < amplitudes_.size(); ++i) {
    const double p = std::norm(amplitudes_[i]);
    z += (i & mask) ? -p : p;
  }
  return z;
}

double StateVector::norm() const noexcept {
  double sum = 0.0;
  for (const auto& a : amplitudes_) sum += std::norm(a);
  return std::sqrt(sum);
}

void StateVector::assign(std::span<const Complex> amplitudes) {
  if (amplitudes.size() != amplitudes_.size()) {
    throw StructuralError("amplitude count mismatch");
  }
  std::copy(amplitudes.begin(), amplitudes.end(), amplitudes_.begin());
}

StateVector init_ground(int n_qubits) { return StateVector::ground(n_qubits); }

StateVector apply_gate(StateVector state, const Gate& gate) {
  state.apply(gate);
  return state;
}

double expectation_z(const StateVector& state, int qubit) { return state.expectation_z(qubit); }

}  // namespace qv::qsim
