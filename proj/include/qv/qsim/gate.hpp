#pragma once

#include <complex>
#include <string>
#include <vector>

namespace qv::qsim {

using Complex = std::complex<double>;

enum class GateKind { kRY, kRX, kRZ, kCNOT, kCZ };

const char* to_string(GateKind kind);

/// A single gate from the supported set. Rotations act on `targets[0]`;
/// CNOT uses targets[0] as control and targets[1] as target; CZ is symmetric.
struct Gate {
  GateKind kind = GateKind::kRY;
  double angle = 0.0;  // radians, rotations only
  int targets[2] = {0, -1};

  static Gate ry(int qubit, double angle) { return {GateKind::kRY, angle, {qubit, -1}}; }
  static Gate rx(int qubit, double angle) { return {GateKind::kRX, angle, {qubit, -1}}; }
  static Gate rz(int qubit, double angle) { return {GateKind::kRZ, angle, {qubit, -1}}; }
  static Gate cnot(int control, int target) { return {GateKind::kCNOT, 0.0, {control, target}}; }
  static Gate cz(int a, int b) { return {GateKind::kCZ, 0.0, {a, b}}; }

  bool is_rotation() const noexcept {
    return kind == GateKind::kRY || kind == GateKind::kRX || kind == GateKind::kRZ;
  }
  int arity() const noexcept { return is_rotation() ? 1 : 2; }

  /// Dense unitary on the gate's own qubits, row-major, dimension 2^arity.
  /// Local basis index = bit(targets[0]) + 2 * bit(targets[1]).
  std::vector<Complex> matrix() const;

  bool operator==(const Gate&) const = default;
};

/// Throws StructuralError unless every target is distinct and < n_qubits.
void validate_gate(const Gate& gate, int n_qubits);

}  // namespace qv::qsim
