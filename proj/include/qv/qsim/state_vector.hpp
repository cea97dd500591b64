#pragma once

#include <span>
#include <vector>

#include "qv/qsim/gate.hpp"

namespace qv::qsim {

inline constexpr int kMaxQubits = 16;

/// Dense amplitude vector over 2^n basis states. Qubit 0 is the least
/// significant bit of the basis index.
class StateVector {
 public:
  /// |0...0>. Throws ConfigError unless 1 <= n_qubits <= kMaxQubits.
  static StateVector ground(int n_qubits);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t dimension() const noexcept { return amplitudes_.size(); }
  std::span<const Complex> amplitudes() const noexcept { return amplitudes_; }

  /// In-place gate application.
  void apply(const Gate& gate);

  /// <Z> on one qubit: P(0) - P(1).
  double expectation_z(int qubit) const;

  double norm() const noexcept;

  /// Overwrites the amplitudes; size must be 2^n_qubits.
  void assign(std::span<const Complex> amplitudes);

 private:
  explicit StateVector(int n_qubits);

  int n_qubits_ = 0;
  std::vector<Complex> amplitudes_;
};

StateVector init_ground(int n_qubits);
StateVector apply_gate(StateVector state, const Gate& gate);
double expectation_z(const StateVector& state, int qubit);

}  // namespace qv::qsim
