#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qv/qsim/gate.hpp"
#include "qv/qsim/state_vector.hpp"

namespace qv::qsim {

using Layer = std::vector<Gate>;

/// Encoding (one data-dependent RY per qubit) followed by fixed random layers
/// and Pauli-Z readout of `measured_qubits`.
struct CircuitSpec {
  int n_qubits = 0;
  std::vector<Layer> random_layers;
  std::uint64_t seed = 0;
  std::vector<int> measured_qubits;

  int encoding_gate_count() const noexcept { return n_qubits; }

  /// Random layers regenerated from `seed`; every qubit measured.
  static CircuitSpec random(int n_qubits, int n_layers, std::uint64_t seed);

  bool operator==(const CircuitSpec&) const = default;
};

/// Each layer: one rotation per qubit (kind uniform over RX/RY/RZ, angle
/// uniform in [0, 2*pi)), then a CNOT ring i -> (i+1) mod n. The ring is
/// empty for a single qubit and has both directions for two.
std::vector<Layer> generate_random_layers(int n_qubits, int n_layers, std::uint64_t seed);

/// Reference execution, gate by gate from the ground state.
std::vector<double> run_circuit(const CircuitSpec& spec, std::span<const double> encoding_angles);

/// Compiled form of a CircuitSpec for repeated evaluation. The encoding is
/// built directly as a product state and runs of CNOT/CZ gates are fused
/// into one signed basis permutation. Not thread-safe (owns scratch
/// buffers); copy one per thread.
class CircuitRunner {
 public:
  explicit CircuitRunner(const CircuitSpec& spec);

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t output_size() const noexcept { return measured_.size(); }

  /// Writes one <Z> per measured qubit into `out`.
  void run(std::span<const double> encoding_angles, std::span<double> out);
  std::vector<double> run(std::span<const double> encoding_angles);

  /// Number of circuit executions performed by this runner.
  std::uint64_t executions() const noexcept { return executions_; }

 private:
  struct Rotation {
    GateKind kind;
    int qubit;
    double c;  // cos(angle / 2)
    double s;  // sin(angle / 2)
  };
  struct Permutation {
    std::vector<std::uint32_t> destination;
    std::vector<double> sign;  // applied at the source index
    bool has_sign = false;
  };
  struct Step {
    bool is_rotation;
    std::size_t index;
  };

  int n_qubits_;
  std::vector<int> measured_;
  std::vector<Rotation> rotations_;
  std::vector<Permutation> permutations_;
  std::vector<Step> steps_;
  // Split real/imaginary storage keeps the inner loops vectorizable.
  std::vector<double> re_, im_, scratch_re_, scratch_im_;
  std::uint64_t executions_ = 0;
};

}  // namespace qv::qsim
