#include "qv/qsim/gate.hpp"

#include <cmath>

#include "qv/common/error.hpp"

namespace qv::qsim {

const char* to_string(GateKind kind) {
  switch (kind) {
    case GateKind::kRY: return "RY";
    case GateKind::kRX: return "RX";
    case GateKind::kRZ: return "RZ";
    case GateKind::kCNOT: return "CNOT";
    case GateKind::kCZ: return "CZ";
  }
  return "?";
}

std::vector<Complex> Gate::matrix() const {
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const Complex i{0.0, 1.0};
  switch (kind) {
    case GateKind::kRY:
      return {c, -s, s, c};
    case GateKind::kRX:
      return {c, -i * s, -i * s, c};
    case GateKind::kRZ:
      return {std::polar(1.0, -angle / 2.0), 0.0, 0.0, std::polar(1.0, angle / 2.0)};
    case GateKind::kCNOT: {
      // Local index l = control + 2 * target; |1,t> -> |1,1-t>.
      std::vector<Complex> m(16, 0.0);
      const int image[4] = {0, 3, 2, 1};
      for (int col = 0; col < 4; ++col) m[image[col] * 4 + col] = 1.0;
      return m;
    }
    case GateKind::kCZ: {
      std::vector<Complex> m(16, 0.0);
      m[0] = m[5] = m[10] = 1.0;
      m[15] = -1.0;
      return m;
    }
  }
  return {};
}

void validate_gate(const Gate& gate, int n_qubits) {
  const int k = gate.arity();
  for (int j = 0; j < k; ++j) {
    if (gate.targets[j] < 0 || gate.targets[j] >= n_qubits) {
      throw StructuralError(std::string(to_string(gate.kind)) + " target " +
                            std::to_string(gate.targets[j]) + " out of range for " +
                            std::to_string(n_qubits) + " qubits");
    }
  }
  if (k == 2 && gate.targets[0] == gate.targets[1]) {
    throw StructuralError(std::string(to_string(gate.kind)) +
                          " needs two distinct qubits");
  }
}

}  // namespace qv::qsim
