#include "qv/qsim/circuit.hpp"

#include <cmath>
#include <numbers>

#include "qv/common/error.hpp"
#include "qv/common/rng.hpp"

namespace qv::qsim {

namespace {

void check_angles(int n_qubits, std::span<const double> angles) {
  if (angles.size() != static_cast<std::size_t>(n_qubits)) {
    throw StructuralError("expected " + std::to_string(n_qubits) +
                          " encoding angles, got " + std::to_string(angles.size()));
  }
}

}  // namespace

std::vector<Layer> generate_random_layers(int n_qubits, int n_layers, std::uint64_t seed) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("qubit count " + std::to_string(n_qubits) + " outside 1.." +
                      std::to_string(kMaxQubits));
  }
  if (n_layers < 0) throw ConfigError("random layer count must be >= 0");

  static constexpr GateKind kKinds[] = {GateKind::kRX, GateKind::kRY, GateKind::kRZ};
  SplitMix64 rng(seed);
  std::vector<Layer> layers;
  layers.reserve(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    Layer layer;
    for (int q = 0; q < n_qubits; ++q) {
      const GateKind kind = kKinds[rng.below(3)];
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      layer.push_back(Gate{kind, angle, {q, -1}});
    }
    if (n_qubits > 1) {
      for (int q = 0; q < n_qubits; ++q) layer.push_back(Gate::cnot(q, (q + 1) % n_qubits));
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

CircuitSpec CircuitSpec::random(int n_qubits, int n_layers, std::uint64_t seed) {
  CircuitSpec spec;
  spec.n_qubits = n_qubits;
  spec.random_layers = generate_random_layers(n_qubits, n_layers, seed);
  spec.seed = seed;
  for (int q = 0; q < n_qubits; ++q) spec.measured_qubits.push_back(q);
  return spec;
}

std::vector<double> run_circuit(const CircuitSpec& spec, std::span<const double> encoding_angles) {
  check_angles(spec.n_qubits, encoding_angles);
  StateVector state = StateVector::ground(spec.n_qubits);
  for (int q = 0; q < spec.n_qubits; ++q) state.apply(Gate::ry(q, encoding_angles[q]));
  for (const auto& layer : spec.random_layers) {
    for (const auto& gate : layer) state.apply(gate);
  }
  std::vector<double> out;
  out.reserve(spec.measured_qubits.size());
  for (int q : spec.measured_qubits) out.push_back(state.expectation_z(q));
  return out;
}

CircuitRunner::CircuitRunner(const CircuitSpec& spec)
    : n_qubits_(spec.n_qubits), measured_(spec.measured_qubits) {
  if (n_qubits_ < 1 || n_qubits_ > kMaxQubits) {
    throw ConfigError("qubit count " + std::to_string(n_qubits_) + " outside 1.." +
                      std::to_string(kMaxQubits));
  }
  for (int q : measured_) {
    if (q < 0 || q >= n_qubits_) throw StructuralError("measured qubit out of range");
  }
  const std::size_t dim = std::size_t{1} << n_qubits_;
  re_.resize(dim);
  im_.resize(dim);
  scratch_re_.resize(dim);
  scratch_im_.resize(dim);

  bool in_permutation = false;
  for (const auto& layer : spec.random_layers) {
    for (const auto& gate : layer) {
      validate_gate(gate, n_qubits_);
      if (gate.is_rotation()) {
        rotations_.push_back({gate.kind, gate.targets[0], std::cos(gate.angle / 2.0),
                              std::sin(gate.angle / 2.0)});
        steps_.push_back({true, rotations_.size() - 1});
        in_permutation = false;
        continue;
      }
      if (!in_permutation) {
        Permutation p;
        p.destination.resize(dim);
        p.sign.assign(dim, 1.0);
        for (std::size_t i = 0; i < dim; ++i) p.destination[i] = static_cast<std::uint32_t>(i);
        permutations_.push_back(std::move(p));
        steps_.push_back({false, permutations_.size() - 1});
        in_permutation = true;
      }
      // Basis state |i> currently sits at destination[i]; the new gate acts
      // on that location.
      auto& p = permutations_.back();
      const std::uint32_t a = 1u << gate.targets[0];
      const std::uint32_t b = 1u << gate.targets[1];
      for (std::size_t i = 0; i < dim; ++i) {
        std::uint32_t& d = p.destination[i];
        if (gate.kind == GateKind::kCNOT) {
          if (d & a) d ^= b;
        } else if ((d & a) && (d & b)) {
          p.sign[i] = -p.sign[i];
          p.has_sign = true;
        }
      }
    }
  }
}

void CircuitRunner::run(std::span<const double> encoding_angles, std::span<double> out) {
  check_angles(n_qubits_, encoding_angles);
  if (out.size() != measured_.size()) throw StructuralError("output span size mismatch");

  double* re = re_.data();
  double* im = im_.data();
  const std::size_t dim = re_.size();

  // RY(theta_q) on every qubit of |0...0> is a real product state.
  re[0] = 1.0;
  std::size_t size = 1;
  for (int q = 0; q < n_qubits_; ++q) {
    const double c = std::cos(encoding_angles[q] / 2.0);
    const double s = std::sin(encoding_angles[q] / 2.0);
    for (std::size_t i = 0; i < size; ++i) {
      re[i + size] = re[i] * s;
      re[i] *= c;
    }
    size *= 2;
  }
  std::fill(im, im + dim, 0.0);

  for (const Step& step : steps_) {
    if (!step.is_rotation) {
      const auto& p = permutations_[step.index];
      double* sre = scratch_re_.data();
      double* sim = scratch_im_.data();
      const std::uint32_t* dest = p.destination.data();
      if (p.has_sign) {
        const double* sign = p.sign.data();
        for (std::size_t i = 0; i < dim; ++i) {
          sre[dest[i]] = re[i] * sign[i];
          sim[dest[i]] = im[i] * sign[i];
        }
      } else {
        for (std::size_t i = 0; i < dim; ++i) {
          sre[dest[i]] = re[i];
          sim[dest[i]] = im[i];
        }
      }
      re_.swap(scratch_re_);
      im_.swap(scratch_im_);
      re = re_.data();
      im = im_.data();
      continue;
    }
    const Rotation& r = rotations_[step.index];
    const std::size_t stride = std::size_t{1} << r.qubit;
    const double c = r.c;
    const double s = r.s;
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      double* ar = re + base;
      double* ai = im + base;
      double* br = ar + stride;
      double* bi = ai + stride;
      switch (r.kind) {
        case GateKind::kRY:
          // [[c, -s], [s, c]]
          for (std::size_t j = 0; j < stride; ++j) {
            const double xr = ar[j], xi = ai[j], yr = br[j], yi = bi[j];
            ar[j] = c * xr - s * yr;
            ai[j] = c * xi - s * yi;
            br[j] = s * xr + c * yr;
            bi[j] = s * xi + c * yi;
          }
          break;
        case GateKind::kRX:
          // [[c, -i s], [-i s, c]]
          for (std::size_t j = 0; j < stride; ++j) {
            const double xr = ar[j], xi = ai[j], yr = br[j], yi = bi[j];
            ar[j] = c * xr + s * yi;
            ai[j] = c * xi - s * yr;
            br[j] = c * yr + s * xi;
            bi[j] = c * yi - s * xr;
          }
          break;
        default:
          // diag(c - i s, c + i s)
          for (std::size_t j = 0; j < stride; ++j) {
            const double xr = ar[j], xi = ai[j], yr = br[j], yi = bi[j];
            ar[j] = c * xr + s * xi;
            ai[j] = c * xi - s * xr;
            br[j] = c * yr - s * yi;
            bi[j] = c * yi + s * yr;
          }
          break;
      }
    }
  }

  double* probs = scratch_re_.data();
  for (std::size_t i = 0; i < dim; ++i) probs[i] = re[i] * re[i] + im[i] * im[i];
  for (std::size_t m = 0; m < measured_.size(); ++m) {
    const std::size_t stride = std::size_t{1} << measured_[m];
    double zero = 0.0;
    double one = 0.0;
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
      for (std::size_t j = base; j < base + stride; ++j) {
        zero += probs[j];
        one += probs[j + stride];
      }
    }
    out[m] = zero - one;
  }
  ++executions_;
}

std::vector<double> CircuitRunner::run(std::span<const double> encoding_angles) {
  std::vector<double> out(measured_.size());
  run(encoding_angles, out);
  return out;
}

}  // namespace qv::qsim
