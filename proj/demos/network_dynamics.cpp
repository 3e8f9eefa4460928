// Evolves a random MPS through a brickwork circuit in the channel-network picture and compares
// the exact contraction, region-wise contraction and postselected sampling with the dense oracle.

#include <iostream>

#include "epsim/epsim.hpp"

int main() {
  using namespace epsim;
  Rng rng(11);
  const int n = 4;
  const MPS psi = canonicalize(random_mps(n, 2, 2, rng), Canonical::left);
  const BrickworkCircuit circuit = random_brickwork(n, 2, 2, rng);
  const SiteOperators ops{{1, gates::pauli_z()}, {2, gates::pauli_x()}};

  const ChannelNetwork net = build_network(psi, circuit, ops);
  const Complex exact = evaluate_exact(net).value;
  const Complex regions = evaluate_regions(net, layer_partition(net)).value;
  const Complex oracle_value =
      oracle::expectation(oracle::apply_circuit({psi.phys_dims(), to_statevector(psi)}, circuit), ops);

  std::cout << "nodes " << net.nodes.size() << ", vertical wires " << net.count(WireKind::vertical) << "\n";
  std::cout << "oracle   " << oracle_value.real() << "\n";
  std::cout << "exact    " << exact.real() << "\n";
  std::cout << "regions  " << regions.real() << "\n";

  // a single gate keeps the postselection rate at 1/16
  const BrickworkCircuit small{2, 2, {{{0, random_unitary(4, rng)}}}};
  const MPS pair = canonicalize(random_mps(2, 2, 2, rng), Canonical::left);
  const ChannelNetwork small_net = build_network(pair, small, {{0, gates::pauli_z()}});
  const auto s = evaluate_sampled(small_net, 200000, 5);
  std::cout << "two-site sampled " << s.estimate << " +- " << s.stderr_ << " (exact "
            << evaluate_exact(small_net).value.real() << ", accepted " << s.accepted << " of " << s.shots << ")\n";

  const auto r = resources(circuit);
  std::cout << "resources: " << r.state_qudits << " state qudits, " << r.evolution_qudits << " evolution qudits\n";
}
