// Thermal values of the transverse-field Ising chain from real-time moments, exact and
// Trotterized evolution, against dense matrix exponentials.

#include <iomanip>
#include <iostream>

#include "epsim/epsim.hpp"

int main() {
  using namespace epsim;
  const LocalHamiltonian h = build_tfim(3, 1.0, 1.0);
  const std::vector<Index> dims(3, 2);
  const std::vector<int> sites{0, 1};
  const Matrix zz = embed(kron(gates::pauli_z(), gates::pauli_z()), sites, dims);

  std::cout << std::setw(6) << "beta" << std::setw(4) << "s" << std::setw(16) << "oracle" << std::setw(16)
            << "exact-U" << std::setw(16) << "trotter" << std::setw(12) << "R/step\n";
  for (double beta : {0.25, 0.5, 1.0}) {
    ThermalJob job;
    job.observable = zz;
    job.hamiltonian = h;
    job.beta = beta;
    job.epsilon = 1e-3;
    job.normalized = true;
    const auto ex = thermal_value(job);
    job.evolution = TimeEvolution::trotter;
    const auto tr = thermal_value(job);
    const Matrix hd = dense(h);
    const double o = oracle::thermal_exact(zz, hd, beta) / oracle::thermal_exact(Matrix::Identity(8, 8), hd, beta);
    std::cout << std::setw(6) << beta << std::setw(4) << ex.s << std::setw(16) << o << std::setw(16) << ex.value
              << std::setw(16) << tr.value << std::setw(11) << tr.substeps << "\n";
  }
}
