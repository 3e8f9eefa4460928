#pragma once

#include "epsim/algorithms.hpp"
#include "epsim/channels.hpp"
#include "epsim/circuit.hpp"
#include "epsim/experiment.hpp"
#include "epsim/hamiltonians.hpp"
#include "epsim/io.hpp"
#include "epsim/mps.hpp"
#include "epsim/network.hpp"
#include "epsim/oracle.hpp"
#include "epsim/parallel.hpp"
#include "epsim/random.hpp"
#include "epsim/tensor.hpp"
#include "epsim/tensor_network.hpp"
