#pragma once

#include "mfclt/bogoliubov.hpp"
#include "mfclt/config.hpp"
#include "mfclt/distribution.hpp"
#include "mfclt/error.hpp"
#include "mfclt/experiment.hpp"
#include "mfclt/fock.hpp"
#include "mfclt/hartree.hpp"
#include "mfclt/lattice.hpp"
#include "mfclt/observables.hpp"
#include "mfclt/stats.hpp"
#include "mfclt/version.hpp"
