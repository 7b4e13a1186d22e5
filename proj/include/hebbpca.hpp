#pragma once

// Umbrella header.

#include "hebbpca/error.hpp"
#include "hebbpca/types.hpp"
#include "hebbpca/rng.hpp"
#include "hebbpca/encoding.hpp"
#include "hebbpca/spectral.hpp"
#include "hebbpca/learners.hpp"
#include "hebbpca/balanced.hpp"
#include "hebbpca/netsim.hpp"
#include "hebbpca/datagen.hpp"
#include "hebbpca/io.hpp"
