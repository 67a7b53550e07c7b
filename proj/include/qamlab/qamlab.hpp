#pragma once

#include "qamlab/csv.hpp"
#include "qamlab/detect.hpp"
#include "qamlab/epsmaps.hpp"
#include "qamlab/fft.hpp"
#include "qamlab/orbits.hpp"
#include "qamlab/parallel.hpp"
#include "qamlab/quantum.hpp"
#include "qamlab/rational.hpp"
#include "qamlab/resonance.hpp"
#include "qamlab/rng.hpp"
#include "qamlab/scan.hpp"
#include "qamlab/version.hpp"
