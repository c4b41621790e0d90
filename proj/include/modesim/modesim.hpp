#pragma once

#include "modesim/bpm.hpp"
#include "modesim/config.hpp"
#include "modesim/correlation.hpp"
#include "modesim/ensemble.hpp"
#include "modesim/io.hpp"
#include "modesim/metrology.hpp"
#include "modesim/optics.hpp"
#include "modesim/rng.hpp"
#include "modesim/runner.hpp"
#include "modesim/version.hpp"
