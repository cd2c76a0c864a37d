#pragma once

#include "errors.hpp"
#include "linalg.hpp"
#include "complexes.hpp"
#include "hpl.hpp"
#include "oracle.hpp"
#include "category.hpp"
#include "oracles.hpp"
#include "morse_engine.hpp"
#include "spectral.hpp"
#include "io.hpp"
