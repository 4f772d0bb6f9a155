#pragma once

// Umbrella header.

#include "toatrack/errors.hpp"
#include "toatrack/io.hpp"
#include "toatrack/linsys.hpp"
#include "toatrack/model.hpp"
#include "toatrack/rng.hpp"
#include "toatrack/scenario.hpp"
#include "toatrack/solver.hpp"
#include "toatrack/stability.hpp"
#include "toatrack/vec3.hpp"
