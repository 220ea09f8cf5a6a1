#pragma once

#include "domino/spatial/grid.hpp"
#include "domino/spatial/neighbor_index.hpp"
#include "domino/spatial/sampling.hpp"
#include "domino/spatial/sdf.hpp"
