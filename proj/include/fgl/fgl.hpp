#pragma once

#include "fgl/error.hpp"
#include "fgl/flows.hpp"
#include "fgl/fracgrid.hpp"
#include "fgl/lowrank.hpp"
#include "fgl/matexp.hpp"
#include "fgl/params.hpp"
#include "fgl/reference.hpp"
#include "fgl/types.hpp"
