#pragma once

#include "ccx/bitio.hpp"
#include "ccx/codec.hpp"
#include "ccx/errors.hpp"
#include "ccx/keystream.hpp"
#include "ccx/stats.hpp"
