#pragma once

#include "cprip/bounds.hpp"
#include "cprip/conditioning.hpp"
#include "cprip/error.hpp"
#include "cprip/experiment.hpp"
#include "cprip/io.hpp"
#include "cprip/random.hpp"
#include "cprip/recovery.hpp"
#include "cprip/selftest.hpp"
#include "cprip/sensing.hpp"
#include "cprip/tensor.hpp"
