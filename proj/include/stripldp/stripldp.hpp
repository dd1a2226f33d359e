#pragma once

#include "errors.hpp"
#include "seeding.hpp"
#include "linalg.hpp"
#include "env.hpp"
#include "phi.hpp"
#include "products.hpp"
#include "lmgf.hpp"
#include "rates.hpp"
#include "montecarlo.hpp"
#include "io.hpp"
