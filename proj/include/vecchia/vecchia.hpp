#ifndef VECCHIA_VECCHIA_HPP
#define VECCHIA_VECCHIA_HPP

#include "vecchia/batch.hpp"
#include "vecchia/errors.hpp"
#include "vecchia/exact.hpp"
#include "vecchia/fit.hpp"
#include "vecchia/geo.hpp"
#include "vecchia/io.hpp"
#include "vecchia/kernels.hpp"
#include "vecchia/likelihood.hpp"
#include "vecchia/parallel.hpp"
#include "vecchia/random.hpp"

#endif  // VECCHIA_VECCHIA_HPP
