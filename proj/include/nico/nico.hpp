#pragma once

#include "nico/em.hpp"
#include "nico/evalmetrics.hpp"
#include "nico/exact_estep.hpp"
#include "nico/fm.hpp"
#include "nico/graph.hpp"
#include "nico/io.hpp"
#include "nico/model.hpp"
#include "nico/mstep.hpp"
#include "nico/parallel.hpp"
#include "nico/reconstruct.hpp"
#include "nico/rng.hpp"
#include "nico/sampler.hpp"
#include "nico/simgen.hpp"
