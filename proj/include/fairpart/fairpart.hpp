#pragma once

#include "fairpart/buchi.hpp"
#include "fairpart/core.hpp"
#include "fairpart/error.hpp"
#include "fairpart/frontend.hpp"
#include "fairpart/graph.hpp"
#include "fairpart/io.hpp"
#include "fairpart/modelcheck.hpp"
#include "fairpart/partition.hpp"
#include "fairpart/pltl.hpp"
#include "fairpart/proposition.hpp"
#include "fairpart/refinement.hpp"
#include "fairpart/relevance.hpp"
