#pragma once

#include <aftexp/alasso.hpp>
#include <aftexp/error.hpp>
#include <aftexp/inference.hpp>
#include <aftexp/io.hpp>
#include <aftexp/loss.hpp>
#include <aftexp/parallel.hpp>
#include <aftexp/pipeline.hpp>
#include <aftexp/random.hpp>
#include <aftexp/sample.hpp>
#include <aftexp/simulation.hpp>
#include <aftexp/solver.hpp>
#include <aftexp/survival.hpp>
#include <aftexp/types.hpp>
