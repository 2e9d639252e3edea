#pragma once

#include "trajgad/atc.hpp"
#include "trajgad/denoiser.hpp"
#include "trajgad/encoder.hpp"
#include "trajgad/error.hpp"
#include "trajgad/graph.hpp"
#include "trajgad/graph_io.hpp"
#include "trajgad/matrix.hpp"
#include "trajgad/parallel.hpp"
#include "trajgad/pipeline.hpp"
#include "trajgad/rng.hpp"
#include "trajgad/scoring.hpp"
#include "trajgad/stability.hpp"
#include "trajgad/synthetic.hpp"
