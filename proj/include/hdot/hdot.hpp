#pragma once

#include "hdot/dataset.hpp"
#include "hdot/error.hpp"
#include "hdot/eval.hpp"
#include "hdot/ground.hpp"
#include "hdot/loss.hpp"
#include "hdot/matrix.hpp"
#include "hdot/model.hpp"
#include "hdot/rng.hpp"
#include "hdot/taxonomy.hpp"
#include "hdot/transport.hpp"
