#pragma once

#include "armac3/augment.hpp"
#include "armac3/checkpoint.hpp"
#include "armac3/config.hpp"
#include "armac3/datasets.hpp"
#include "armac3/encoder.hpp"
#include "armac3/errors.hpp"
#include "armac3/experiment.hpp"
#include "armac3/graph.hpp"
#include "armac3/metrics.hpp"
#include "armac3/objectives.hpp"
#include "armac3/tensor.hpp"
#include "armac3/trainer.hpp"
