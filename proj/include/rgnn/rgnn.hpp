#pragma once

// Umbrella header for the whole toolkit.

#include "rgnn/checkpoint.hpp"
#include "rgnn/data.hpp"
#include "rgnn/errors.hpp"
#include "rgnn/eval.hpp"
#include "rgnn/experiment.hpp"
#include "rgnn/gradcheck.hpp"
#include "rgnn/graph.hpp"
#include "rgnn/labels.hpp"
#include "rgnn/layers.hpp"
#include "rgnn/model.hpp"
#include "rgnn/objectives.hpp"
#include "rgnn/optimizer.hpp"
#include "rgnn/perturb.hpp"
#include "rgnn/rng.hpp"
#include "rgnn/sparse.hpp"
#include "rgnn/tape.hpp"
#include "rgnn/tensor.hpp"
#include "rgnn/trainer.hpp"
