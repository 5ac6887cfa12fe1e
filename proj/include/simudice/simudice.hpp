#pragma once

#include "simudice/rng.hpp"
#include "simudice/mdp.hpp"
#include "simudice/envs.hpp"
#include "simudice/qlearning.hpp"
#include "simudice/dataset.hpp"
#include "simudice/world_model.hpp"
#include "simudice/dice.hpp"
#include "simudice/algorithms.hpp"
#include "simudice/experiment.hpp"
