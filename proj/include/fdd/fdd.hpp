#pragma once

#include "fdd/numerics.hpp"
#include "fdd/phi.hpp"
#include "fdd/variational.hpp"
#include "fdd/measure.hpp"
#include "fdd/hypotheses.hpp"
#include "fdd/datasets.hpp"
#include "fdd/discrepancy.hpp"
#include "fdd/bounds.hpp"
#include "fdd/trainer.hpp"
#include "fdd/reproduce.hpp"
