#pragma once

// Transfer-learning portfolio optimization: long-only maximum-Sharpe
// allocation that borrows strength from related datasets through
// forward-validated combination weights, plus the simulation designs and
// walk-forward evaluation harness used to study it.

#include "tlpo/errors.hpp"
#include "tlpo/evaluate.hpp"
#include "tlpo/max_sharpe.hpp"
#include "tlpo/moments.hpp"
#include "tlpo/panel.hpp"
#include "tlpo/report.hpp"
#include "tlpo/rng.hpp"
#include "tlpo/simulate.hpp"
#include "tlpo/strategies.hpp"
#include "tlpo/transfer.hpp"
