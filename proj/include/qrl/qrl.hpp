#ifndef QRL_QRL_HPP
#define QRL_QRL_HPP

#include "qrl/budget.hpp"
#include "qrl/config.hpp"
#include "qrl/discrimination.hpp"
#include "qrl/experiments.hpp"
#include "qrl/filter.hpp"
#include "qrl/jumps.hpp"
#include "qrl/model.hpp"
#include "qrl/parallel.hpp"
#include "qrl/random.hpp"
#include "qrl/reset.hpp"
#include "qrl/selection.hpp"
#include "qrl/trace_io.hpp"
#include "qrl/trajectory.hpp"

#endif  // QRL_QRL_HPP
