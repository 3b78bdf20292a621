#ifndef C2EDEN_HPP
#define C2EDEN_HPP

#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/data_io.hpp"
#include "c2eden/cubic_solver.hpp"
#include "c2eden/protocol/message.hpp"
#include "c2eden/protocol/ledger.hpp"
#include "c2eden/protocol/client.hpp"
#include "c2eden/protocol/transport.hpp"
#include "c2eden/protocol/tcp.hpp"
#include "c2eden/protocol/server.hpp"
#include "c2eden/algorithms/schedule.hpp"
#include "c2eden/algorithms/stationarity.hpp"
#include "c2eden/algorithms/trace.hpp"
#include "c2eden/algorithms/recorder.hpp"
#include "c2eden/algorithms/c2eden_run.hpp"
#include "c2eden/algorithms/baselines.hpp"
#include "c2eden/algorithms/descent_check.hpp"
#include "c2eden/algorithms/run.hpp"

#endif  // C2EDEN_HPP
