#include "scopf/instrumentation.hpp"

namespace scopf {

SolverCounters& counters() {
  thread_local SolverCounters c;
  return c;
}

}  // namespace scopf
