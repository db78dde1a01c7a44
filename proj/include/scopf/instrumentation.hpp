#pragma once

#include <cstdint>

namespace scopf {

/// Per-thread counters of expensive linear-algebra and solver events.
struct SolverCounters {
  std::int64_t kkt_factorizations = 0;
  std::int64_t kkt_solves = 0;
  std::int64_t kkt_transpose_solves = 0;
  std::int64_t third_stage_solves = 0;
  std::int64_t base_opf_solves = 0;
};

/// Counters of the calling thread.
SolverCounters& counters();

/// Snapshot of the counters; subtracting two snapshots gives the work done
/// between them.
inline SolverCounters operator-(const SolverCounters& a, const SolverCounters& b) {
  return {a.kkt_factorizations - b.kkt_factorizations, a.kkt_solves - b.kkt_solves,
          a.kkt_transpose_solves - b.kkt_transpose_solves,
          a.third_stage_solves - b.third_stage_solves, a.base_opf_solves - b.base_opf_solves};
}

}  // namespace scopf
