#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "rtd/exact.hpp"
#include "rtd/model.hpp"

namespace rtd {

/// Per variable, per value magnitude estimates.  Decision variables carry
/// uniform (free) or indicator (posted) entries and never enter a schedule.
struct MagnitudeEstimate {
  enum class Kind { Prior, Posterior };
  Kind kind = Kind::Prior;
  std::vector<std::vector<double>> values;
  std::vector<bool> chance;  // which variables take part in thresholding
};

/// Single forward pass in topological order, parents treated as independent.
MagnitudeEstimate estimate_priors(const InfluenceDiagram& diagram);

/// Evidence-conditioned forward pass followed by a likelihood sweep from the
/// evidence toward the roots.  Entries are unnormalized products.
MagnitudeEstimate estimate_posteriors(const InfluenceDiagram& diagram, const Evidence& evidence);

struct ThresholdSchedule {
  std::vector<double> values;  // strictly descending, distinct
  std::size_t start = 0;       // index of the least-greatest estimate
};

ThresholdSchedule schedule(const MagnitudeEstimate& estimate);

/// Keeps values with estimate >= threshold.  Throws InvalidThreshold when some
/// chance variable would lose every value.
DomainMask reduce(const MagnitudeEstimate& estimate, double threshold);

enum class ReductionMode { K, PK };

struct IterationRecord {
  int iteration = 0;
  double threshold = 0.0;
  std::vector<int> kept;        // per variable
  std::size_t reduced_cells = 0;
  bool failed = false;
  int action = 0;               // recommendation standing after this iteration
  double score = 0.0;
  std::uint64_t units = 0;
};

struct ReducedResult {
  int action = 0;
  double score = 0.0;
  bool have_score = false;      // false when every iteration failed
  bool schedule_exhausted = false;
  std::uint64_t units = 0;      // estimation pass plus every iteration
  std::vector<IterationRecord> log;
};

ReducedResult reduced_decide(const InfluenceDiagram& diagram, const Evidence& evidence, int iterations,
                             ReductionMode mode, const ExactOptions& opts = {});

void write_iteration_header(std::ostream& os);
void write_iteration_log(std::ostream& os, const ReducedResult& result);

}  // namespace rtd
