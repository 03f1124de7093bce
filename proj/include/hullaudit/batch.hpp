#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hullaudit/discrete_domain.hpp"
#include "hullaudit/hull_solver.hpp"
#include "hullaudit/ingest.hpp"
#include "hullaudit/parallel.hpp"

namespace hullaudit {

/// Per-sample audit outcome. OutsideNoPath: no training row shares the
/// query's levels on the path groups, so no projection keeps them.
enum class SampleStatus { Inside, OutsidePath, OutsideNoPath };

inline std::string_view to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::Inside: return "Inside";
    case SampleStatus::OutsidePath: return "OutsidePath";
    case SampleStatus::OutsideNoPath: return "OutsideNoPath";
  }
  return "?";
}

inline SampleStatus parse_sample_status(std::string_view s) {
  if (s == "Inside") return SampleStatus::Inside;
  if (s == "OutsidePath") return SampleStatus::OutsidePath;
  if (s == "OutsideNoPath") return SampleStatus::OutsideNoPath;
  throw Error(ErrorCode::ParseError, "unknown status '" + std::string(s) + "'");
}

struct BatchOptions {
  DiscreteMethod method = DiscreteMethod::ExactEnumeration;
  HomotopySchedule schedule;
  /// 0 = one worker per hardware thread.
  int threads = 0;
  bool verbose_trace = false;
};

/// Outcome for one test row: a result, or the error that stopped it.
struct BatchItem {
  std::optional<ProjectionResult> result;
  std::optional<DiscreteSolveTrace> trace;
  std::optional<ErrorCode> error;
  std::string message;

  bool ok() const { return result.has_value(); }
};

struct BatchResult {
  std::vector<BatchItem> items;
  std::size_t failures = 0;
};

/// Projects every test row onto the training hull intersected with the
/// domain. Discrete or fixed groups go through the profile enumeration,
/// otherwise a plain continuous projection over all training rows. Errors
/// are recorded per row; the batch always runs to the end.
inline BatchResult batch_project(const EncodedDataset& train, const EncodedDataset& test, const DomainSpec& domain,
                                 const SolverConfig& config, const BatchOptions& options = {}) {
  if (train.layout != test.layout && (!train.layout || !test.layout || train.width() != test.width())) {
    throw Error(ErrorCode::DimensionMismatch, "train and test do not share a layout");
  }
  if (train.size() == 0) throw Error(ErrorCode::EmptyTrainingSet, "empty training set");
  config.validate();
  options.schedule.validate();

  std::optional<DiscreteProjector> projector;
  if (domain.needs_discrete_solve()) projector.emplace(train, domain);
  std::vector<std::size_t> all_rows(train.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);

  BatchResult out;
  out.items.resize(test.size());
  parallel_for(test.size(), options.threads, [&](std::size_t i) {
    BatchItem& item = out.items[i];
    Eigen::VectorXd q = test.matrix.row(static_cast<Eigen::Index>(i)).transpose();
    try {
      if (projector) {
        auto r = projector->project(q, config, options.method, options.schedule, true, options.verbose_trace);
        item.result = std::move(r.result);
        item.trace = std::move(r.trace);
      } else {
        ProjectionProblem p;
        p.query = std::move(q);
        p.data = &train.matrix;
        p.rows = all_rows;
        p.config = config;
        p.layout = train.layout.get();
        item.result = project_continuous(p);
      }
    } catch (const Error& e) {
      item.error = e.code();
      item.message = e.what();
    } catch (const std::exception& e) {
      item.error = ErrorCode::NumericBreakdown;
      item.message = e.what();
    }
  });
  for (const auto& item : out.items) out.failures += item.ok() ? 0 : 1;
  return out;
}

}  // namespace hullaudit
