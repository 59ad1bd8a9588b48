#pragma once

#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fcnlp/dataset.hpp"
#include "fcnlp/graph.hpp"
#include "fcnlp/losses.hpp"
#include "fcnlp/trainer.hpp"

namespace fcnlp {

// Percentages; Fake is the positive class.
struct RunMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single run
};

struct MetricsReport {
  std::vector<RunMetrics> runs;
  Stat accuracy, precision, recall, f1;
  // Summed over runs.
  LabelReadCounter ce_reads;

  std::size_t n_runs() const { return runs.size(); }
};

RunMetrics metrics(std::span<const Label> truth, std::span<const Label> predicted);
Stat mean_std(std::span<const double> values);
MetricsReport aggregate(std::span<const RunMetrics> runs);

// FCNLP_THREADS, default 1. Runs are independent and single-threaded, so
// results do not depend on this value.
std::size_t worker_threads();
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body);

struct RunOutcome {
  RunMetrics metrics;
  TrainResult training;
};

// Trains once with cfg.seed and scores the Test records.
RunOutcome train_and_evaluate(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg);

// cfg.runs trainings with seeds cfg.seed, cfg.seed + 1, ...
MetricsReport evaluate_runs(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                            std::size_t threads = 1);

struct TauRow {
  double tau = 0.0;
  std::size_t edges = 0;
  double avg_connections = 0.0;
  MetricsReport report;
};

std::vector<TauRow> sweep_tau(const Dataset& ds, const TrainConfig& cfg, std::span<const double> taus,
                              std::size_t threads = 1);
// Edge counts never increase as tau grows (rows sorted by tau first).
bool edges_monotone(std::span<const TauRow> rows);

struct GridCell {
  double lambda = 0.0;
  double mu = 0.0;
  MetricsReport report;
};

std::vector<GridCell> grid_lambda_mu(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                                     std::span<const double> values, std::size_t threads = 1);

struct AblationRow {
  Variant variant = Variant::Full;
  MetricsReport report;
};

// Runs every variant with the same seeds. Requires event-disjoint Test.
std::vector<AblationRow> ablation(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                                  std::size_t threads = 1);

void check_event_disjoint(const Dataset& ds);

void write_tau_csv(std::ostream& os, std::span<const TauRow> rows);
void write_grid_csv(std::ostream& os, std::span<const GridCell> cells);
void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows);
void write_runs_csv(std::ostream& os, const MetricsReport& report);
void write_loss_csv(std::ostream& os, std::span<const LossValues> history);
std::string summary_line(const MetricsReport& report);

}  // namespace fcnlp
