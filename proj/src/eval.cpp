#include "fcnlp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fcnlp/error.hpp"

namespace fcnlp {

RunMetrics metrics(std::span<const Label> truth, std::span<const Label> predicted) {
  if (truth.size() != predicted.size()) fail(Errc::ShapeMismatch, "truth and prediction counts differ");
  if (truth.empty()) fail(Errc::EmptyTestSet, "no test records to score");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == Label::Unlabeled) fail(Errc::MissingLabel, "test record without a label");
    const bool t = truth[i] == Label::Fake;
    const bool p = predicted[i] == Label::Fake;
    if (t && p) ++tp;
    if (!t && p) ++fp;
    if (t && !p) ++fn;
    if (!t && !p) ++tn;
  }
  const auto ratio = [](std::size_t num, std::size_t den, const char* what) {
    if (den == 0) {
      warn(std::string(what) + " is undefined (zero denominator); reporting 0");
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  RunMetrics m;
  m.accuracy = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(truth.size());
  const double p = ratio(tp, tp + fp, "precision");
  const double r = ratio(tp, tp + fn, "recall");
  m.precision = 100.0 * p;
  m.recall = 100.0 * r;
  m.f1 = p + r > 0.0 ? 100.0 * 2.0 * p * r / (p + r) : 0.0;
  return m;
}

Stat mean_std(std::span<const double> values) {
  Stat s;
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

MetricsReport aggregate(std::span<const RunMetrics> runs) {
  MetricsReport r;
  r.runs.assign(runs.begin(), runs.end());
  std::vector<double> acc, prec, rec, f1;
  for (const RunMetrics& m : runs) {
    acc.push_back(m.accuracy);
    prec.push_back(m.precision);
    rec.push_back(m.recall);
    f1.push_back(m.f1);
  }
  r.accuracy = mean_std(acc);
  r.precision = mean_std(prec);
  r.recall = mean_std(rec);
  r.f1 = mean_std(f1);
  return r;
}

std::size_t worker_threads() {
  const char* env = std::getenv("FCNLP_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) {
    warn(std::string("ignoring invalid FCNLP_THREADS='") + env + "'");
    return 1;
  }
  return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& body) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          body(k);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

RunOutcome train_and_evaluate(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg) {
  RunOutcome out;
  out.training = train(ds, graph, cfg);
  const Matrix probs = predict_probs(out.training.model, ds, graph);
  const std::vector<Label> predicted = hard_labels(probs);
  std::vector<Label> truth, pred;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.records[i].split != Split::Test) continue;
    truth.push_back(ds.records[i].label);
    pred.push_back(predicted[i]);
  }
  out.metrics = metrics(truth, pred);
  return out;
}

MetricsReport evaluate_runs(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                            std::size_t threads) {
  cfg.validate();
  std::vector<RunMetrics> runs(cfg.runs);
  std::vector<LabelReadCounter> reads(cfg.runs);
  parallel_for(cfg.runs, threads, [&](std::size_t k) {
    TrainConfig c = cfg;
    c.seed = cfg.seed + k;
    RunOutcome o = train_and_evaluate(ds, graph, c);
    runs[k] = o.metrics;
    reads[k] = o.training.ce_reads;
  });
  MetricsReport report = aggregate(runs);
  for (const auto& r : reads) {
    report.ce_reads.seen += r.seen;
    report.ce_reads.unseen += r.unseen;
    report.ce_reads.test += r.test;
  }
  return report;
}

std::vector<TauRow> sweep_tau(const Dataset& ds, const TrainConfig& cfg, std::span<const double> taus,
                              std::size_t threads) {
  std::vector<TauRow> rows;
  for (double tau : taus) {
    TrainConfig c = cfg;
    c.tau = tau;
    c.validate();
    const CrossModalGraph g = build_graph(ds, SimilarityConfig{tau, cfg.channels});
    TauRow row;
    row.tau = tau;
    row.edges = g.num_edges();
    row.avg_connections = g.avg_connections();
    row.report = evaluate_runs(ds, g, c, threads);
    rows.push_back(std::move(row));
  }
  return rows;
}

bool edges_monotone(std::span<const TauRow> rows) {
  std::vector<std::pair<double, std::size_t>> sorted;
  for (const TauRow& r : rows) sorted.emplace_back(r.tau, r.edges);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k].second > sorted[k - 1].second) return false;
  }
  return true;
}

std::vector<GridCell> grid_lambda_mu(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                                     std::span<const double> values, std::size_t threads) {
  for (double v : values) {
    if (!std::isfinite(v) || v <= 0.0) fail(Errc::BadConfig, "grid values must be positive");
  }
  std::vector<GridCell> cells;
  for (double lambda : values) {
    for (double mu : values) {
      TrainConfig c = cfg;
      c.lambda = lambda;
      c.mu = mu;
      cells.push_back({lambda, mu, evaluate_runs(ds, graph, c, threads)});
    }
  }
  return cells;
}

void check_event_disjoint(const Dataset& ds) {
  std::set<std::uint32_t> train_events, test_events;
  bool any_test = false;
  for (const TweetRecord& r : ds.records) {
    if (r.split == Split::Test) any_test = true;
    if (r.event_id == kUnknownEvent) continue;
    (r.split == Split::Test ? test_events : train_events).insert(r.event_id);
  }
  if (!any_test) fail(Errc::EmptyTestSet, "dataset has no Test records");
  for (std::uint32_t e : test_events) {
    if (train_events.count(e) != 0) {
      fail(Errc::BadConfig, "event " + std::to_string(e) + " appears in both training and Test splits");
    }
  }
}

std::vector<AblationRow> ablation(const Dataset& ds, const CrossModalGraph& graph, const TrainConfig& cfg,
                                  std::size_t threads) {
  check_event_disjoint(ds);
  std::vector<AblationRow> rows;
  for (Variant v : kAllVariants) {
    TrainConfig c = cfg;
    c.variant = v;
    c.supervision = Supervision::Auto;
    rows.push_back({v, evaluate_runs(ds, graph, c, threads)});
  }
  return rows;
}

namespace {

void stat_cols(std::ostream& os, const MetricsReport& r) {
  os << r.accuracy.mean << ',' << r.accuracy.std << ',' << r.precision.mean << ',' << r.precision.std << ','
     << r.recall.mean << ',' << r.recall.std << ',' << r.f1.mean << ',' << r.f1.std;
}

constexpr const char* kStatHeader = "acc_mean,acc_std,prec_mean,prec_std,rec_mean,rec_std,f1_mean,f1_std";

}  // namespace

void write_tau_csv(std::ostream& os, std::span<const TauRow> rows) {
  os << std::setprecision(10) << "tau,edges,avg_connections," << kStatHeader << '\n';
  for (const TauRow& r : rows) {
    os << r.tau << ',' << r.edges << ',' << r.avg_connections << ',';
    stat_cols(os, r.report);
    os << '\n';
  }
}

void write_grid_csv(std::ostream& os, std::span<const GridCell> cells) {
  os << std::setprecision(10) << "lambda,mu," << kStatHeader << '\n';
  for (const GridCell& c : cells) {
    os << c.lambda << ',' << c.mu << ',';
    stat_cols(os, c.report);
    os << '\n';
  }
}

void write_ablation_csv(std::ostream& os, std::span<const AblationRow> rows) {
  os << std::setprecision(10) << "variant," << kStatHeader << ",unseen_ce_reads\n";
  for (const AblationRow& r : rows) {
    os << to_string(r.variant) << ',';
    stat_cols(os, r.report);
    os << ',' << r.report.ce_reads.unseen << '\n';
  }
}

void write_runs_csv(std::ostream& os, const MetricsReport& report) {
  os << std::setprecision(10) << "run,accuracy,precision,recall,f1\n";
  for (std::size_t k = 0; k < report.runs.size(); ++k) {
    const RunMetrics& m = report.runs[k];
    os << k << ',' << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.f1 << '\n';
  }
}

void write_loss_csv(std::ostream& os, std::span<const LossValues> history) {
  os << std::setprecision(17) << "epoch,l_fcn,l_lpn,l_mmd,l_all\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    const LossValues& l = history[e];
    os << e + 1 << ',' << l.l_fcn << ',' << l.l_lpn << ',' << l.l_mmd << ',' << l.l_all << '\n';
  }
}

std::string summary_line(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << "acc " << r.accuracy.mean << "±" << r.accuracy.std << "  prec "
     << r.precision.mean << "±" << r.precision.std << "  rec " << r.recall.mean << "±" << r.recall.std << "  f1 "
     << r.f1.mean << "±" << r.f1.std << "  (" << r.n_runs() << " runs)";
  return os.str();
}

}  // namespace fcnlp
