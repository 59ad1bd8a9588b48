#include "fcnlp/cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <array>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "binary_io.hpp"
#include "fcnlp/checkpoint.hpp"
#include "fcnlp/config.hpp"
#include "fcnlp/error.hpp"
#include "fcnlp/eval.hpp"
#include "fcnlp/gradcheck.hpp"
#include "fcnlp/graph.hpp"
#include "fcnlp/synth.hpp"
#include "fcnlp/trainer.hpp"
#include "json.hpp"

namespace fcnlp {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_file(const fs::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    fail(Errc::IoError, "SHA-256 failed for " + path.string());
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

namespace {

// Flag values as parsed; unset optionals leave the config-file value alone.
struct TrainFlags {
  std::string config_file;
  std::optional<double> tau, lambda, mu, lr, weight_decay;
  std::optional<std::uint32_t> epochs, hidden, gcn_layers, la_layers, runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant, channels, supervision;
  bool transductive = false, shared_self = false, mean_reduction = false;

  void add_to(CLI::App& app, bool training) {
    app.add_option("--config", config_file, "key = value config file (flags override it)");
    app.add_option("--tau", tau, "cosine similarity threshold in (0, 1]");
    app.add_option("--channels", channels, "similarity channels, e.g. II,TT,IT,TI");
    if (!training) return;
    app.add_option("--lambda", lambda, "weight of the propagation loss");
    app.add_option("--mu", mu, "weight of the MMD loss");
    app.add_option("--lr", lr, "AdamW learning rate");
    app.add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay");
    app.add_option("--epochs", epochs, "full-batch training epochs");
    app.add_option("--hidden", hidden, "GCN hidden width");
    app.add_option("--gcn-layers", gcn_layers, "number of GCN layers");
    app.add_option("--la-layers", la_layers, "number of label-attention layers (propagation steps + 1)");
    app.add_option("--seed", seed, "seed of the first run");
    app.add_option("--runs", runs, "independent runs (seeds seed, seed+1, ...)");
    app.add_option("--variant", variant, "baseline | fcn-only | fcn-lpn-no-mmd | lpn-alpha | full (or i..v)");
    app.add_option("--supervision", supervision, "auto | seen | seen+unseen");
    app.add_flag("--transductive-train", transductive, "train on the whole graph including Test nodes");
    app.add_flag("--shared-self-weight", shared_self, "share the GCN self and neighbour matrices");
    app.add_flag("--mean-reduction", mean_reduction, "average instead of sum the cross-entropy terms");
  }

  // Precedence: flags, then --config, then `base`.
  TrainConfig resolve(const TrainConfig& base = {}) const {
    TrainConfig cfg = config_file.empty() ? base : load_config(config_file, base);
    const auto set = [&](const char* key, const auto& v) {
      if (v) {
        std::ostringstream os;
        if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, double>) {
          os << format_double(*v);
        } else {
          os << *v;
        }
        apply_setting(cfg, key, os.str());
      }
    };
    set("tau", tau);
    set("lambda", lambda);
    set("mu", mu);
    set("lr", lr);
    set("weight-decay", weight_decay);
    set("epochs", epochs);
    set("hidden", hidden);
    set("gcn-layers", gcn_layers);
    set("la-layers", la_layers);
    set("runs", runs);
    set("seed", seed);
    set("variant", variant);
    set("channels", channels);
    set("supervision", supervision);
    if (transductive) cfg.transductive_train = true;
    if (shared_self) cfg.shared_self_weight = true;
    if (mean_reduction) cfg.mean_reduction = true;
    cfg.validate();
    return cfg;
  }
};

// Where the records come from: a TFRE file or the synthetic generator.
struct DataFlags {
  std::string data;
  bool synth = false;
  std::string synth_config;
  std::optional<std::uint64_t> synth_seed;

  void add_to(CLI::App& app) {
    app.add_option("--data", data, "TFRE v1 dataset file");
    app.add_flag("--synth", synth, "use the synthetic generator instead of --data");
    app.add_option("--synth-config", synth_config, "generator settings file (implies --synth)");
    app.add_option("--synth-seed", synth_seed, "generator seed (implies --synth)");
  }

  bool use_synth() const { return synth || !synth_config.empty() || synth_seed.has_value(); }

  SynthConfig synth_settings() const {
    SynthConfig sc;
    if (!synth_config.empty()) {
      const std::vector<char> bytes = detail::read_file(synth_config);
      sc = parse_synth_config(std::string_view(bytes.data(), bytes.size()));
    }
    if (synth_seed) sc.seed = *synth_seed;
    return sc;
  }

  Dataset load(json& manifest) const {
    if (use_synth() == !data.empty()) fail(Errc::BadConfig, "give exactly one of --data or --synth");
    if (use_synth()) {
      const SynthConfig sc = synth_settings();
      manifest["data"] = {{"source", "synthetic"}, {"generator", format_config(sc)}};
      return gen_synth(sc);
    }
    manifest["data"] = {{"source", data}, {"sha256", sha256_file(data)}};
    return load_dataset(data);
  }
};

class Context {
 public:
  Context(std::ostream& out, std::string command, std::span<const std::string> args)
      : out_(out) {
    manifest_["command"] = command;
    manifest_["argv"] = json::array();
    for (const std::string& a : args) manifest_["argv"].push_back(a);
  }

  std::ostream& out() { return out_; }
  json& manifest() { return manifest_; }

  void set_out_dir(const std::string& dir, bool required) {
    if (dir.empty()) {
      if (required) fail(Errc::BadConfig, "--out is required for this command");
      return;
    }
    out_dir_ = dir;
    std::error_code ec;
    fs::create_directories(*out_dir_, ec);
    if (ec) fail(Errc::IoError, "cannot create " + dir + ": " + ec.message());
  }

  bool has_out() const { return out_dir_.has_value(); }

  void echo_config(const std::string& text) {
    manifest_["config"] = text;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) out_ << "# " << line << '\n';
  }

  // Writes out_dir/name via `write` and records it in the manifest.
  template <typename Writer>
  void artifact(const std::string& name, Writer&& write) {
    if (!out_dir_) return;
    const fs::path path = *out_dir_ / name;
    write(path);
    outputs_.push_back(name);
  }

  void text_artifact(const std::string& name, const std::string& text) {
    artifact(name, [&](const fs::path& p) { detail::write_file(p, std::span<const char>(text.data(), text.size())); });
  }

  void finish() {
    if (!out_dir_) return;
    json files = json::array();
    for (const std::string& name : outputs_) {
      const fs::path p = *out_dir_ / name;
      files.push_back({{"file", name}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
    }
    manifest_["outputs"] = files;
    const std::string text = manifest_.dump(2) + "\n";
    detail::write_file(*out_dir_ / "manifest.json", std::span<const char>(text.data(), text.size()));
  }

 private:
  std::ostream& out_;
  json manifest_;
  std::optional<fs::path> out_dir_;
  std::vector<std::string> outputs_;
};

std::string join_channels(ChannelMask mask) {
  std::string s;
  for (const std::string& n : channel_names(mask)) s += (s.empty() ? "" : ",") + n;
  return s;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(Errc::BadConfig, std::string("bad number '") + item + "' in " + what);
    }
  }
  if (out.empty()) fail(Errc::BadConfig, std::string(what) + " is empty");
  return out;
}

std::string csv(const std::function<void(std::ostream&)>& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::string graph_summary(const CrossModalGraph& g) {
  std::map<std::string, std::size_t> per_channel;
  for (const Edge& e : g.edges()) {
    for (const std::string& n : channel_names(e.channels)) ++per_channel[n];
  }
  std::ostringstream os;
  os << "nodes " << g.num_nodes() << "  edges " << g.num_edges() << "  avg_connections " << std::fixed
     << std::setprecision(3) << g.avg_connections() << '\n';
  for (const std::string& n : channel_names(kAllChannels)) os << "  " << n << " " << per_channel[n] << '\n';
  return os.str();
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fake-news detection with feature contextualization and label propagation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string out_dir;
  TrainFlags tf;
  DataFlags df;
  bool force_cross = false;
  std::string format = "json";
  std::string checkpoint;
  std::string taus = "0.85,0.87,0.89,0.91,0.93,0.95,0.97,0.99";
  std::string grid_values = "0.01,0.1,1,10";
  std::uint64_t gc_seed = 0;
  std::size_t gc_seeds = 5;
  SynthConfig sc;
  std::string synth_config;

  const auto data_cmd = [&](const char* name, const char* help, bool training) {
    CLI::App* c = app.add_subcommand(name, help);
    df.add_to(*c);
    tf.add_to(*c, training);
    c->add_option("--out", out_dir, "output directory");
    return c;
  };

  CLI::App* build = data_cmd("build-graph", "build the cross-modal graph and report its statistics", false);
  build->add_flag("--force-cross", force_cross, "fail instead of skipping IT/TI when image and text dims differ");
  CLI::App* exportg = data_cmd("export-graph", "write the graph as JSON or Graphviz DOT", false);
  exportg->add_option("--format", format, "json | dot")->check(CLI::IsMember({"json", "dot"}));
  exportg->add_flag("--force-cross", force_cross, "fail instead of skipping IT/TI when dims differ");
  CLI::App* trainc = data_cmd("train", "train one model and save a checkpoint", true);
  CLI::App* evalc = data_cmd("eval", "score a checkpoint, or train and score --runs models", true);
  evalc->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (otherwise trains --runs models)");
  CLI::App* sweep = data_cmd("sweep-tau", "accuracy and graph density across thresholds", true);
  sweep->add_option("--taus", taus, "comma-separated thresholds");
  CLI::App* grid = data_cmd("grid", "accuracy across the lambda x mu grid", true);
  grid->add_option("--values", grid_values, "comma-separated values used for both lambda and mu");
  CLI::App* abl = data_cmd("ablation", "train every variant with the same seeds", true);

  CLI::App* gen = app.add_subcommand("gen-synth", "write a synthetic TFRE dataset");
  gen->add_option("--config", synth_config, "generator settings file (flags override it)");
  gen->add_option("--seed", sc.seed, "generator seed");
  gen->add_option("--events", sc.events, "number of events");
  gen->add_option("--per-event", sc.per_event, "tweets per event");
  gen->add_option("--dim", sc.dim, "embedding width");
  gen->add_option("--fake-offset", sc.fake_offset, "text shift of fake tweets");
  gen->add_option("--noise", sc.noise, "expected noise norm");
  gen->add_option("--shared-fake", sc.shared_fake, "weight of the fake direction shared by all events");
  gen->add_option("--unseen-events", sc.unseen_events, "events in the Unseen split");
  gen->add_option("--test-events", sc.test_events, "events in the Test split");
  gen->add_option("--out", out_dir, "output directory")->required();

  CLI::App* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gc->add_option("--seed", gc_seed, "first instance seed");
  gc->add_option("--seeds", gc_seeds, "number of random instances");
  gc->add_option("--out", out_dir, "output directory");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::Success& e) {
    std::ostringstream o, e2;
    app.exit(e, o, e2);
    out << o.str() << e2.str();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  CLI::App* cmd = app.get_subcommands().front();
  Context ctx(out, cmd->get_name(), args);
  try {
    if (cmd == gen) {
      SynthConfig cfg = sc;
      if (!synth_config.empty()) {
        const std::vector<char> bytes = detail::read_file(synth_config);
        cfg = parse_synth_config(std::string_view(bytes.data(), bytes.size()));
        // Flags given explicitly still win over the file.
        for (const CLI::Option* opt : gen->get_options()) {
          if (opt->count() == 0 || opt->get_name() == "--config" || opt->get_name() == "--out") continue;
          apply_setting(cfg, opt->get_name().substr(2), opt->as<std::string>());
        }
      }
      cfg.validate();
      ctx.set_out_dir(out_dir, true);
      ctx.echo_config(format_config(cfg));
      const Dataset ds = gen_synth(cfg);
      ctx.artifact("dataset.tfre", [&](const fs::path& p) { save_dataset(ds, p); });
      out << "wrote " << ds.size() << " records\n";
    } else if (cmd == gc) {
      ctx.set_out_dir(out_dir, false);
      ctx.echo_config("seed = " + std::to_string(gc_seed) + "\nseeds = " + std::to_string(gc_seeds) + "\n");
      const GradcheckReport report = run_gradcheck(gc_seed, gc_seeds);
      const std::string text = format_report(report);
      out << text;
      ctx.text_artifact("gradcheck.csv", text);
      ctx.finish();
      if (!report.ok()) {
        err << "error: gradient check exceeded tolerance " << report.tolerance << '\n';
        return kExitRuntime;
      }
      return kExitOk;
    } else {
      const bool training = cmd != build && cmd != exportg;
      std::optional<LoadedModel> loaded;
      if (cmd == evalc && !checkpoint.empty()) {
        loaded = load_checkpoint(checkpoint);
        ctx.manifest()["checkpoint"] = {{"path", checkpoint}, {"sha256", sha256_file(checkpoint)}};
      }
      const TrainConfig cfg = loaded ? tf.resolve(loaded->config) : tf.resolve();
      ctx.set_out_dir(out_dir, cmd == build || cmd == exportg || cmd == trainc);
      if (training) {
        ctx.echo_config(format_config(cfg));
      } else {
        ctx.echo_config("tau = " + format_double(cfg.tau) + "\nchannels = " + join_channels(cfg.channels) +
                        "\nforce-cross = " + (force_cross ? "true" : "false") + "\n");
      }
      const Dataset ds = df.load(ctx.manifest());
      const std::size_t threads = worker_threads();

      if (cmd == sweep) {
        const std::vector<double> grid_taus = parse_list(taus, "--taus");
        const std::vector<TauRow> rows = sweep_tau(ds, cfg, grid_taus, threads);
        const std::string text = csv([&](std::ostream& os) { write_tau_csv(os, rows); });
        out << text;
        ctx.text_artifact("tau.csv", text);
        ctx.finish();
        return kExitOk;
      }

      SimilarityConfig sim{cfg.tau, cfg.channels, force_cross};
      const CrossModalGraph graph = build_graph(ds, sim);

      if (cmd == build) {
        out << graph_summary(graph);
        ctx.text_artifact("graph.json", graph_to_json(graph));
        ctx.text_artifact("summary.txt", graph_summary(graph));
      } else if (cmd == exportg) {
        const bool dot = format == "dot";
        ctx.artifact(dot ? "graph.dot" : "graph.json",
                     [&](const fs::path& p) { export_graph(graph, p, dot ? GraphFormat::Dot : GraphFormat::Json); });
        out << "nodes " << graph.num_nodes() << "  edges " << graph.num_edges() << '\n';
      } else if (cmd == trainc) {
        TrainResult result = train(ds, graph, cfg);
        const LossValues& last = result.history.back();
        out << std::setprecision(10) << "epochs " << result.steps << "  l_fcn " << last.l_fcn << "  l_lpn "
            << last.l_lpn << "  l_mmd " << last.l_mmd << "  l_all " << last.l_all << '\n';
        ctx.artifact("model.fckp", [&](const fs::path& p) { save_checkpoint(p, cfg, result.model); });
        ctx.text_artifact("loss.csv", csv([&](std::ostream& os) { write_loss_csv(os, result.history); }));
      } else if (cmd == evalc) {
        MetricsReport report;
        if (loaded) {
          const std::vector<Label> pred = hard_labels(predict_probs(loaded->model, ds, graph));
          std::vector<Label> truth, scored;
          for (std::size_t i = 0; i < ds.size(); ++i) {
            if (ds.records[i].split != Split::Test) continue;
            truth.push_back(ds.records[i].label);
            scored.push_back(pred[i]);
          }
          const RunMetrics m = metrics(truth, scored);
          report = aggregate(std::span<const RunMetrics>(&m, 1));
        } else {
          report = evaluate_runs(ds, graph, cfg, threads);
        }
        out << summary_line(report) << '\n';
        ctx.text_artifact("runs.csv", csv([&](std::ostream& os) { write_runs_csv(os, report); }));
      } else if (cmd == grid) {
        const std::vector<double> values = parse_list(grid_values, "--values");
        const std::vector<GridCell> cells = grid_lambda_mu(ds, graph, cfg, values, threads);
        const std::string text = csv([&](std::ostream& os) { write_grid_csv(os, cells); });
        out << text;
        ctx.text_artifact("grid.csv", text);
      } else if (cmd == abl) {
        const std::vector<AblationRow> rows = ablation(ds, graph, cfg, threads);
        const std::string text = csv([&](std::ostream& os) { write_ablation_csv(os, rows); });
        out << text;
        ctx.text_artifact("ablation.csv", text);
      }
    }
    ctx.finish();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == Errc::BadConfig ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace fcnlp
