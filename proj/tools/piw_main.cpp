// piw: command-line front end for the stick-workload toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "piw/config.hpp"
#include "piw/error.hpp"
#include "piw/json_io.hpp"
#include "piw/metrics_table.hpp"
#include "piw/pilotsim.hpp"
#include "piw/pipeline.hpp"
#include "piw/server.hpp"
#include "piw/stream.hpp"
#include "piw/telemetry.hpp"
#include "piw/wlmodel.hpp"

namespace fs = std::filesystem;
using piw::json_io::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop.store(true); }

int exit_code(const piw::Error& e) {
  switch (piw::classify(e.code())) {
    case piw::ErrorClass::usage:
      return kExitUsage;
    case piw::ErrorClass::numeric:
      return kExitNumeric;
    case piw::ErrorClass::data:
      break;
  }
  return kExitData;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) piw::fail(piw::Errc::Io, "cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Output sink: a file when a path is given, stdout otherwise.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) piw::fail(piw::Errc::Io, "cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) piw::fail(piw::Errc::Io, "cannot write '" + p.string() + "'");
  out << text;
}

// Flags that map onto config keys. A flag only overrides when given.
struct FlagLayer {
  std::map<std::string, std::pair<std::string, CLI::Option*>> bound;
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, values[key], help);
    bound[key + "@" + app->get_name()] = {key, opt};
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_flag(flag, help);
    values[key] = "true";
    bound[key + "@" + app->get_name()] = {key, opt};
  }
  piw::config::Settings settings() const {
    piw::config::Settings s;
    for (const auto& [id, entry] : bound) {
      if (entry.second->count() > 0) s[entry.first] = values.at(entry.first);
    }
    return s;
  }
};

struct Manifest {
  struct Entry {
    fs::path file;
    std::string subject;
    int trial = 0;
    std::string condition;
  };
  std::vector<Entry> trials;
};

Manifest load_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    piw::fail(piw::Errc::MalformedFile, "manifest '" + path.string() + "' is malformed: " + e.what());
  }
  Manifest m;
  try {
    for (const auto& t : doc.at("trials")) {
      Manifest::Entry e;
      e.file = path.parent_path() / t.at("file").get<std::string>();
      e.subject = t.value("subject", "");
      e.trial = t.value("trial", 0);
      e.condition = t.value("condition", "");
      m.trials.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    piw::fail(piw::Errc::MalformedFile, "manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

piw::wlmodel::ModelNormalization load_normalization(const fs::path& path) {
  return piw::json_io::parse_normalization_file(read_file(path));
}

json scenario_json(const piw::sim::SimScenario& s) {
  return json{{"duration", s.duration},
              {"rate_hz", s.rate_hz},
              {"delta_max", s.delta_max},
              {"stick_resolution", s.stick_resolution},
              {"plant", {{"natural_frequency_hz", s.plant.natural_frequency_hz}, {"damping", s.plant.damping}}},
              {"disturbance",
               {{"sd", s.disturbance.sd},
                {"time_constant", s.disturbance.time_constant},
                {"lateral_scale", s.disturbance.lateral_scale},
                {"trial_variability", s.disturbance.trial_variability}}},
              {"pilot",
               {{"proportional_gain", s.pilot.proportional_gain},
                {"derivative_gain", s.pilot.derivative_gain},
                {"reaction_delay", s.pilot.reaction_delay},
                {"remnant_sd", s.pilot.remnant_sd},
                {"remnant_time_constant", s.pilot.remnant_time_constant},
                {"intermittency_threshold", s.pilot.intermittency_threshold},
                {"release_fraction", s.pilot.release_fraction},
                {"trial_variability", s.pilot.trial_variability},
                {"effort_coupling", s.pilot.effort_coupling}}},
              {"high_workload",
               {{"lon_remnant", s.high_workload.lon_remnant},
                {"lon_threshold", s.high_workload.lon_threshold},
                {"lat_remnant", s.high_workload.lat_remnant}}}};
}

void write_trace_file(const fs::path& p, const piw::telemetry::StickTrace& trace) {
  std::ofstream out(p, std::ios::binary);
  if (!out) piw::fail(piw::Errc::Io, "cannot write '" + p.string() + "'");
  piw::telemetry::write_trace_csv(out, trace);
}

std::string pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  return std::string(s.size() < static_cast<std::size_t>(width) ? width - s.size() : 0, '0') + s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stick-input workload metrics, statistics, modelling and streaming"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_version_flag("--version", "piw 1.0.0");

  FlagLayer flags;
  std::string config_path;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  flags.add(&app, "--format", "output.format", "Output format: csv or json");
  flags.add(&app, "--seed", "run.seed", "Seed for stochastic subcommands");
  flags.add_flag(&app, "--keep-going", "run.keep_going", "Skip failing inputs instead of aborting");
  flags.add(&app, "--threads", "run.threads", "Worker threads (0 = all cores)");

  auto add_metric_flags = [&](CLI::App* sub) {
    flags.add(sub, "--thr", "piw.thr", "Rate noise threshold (deflection/s)");
    flags.add(sub, "--delta-max", "piw.delta_max", "Saturation deflection");
    flags.add(sub, "--diff-mode", "piw.diff_mode", "backward or two_step");
    flags.add(sub, "--normalization", "piw.agg_normalization", "exp_inverse, minmax or none");
    flags.add(sub, "--rate", "telemetry.rate_hz", "Resampling rate in Hz");
    flags.add(sub, "--interpolation", "telemetry.interpolation", "linear or nearest");
  };

  // compute
  auto* compute = app.add_subcommand("compute", "Per-trial, per-axis metrics from stick logs");
  std::vector<std::string> compute_files;
  std::string manifest_path, norm_fit_path, fit_out_path, compute_out, compute_condition, compute_subject;
  compute->add_option("files", compute_files, "Stick log CSV files");
  compute->add_option("--manifest", manifest_path, "Simulator manifest supplying files and labels")
      ->check(CLI::ExistingFile);
  compute->add_option("--norm-fit", norm_fit_path, "Use a frozen normalization (fit or model file)")
      ->check(CLI::ExistingFile);
  compute->add_option("--fit-out", fit_out_path, "Write the normalization used to this file");
  compute->add_option("--condition", compute_condition, "Condition label for files without a manifest entry");
  compute->add_option("--subject", compute_subject, "Subject label for files without a manifest entry");
  compute->add_option("-o,--output", compute_out, "Output file (default stdout)");
  add_metric_flags(compute);

  // compare
  auto* compare = app.add_subcommand("compare", "Paired low/high comparison of a metrics table");
  std::string compare_in, compare_out, pairing = "trial";
  double alpha = 0.05;
  std::size_t family = 2;
  compare->add_option("metrics", compare_in, "Metrics table (csv or json)")->required()->check(CLI::ExistingFile);
  compare->add_option("--pairing", pairing, "trial or subject_mean")->check(CLI::IsMember({"trial", "subject_mean"}));
  compare->add_option("--alpha", alpha, "Family-wise alpha")->check(CLI::Range(0.0, 1.0));
  compare->add_option("--family-size", family, "Bonferroni family size")->check(CLI::PositiveNumber);
  compare->add_option("-o,--output", compare_out, "Output file (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "Fit the workload logistic model");
  std::string train_in, model_out, report_out;
  std::vector<std::string> predictors = {"lat_piw1", "lon_piw1"};
  bool standardize = false, no_profile = false;
  double ridge = 0.0;
  train->add_option("metrics", train_in, "Labeled metrics table")->required()->check(CLI::ExistingFile);
  train->add_option("--model-out", model_out, "Model file to write")->required();
  train->add_option("--report", report_out, "Fit report file (format per --format)");
  train->add_option("--predictors", predictors, "Feature names, e.g. lon_piw1")->delimiter(',');
  train->add_flag("--standardize", standardize, "Standardize predictors before fitting");
  train->add_flag("--no-profile", no_profile, "Skip profile-likelihood intervals");
  train->add_option("--ridge", ridge, "L2 penalty on slopes")->check(CLI::NonNegativeNumber);

  // predict
  auto* predict = app.add_subcommand("predict", "Append p_high to a metrics table");
  std::string predict_in, predict_model, predict_out;
  predict->add_option("metrics", predict_in, "Metrics table")->required()->check(CLI::ExistingFile);
  predict->add_option("--model", predict_model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("-o,--output", predict_out, "Output file (default stdout)");

  // stream
  auto* streamc = app.add_subcommand("stream", "Sliding-window estimates over a live record feed");
  std::string listen, stream_model, stream_norm;
  bool use_stdin = false;
  auto* listen_opt = streamc->add_option("--listen", listen, "HOST:PORT to serve on");
  auto* stdin_opt = streamc->add_flag("--stdin", use_stdin, "Read records from stdin, write estimates to stdout");
  listen_opt->excludes(stdin_opt);
  streamc->add_option("--model", stream_model, "Model file for p_high")->check(CLI::ExistingFile);
  streamc->add_option("--norm-fit", stream_norm, "Normalization when no model is given")->check(CLI::ExistingFile);
  flags.add(streamc, "--window", "stream.window", "Window length (s)");
  flags.add(streamc, "--hop", "stream.hop", "Emission period (s)");
  flags.add(streamc, "--warmup", "stream.warmup", "suppress or partial");
  add_metric_flags(streamc);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Synthetic low/high workload stick logs");
  std::string out_dir;
  std::size_t replicates = 50, subjects = 0, block = 4;
  double duration = 210.0, sim_rate = 100.0;
  simulate->add_option("--out-dir", out_dir, "Directory for trace CSVs and manifest.json")->required();
  auto* rep_opt = simulate->add_option("--replicates", replicates, "Low and high trials each");
  auto* subj_opt =
      simulate->add_option("--subjects", subjects, "Protocol mode: subjects x 12 block-randomized trials");
  rep_opt->excludes(subj_opt);
  simulate->add_option("--block-size", block, "Block size in protocol mode");
  simulate->add_option("--duration", duration, "Trial duration (s)")->check(CLI::PositiveNumber);
  simulate->add_option("--sim-rate", sim_rate, "Simulation rate (Hz)")->check(CLI::PositiveNumber);

  // randomize
  auto* randomize = app.add_subcommand("randomize", "Block-randomized trial plan");
  std::size_t n_trials = 12, block_size = 4, nback_stimuli = 0;
  std::string randomize_out;
  randomize->add_option("--trials", n_trials, "Number of trials");
  randomize->add_option("--block-size", block_size, "Block size");
  randomize->add_option("--nback-stimuli", nback_stimuli, "Also emit a 2-back sequence of this length");
  randomize->add_option("-o,--output", randomize_out, "Output file (default stdout)");

  // plotdata
  auto* plot = app.add_subcommand("plotdata", "Scatter and boxplot coordinates from a metrics table");
  std::string plot_in, plot_out;
  plot->add_option("metrics", plot_in, "Metrics table")->required()->check(CLI::ExistingFile);
  plot->add_option("-o,--output", plot_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    std::vector<piw::config::Settings> layers;
    if (!config_path.empty()) layers.push_back(piw::config::load_ini(config_path));
    layers.push_back(piw::config::environment());
    layers.push_back(flags.settings());
    const auto cfg = piw::config::resolve(layers);
    const unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());

    if (*compute) {
      std::vector<Manifest::Entry> entries;
      Manifest manifest;
      if (!manifest_path.empty()) manifest = load_manifest(manifest_path);
      if (compute_files.empty()) {
        entries = manifest.trials;
      } else {
        for (std::size_t i = 0; i < compute_files.size(); ++i) {
          Manifest::Entry e{compute_files[i], compute_subject, static_cast<int>(i + 1), compute_condition};
          for (const auto& m : manifest.trials) {
            if (fs::exists(m.file) && fs::equivalent(m.file, e.file)) e = {e.file, m.subject, m.trial, m.condition};
          }
          entries.push_back(std::move(e));
        }
      }
      if (entries.empty()) piw::fail(piw::Errc::InvalidArgument, "compute needs at least one log file or a manifest");

      std::vector<piw::pipeline::TrialInput> inputs;
      std::size_t failures = 0;
      for (const auto& e : entries) {
        try {
          const auto raw = piw::telemetry::load_log(e.file);
          inputs.push_back({e.file.string(), e.subject, e.trial, e.condition,
                            piw::telemetry::resample(raw, cfg.rate_hz, cfg.interpolation)});
        } catch (const piw::Error& err) {
          ++failures;
          std::cerr << "piw: " << e.file.string() << ": " << err.what() << '\n';
        }
      }
      if (failures && !cfg.keep_going) return kExitData;
      if (inputs.empty()) piw::fail(piw::Errc::EmptyLog, "no readable inputs");

      std::optional<piw::wlmodel::ModelNormalization> frozen;
      if (!norm_fit_path.empty()) frozen = load_normalization(norm_fit_path);
      const auto table = piw::pipeline::compute_metrics(inputs, cfg.piw, frozen ? &*frozen : nullptr, threads);
      if (!fit_out_path.empty()) write_text(fit_out_path, piw::json_io::normalization_file(table.normalization));
      Sink sink(compute_out);
      piw::table::write(sink.stream(), table, cfg.format);
      return 0;
    }

    if (*compare) {
      piw::pipeline::CompareOptions opts;
      opts.pairing = piw::pipeline::parse_pairing(pairing);
      opts.alpha = alpha;
      opts.family_size = family;
      const auto report = piw::pipeline::compare_conditions(piw::table::load(compare_in), opts);
      Sink sink(compare_out);
      piw::pipeline::write_compare(sink.stream(), report, cfg.format);
      return 0;
    }

    if (*train) {
      piw::pipeline::TrainOptions opts;
      opts.predictors = predictors;
      opts.fit.standardize = standardize;
      opts.fit.profile_ci = !no_profile;
      opts.fit.ridge = ridge;
      const auto result = piw::pipeline::train_model(piw::table::load(train_in), opts);
      piw::wlmodel::save_model(result.model, model_out);
      if (!report_out.empty()) {
        Sink sink(report_out);
        piw::pipeline::write_fit_report(sink.stream(), result, cfg.format);
      }
      piw::pipeline::write_fit_summary(std::cout, result);
      if (result.model.separation) {
        std::cerr << "piw: SeparationDetected: coefficients diverge; the model was written but is unreliable\n";
        return kExitNumeric;
      }
      return 0;
    }

    if (*predict) {
      const auto model = piw::wlmodel::load_model(predict_model);
      const auto table = piw::pipeline::predict(piw::table::load(predict_in), model, cfg.piw);
      Sink sink(predict_out);
      piw::table::write(sink.stream(), table, cfg.format);
      return 0;
    }

    if (*streamc) {
      if (listen.empty() && !use_stdin) piw::fail(piw::Errc::InvalidArgument, "stream needs --listen or --stdin");
      auto ctx = std::make_shared<piw::stream::StreamContext>();
      ctx->window = cfg.window;
      ctx->piw = cfg.piw;
      if (!stream_model.empty()) {
        ctx->model = std::make_shared<const piw::wlmodel::LogisticModel>(piw::wlmodel::load_model(stream_model));
      }
      if (!stream_norm.empty()) ctx->normalization = load_normalization(stream_norm);
      ctx->validate();
      if (use_stdin) {
        piw::stream::run_stdio(std::cin, std::cout, ctx);
        return 0;
      }
      piw::stream::Server server(ctx);
      const auto address = piw::stream::parse_listen_address(listen);
      const auto port = server.listen(address);
      std::cerr << "piw: listening on " << address.host << ':' << port << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.start();
      while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      std::cerr << "piw: served " << server.sessions_started() << " sessions\n";
      return 0;
    }

    if (*simulate) {
      piw::sim::SimScenario base;
      base.duration = duration;
      base.rate_hz = sim_rate;
      base.delta_max = cfg.piw.delta_max;
      base.validate();
      fs::create_directories(out_dir);
      json trials = json::array();
      if (*subj_opt) {
        for (std::size_t s = 0; s < subjects; ++s) {
          const auto plan = piw::sim::randomize_trials(12, block, piw::sim::derive_seed(cfg.seed, 3, s));
          const std::string subject = "s" + pad(s + 1, 2);
          for (std::size_t k = 0; k < plan.order.size(); ++k) {
            auto sc = base;
            sc.workload =
                plan.order[k] == piw::sim::Condition::NBack ? piw::sim::Workload::high : piw::sim::Workload::low;
            sc.seed = piw::sim::derive_seed(cfg.seed, 4, s * 1000 + k);
            const std::string condition(piw::sim::workload_name(sc.workload));
            const std::string file = subject + "_t" + pad(k + 1, 2) + "_" + condition + ".csv";
            write_trace_file(fs::path(out_dir) / file, piw::sim::simulate_trial(sc));
            trials.push_back({{"file", file},
                              {"subject", subject},
                              {"trial", k + 1},
                              {"condition", condition},
                              {"task", piw::sim::condition_name(plan.order[k])},
                              {"seed", sc.seed}});
          }
        }
      } else {
        const auto batch = piw::sim::simulate_batch(base, replicates, cfg.seed, threads);
        for (const auto& b : batch) {
          const std::string condition(piw::sim::workload_name(b.workload));
          const std::string file = condition + "_" + pad(b.replicate + 1, 3) + ".csv";
          write_trace_file(fs::path(out_dir) / file, b.trace);
          trials.push_back({{"file", file},
                            {"subject", "sim"},
                            {"trial", b.replicate + 1},
                            {"condition", condition},
                            {"seed", b.seed}});
        }
      }
      json manifest{{"kind", "piw.manifest"},
                    {"version", 1},
                    {"seed", cfg.seed},
                    {"scenario", scenario_json(base)},
                    {"trials", std::move(trials)}};
      write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
      std::cerr << "piw: wrote " << manifest["trials"].size() << " traces to " << out_dir << '\n';
      return 0;
    }

    if (*randomize) {
      const auto plan = piw::sim::randomize_trials(n_trials, block_size, cfg.seed);
      json order = json::array();
      for (const auto c : plan.order) order.push_back(piw::sim::condition_name(c));
      json doc{{"kind", "piw.trial_plan"},
               {"version", 1},
               {"seed", cfg.seed},
               {"block_size", plan.block_size},
               {"order", std::move(order)}};
      if (nback_stimuli > 0) {
        piw::sim::NBackConfig nb;
        nb.seed = piw::sim::derive_seed(cfg.seed, 5, 0);
        json seq = json::array();
        for (const auto& s : piw::sim::generate_nback_sequence(nb, nback_stimuli)) {
          seq.push_back({{"time", s.time}, {"letter", std::string(1, s.letter)}, {"is_target", s.is_target}});
        }
        doc["nback"] = {{"n_back", nb.n_back},
                        {"interval", nb.interval},
                        {"repetition_probability", nb.repetition_probability},
                        {"stimuli", std::move(seq)}};
      }
      Sink sink(randomize_out);
      sink.stream() << doc.dump(2) << '\n';
      return 0;
    }

    if (*plot) {
      const auto data = piw::pipeline::plot_data(piw::table::load(plot_in));
      Sink sink(plot_out);
      piw::pipeline::write_plot_data(sink.stream(), data, cfg.format);
      return 0;
    }
  } catch (const piw::Error& e) {
    std::cerr << "piw: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "piw: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
