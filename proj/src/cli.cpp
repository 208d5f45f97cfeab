// SPDX-License-Identifier: Apache-2.0
#include "hcgst/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hcgst/error.hpp"
#include "hcgst/graph.hpp"
#include "hcgst/orchestrator.hpp"
#include "hcgst/synthgen.hpp"
#include "hcgst/text_io.hpp"

namespace hcgst {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Deferred writes of explicitly given flags into the merged config document.
using Bindings = std::vector<std::function<void(json&)>>;

template <class T>
void bind_flag(CLI::App* app, Bindings& b, const std::string& flag, const std::string& key,
          const std::string& help) {
  auto holder = std::make_shared<T>();
  CLI::Option* opt = app->add_option("--" + flag, *holder, help);
  b.push_back([holder, opt, key](json& j) {
    if (opt->count() > 0) j[key] = *holder;
  });
}

void bind_list(CLI::App* app, Bindings& b, const std::string& flag, const std::string& key,
               const std::string& help) {
  auto holder = std::make_shared<std::vector<std::string>>();
  CLI::Option* opt = app->add_option("--" + flag, *holder, help)->delimiter(',');
  b.push_back([holder, opt, key](json& j) {
    if (opt->count() > 0) j[key] = *holder;
  });
}

void bind_run_config(CLI::App* app, Bindings& b) {
  bind_flag<int>(app, b, "stages", "stages", "Maximum number of self-training stages");
  bind_flag<int>(app, b, "k", "k", "Pseudo nodes per stage (default: labeled count)");
  bind_flag<double>(app, b, "delta-c", "delta_c", "Candidate confidence threshold");
  bind_flag<double>(app, b, "delta-h", "delta_h", "Multi-hop routing threshold");
  bind_flag<double>(app, b, "lambda-s", "lambda_s", "KL weight in the selection loss");
  bind_flag<double>(app, b, "lambda-d", "lambda_d", "Pseudo-head loss weight");
  bind_flag<int>(app, b, "n-bins", "n_bins", "Homophily bins");
  bind_flag<int>(app, b, "hop", "hop", "Hop count for multi-hop labeling");
  bind_flag<std::uint64_t>(app, b, "seed", "seed", "Base seed");
  bind_flag<int>(app, b, "hidden", "hidden", "Hidden width");
  bind_flag<int>(app, b, "patience", "patience", "Stages without validation gain before stopping");
  bind_flag<int>(app, b, "epochs", "epochs", "Training epochs per fit");
  bind_flag<double>(app, b, "learning-rate", "learning_rate", "Adam learning rate");
  bind_flag<double>(app, b, "weight-decay", "weight_decay", "L2 penalty on weights");
  bind_flag<int>(app, b, "selection-iterations", "selection_iterations", "Selection PGD iterations");
  bind_flag<double>(app, b, "selection-step", "selection_step", "Selection PGD step size");
}

void bind_experiment(CLI::App* app, Bindings& b) {
  bind_flag<std::string>(app, b, "graph", "graph", "Graph directory");
  bind_flag<std::string>(app, b, "out", "out", "Output directory");
  bind_flag<int>(app, b, "repeat", "repeat", "Number of seeds (seed, seed+1, ...)");
  bind_flag<int>(app, b, "jobs", "jobs", "Parallel runs");
  bind_list(app, b, "variant", "variants", "Comma-separated variants");
  bind_flag<double>(app, b, "label-rate", "label_rate", "Fraction of nodes in the labeled set");
  bind_flag<std::string>(app, b, "bias", "bias",
                    "Labeled-set sampling: homophily_biased, representative, heterophily_biased");
  bind_flag<std::string>(app, b, "labeled", "labeled", "CSV with a 'node' column; overrides sampling");
  bind_flag<double>(app, b, "validation-rate", "validation_rate", "Fraction of nodes used for validation");
  bind_run_config(app, b);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file " + path.string() + ": " + e.what());
  }
}

json merged_config(const std::string& config_path, const Bindings& bindings) {
  json j = config_path.empty() ? json::object() : read_json_file(config_path);
  if (!j.is_object()) throw InputError("config file must hold a JSON object");
  for (const auto& apply : bindings) apply(j);
  return j;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string csv_number(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
  return format_double(v.get<double>());
}

// ---- experiment description ----

struct Experiment {
  fs::path graph_dir;
  fs::path out_dir;
  int repeat = 1;
  int jobs = 1;
  std::vector<Variant> variants{Variant::kHcgst};
  double label_rate = 0.02;
  BiasMode bias = BiasMode::kRepresentative;
  std::string labeled_file;
  double validation_rate = 0.1;
  RunConfig run;
};

Experiment experiment_from_json(json j) {
  Experiment e;
  if (j.contains("variant") && j["variant"].is_string()) {
    j["variants"] = json::array({j["variant"]});
  }
  j.erase("variant");
  e.graph_dir = get_or<std::string>(j, "graph", "");
  e.out_dir = get_or<std::string>(j, "out", "results");
  e.repeat = get_or(j, "repeat", e.repeat);
  e.jobs = get_or(j, "jobs", e.jobs);
  if (j.contains("variants")) {
    e.variants.clear();
    for (const auto& name : get_or<std::vector<std::string>>(j, "variants", {})) {
      e.variants.push_back(parse_variant(name));
    }
    if (e.variants.empty()) throw InputError("no variants given");
  }
  e.label_rate = get_or(j, "label_rate", e.label_rate);
  e.bias = parse_bias_mode(get_or<std::string>(j, "bias", to_string(e.bias)));
  e.labeled_file = get_or<std::string>(j, "labeled", "");
  e.validation_rate = get_or(j, "validation_rate", e.validation_rate);
  e.run = run_config_from_json(j);

  if (e.graph_dir.empty()) throw InputError("--graph is required");
  if (e.repeat < 1) throw InputError("repeat must be >= 1");
  if (e.jobs < 1) throw InputError("jobs must be >= 1");
  if (!(e.validation_rate >= 0.0 && e.validation_rate < 1.0)) {
    throw InputError("validation_rate must lie in [0, 1)");
  }
  e.run.validate();
  return e;
}

std::vector<NodeId> read_labeled_file(const fs::path& path, const Graph& graph) {
  const CsvRows rows = read_csv(path, true);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const long long v = parse_int(rows[i][0], i);
    if (v < 0 || static_cast<std::size_t>(v) >= graph.num_nodes()) {
      throw RecordError("labeled node out of range", i);
    }
    out.push_back(static_cast<NodeId>(v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct SeedSetup {
  std::uint64_t seed = 0;
  NodePartition partition{0, {}, {}};
  int fallback_events = 0;
};

SeedSetup make_seed_setup(const Experiment& e, const Graph& graph, std::uint64_t seed) {
  SeedSetup s;
  s.seed = seed;
  std::vector<NodeId> labeled;
  if (!e.labeled_file.empty()) {
    labeled = read_labeled_file(e.labeled_file, graph);
  } else {
    TrainingSample sample = sample_training_set(graph, e.label_rate, e.bias, e.run.n_bins, seed);
    labeled = std::move(sample.nodes);
    s.fallback_events = sample.fallback_events;
  }
  const auto validation_count = static_cast<std::size_t>(
      std::floor(e.validation_rate * static_cast<double>(graph.num_nodes())));
  // Distinct stream from the labeled-set sampler.
  s.partition = make_partition(graph, std::move(labeled), validation_count,
                               seed ^ 0x9e3779b97f4a7c15ULL);
  return s;
}

struct RunTask {
  Variant variant;
  std::size_t setup;
};

/// Runs every (variant, seed) pair of the experiment and writes all outputs
/// into `out`. Returns the run documents in canonical order.
std::vector<json> execute(const Experiment& e, const Graph& graph, const fs::path& out) {
  fs::create_directories(out);
  std::vector<SeedSetup> setups;
  for (int r = 0; r < e.repeat; ++r) {
    setups.push_back(make_seed_setup(e, graph, e.run.seed + static_cast<std::uint64_t>(r)));
  }
  std::vector<RunTask> tasks;
  for (Variant v : e.variants) {
    for (std::size_t i = 0; i < setups.size(); ++i) tasks.push_back({v, i});
  }

  std::vector<json> docs(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const SeedSetup& setup = setups[tasks[t].setup];
        RunConfig cfg = e.run;
        cfg.variant = tasks[t].variant;
        cfg.seed = setup.seed;
        const std::string tag = to_string(cfg.variant) + "/" + std::to_string(cfg.seed);
        auto warn = [&](const std::string& msg) {
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "warning [" << tag << "]: " << msg << '\n';
        };
        const RunOutcome outcome = run_variant(graph, setup.partition, cfg, warn);
        json doc = to_json(outcome.report);
        doc["variant"] = to_string(cfg.variant);
        doc["seed"] = cfg.seed;
        doc["labeled"] = setup.partition.labeled();
        doc["validation_count"] = setup.partition.validation().size();
        doc["sampling_fallback_events"] = setup.fallback_events;
        doc["timestamp"] = timestamp_utc();
        docs[t] = std::move(doc);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(e.jobs, static_cast<int>(tasks.size()));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const std::string name = "run_" + docs[t]["variant"].get<std::string>() + "_" +
                             std::to_string(docs[t]["seed"].get<std::uint64_t>()) + ".json";
    write_text(out / name, docs[t].dump(2) + "\n");
  }
  write_aggregate_csv(docs, out / "aggregate.csv");
  write_stages_csv(docs, out / "stages.csv");
  write_bins_csv(docs, out / "bins.csv");
  return docs;
}

std::size_t variant_rank(const json& doc) {
  const Variant v = parse_variant(doc.at("variant").get<std::string>());
  const auto& all = all_variants();
  return static_cast<std::size_t>(std::find(all.begin(), all.end(), v) - all.begin());
}

std::vector<const json*> canonical_order(const std::vector<json>& runs) {
  std::vector<const json*> order;
  for (const json& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const json* a, const json* b) {
    const auto ra = variant_rank(*a), rb = variant_rank(*b);
    if (ra != rb) return ra < rb;
    return a->at("seed").get<std::uint64_t>() < b->at("seed").get<std::uint64_t>();
  });
  return order;
}

struct MeanStd {
  double mean = 0.0;
  double stdev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.stdev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

const char* const kMetricKeys[] = {"acc", "tpv", "npv", "ppv"};

/// variant -> metric -> per-seed values, variants in canonical order.
std::vector<std::pair<std::string, std::map<std::string, std::vector<double>>>> collect_metrics(
    const std::vector<json>& runs) {
  std::vector<std::pair<std::string, std::map<std::string, std::vector<double>>>> out;
  for (const json* r : canonical_order(runs)) {
    const std::string v = r->at("variant").get<std::string>();
    if (out.empty() || out.back().first != v) out.push_back({v, {}});
    for (const char* key : kMetricKeys) {
      out.back().second[key].push_back(r->at("metrics").at(key).get<double>());
    }
  }
  return out;
}

std::string aggregate_header() {
  std::string h = "variant,runs";
  for (const char* key : kMetricKeys) h += std::string(",") + key + "_mean," + key + "_std";
  return h;
}

std::string aggregate_row(const std::string& variant,
                          const std::map<std::string, std::vector<double>>& metrics) {
  std::string row = variant + "," + std::to_string(metrics.at("acc").size());
  for (const char* key : kMetricKeys) {
    const MeanStd m = mean_std(metrics.at(key));
    row += "," + format_double(m.mean) + "," + format_double(m.stdev);
  }
  return row;
}

std::vector<json> load_run_docs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("run_", 0) == 0 && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no run_*.json files in " + dir.string());
  std::vector<json> docs;
  for (const auto& f : files) {
    json doc = read_json_file(f);
    if (!doc.contains("variant") || !doc.contains("seed") || !doc.contains("metrics")) {
      throw InputError(f.string() + " is not a run document");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string format_grid_value(double v) { return format_double(v); }

// ---- commands ----

int cmd_generate(const json& j) {
  json synth = j;
  SynthConfig cfg = synth_config_from_json(synth);
  cfg.validate();
  const fs::path out = get_or<std::string>(j, "out", "synthetic");
  fs::create_directories(out);
  const Graph graph = generate_graph(cfg);
  write_synthetic(cfg, graph, out);
  std::cout << "wrote " << graph.num_nodes() << " nodes, " << graph.num_edges() << " edges, h(G)="
            << format_double(graph_homophily(graph)) << " to " << out.string() << '\n';
  return kExitOk;
}

void print_aggregate(const std::vector<json>& docs) {
  std::cout << aggregate_header() << '\n';
  for (const auto& [variant, metrics] : collect_metrics(docs)) {
    std::cout << aggregate_row(variant, metrics) << '\n';
  }
}

int cmd_run(const json& j) {
  const Experiment e = experiment_from_json(j);
  const Graph graph = load_graph_dir(e.graph_dir);
  print_aggregate(execute(e, graph, e.out_dir));
  return kExitOk;
}

int cmd_sweep(const json& j, const std::string& param, const std::vector<double>& values_in) {
  const std::vector<double> grid = default_sweep_grid(param);  // rejects unknown parameters
  const std::vector<double>& values = values_in.empty() ? grid : values_in;
  const Experiment base = experiment_from_json(j);
  const Graph graph = load_graph_dir(base.graph_dir);
  std::ostringstream csv;
  csv << "param,value," << aggregate_header() << '\n';
  for (double value : values) {
    json jv = j;
    jv[param] = value;
    const Experiment e = experiment_from_json(jv);
    const fs::path sub = e.out_dir / (param + "_" + format_grid_value(value));
    const std::vector<json> docs = execute(e, graph, sub);
    for (const auto& [variant, metrics] : collect_metrics(docs)) {
      csv << param << ',' << format_double(value) << ',' << aggregate_row(variant, metrics) << '\n';
    }
  }
  fs::create_directories(base.out_dir);
  write_text(base.out_dir / ("sweep_" + param + ".csv"), csv.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_report(const fs::path& in, const fs::path& out_arg) {
  const std::vector<json> docs = load_run_docs(in);
  const fs::path out = out_arg.empty() ? in : out_arg;
  fs::create_directories(out);
  write_aggregate_csv(docs, out / "aggregate.csv");
  write_stages_csv(docs, out / "stages.csv");
  write_bins_csv(docs, out / "bins.csv");
  print_aggregate(docs);
  return kExitOk;
}

}  // namespace

std::vector<double> default_sweep_grid(const std::string& param) {
  std::vector<double> grid;
  if (param == "lambda_s") {
    for (int i = 0; i < 8; ++i) grid.push_back((13 + 2 * i) / 10.0);
  } else if (param == "lambda_d") {
    for (int i = 7; i <= 14; ++i) grid.push_back(i / 100.0);
  } else if (param == "delta_h") {
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  } else {
    throw InputError("unknown sweep parameter '" + param + "' (expected lambda_s, lambda_d or delta_h)");
  }
  return grid;
}

void write_stages_csv(const std::vector<json>& runs, const fs::path& path) {
  std::ostringstream os;
  os << "variant,seed,stage,skipped,candidates,selected,multi_hop_routed,pseudo_total,"
        "pseudo_mean_est_homophily,pseudo_mean_true_homophily,global_mean_est_homophily,"
        "kl_local_global,kl_local_global_true,cmd_local_global,pseudo_label_accuracy,"
        "validation_accuracy,test_accuracy\n";
  for (const json* r : canonical_order(runs)) {
    for (const json& s : r->at("stages")) {
      os << r->at("variant").get<std::string>() << ',' << r->at("seed").dump() << ','
         << s.at("stage").dump() << ',' << csv_number(s.at("skipped")) << ','
         << s.at("candidates").dump() << ',' << s.at("selected").size() << ','
         << s.at("multi_hop_routed").dump() << ',' << s.at("pseudo_total").dump();
      for (const char* key :
           {"pseudo_mean_est_homophily", "pseudo_mean_true_homophily", "global_mean_est_homophily",
            "kl_local_global", "kl_local_global_true", "cmd_local_global", "pseudo_label_accuracy",
            "validation_accuracy", "test_accuracy"}) {
        os << ',' << csv_number(s.at(key));
      }
      os << '\n';
    }
  }
  write_text(path, os.str());
}

void write_bins_csv(const std::vector<json>& runs, const fs::path& path) {
  std::ostringstream os;
  os << "variant,seed,bin,lower,upper,count,backbone_accuracy,self_trained_accuracy,delta\n";
  for (const json* r : canonical_order(runs)) {
    const json& bins = r->at("bins");
    const json& counts = bins.at("backbone").at("count");
    const std::size_t n = counts.size();
    for (std::size_t b = 0; b < n; ++b) {
      const bool empty = counts[b].get<std::size_t>() == 0;
      os << r->at("variant").get<std::string>() << ',' << r->at("seed").dump() << ',' << b << ','
         << format_double(static_cast<double>(b) / static_cast<double>(n)) << ','
         << format_double(static_cast<double>(b + 1) / static_cast<double>(n)) << ','
         << counts[b].dump() << ',' << csv_number(bins.at("backbone").at("accuracy")[b]) << ','
         << csv_number(bins.at("self_trained").at("accuracy")[b]) << ','
         << (empty ? std::string() : csv_number(bins.at("delta")[b])) << '\n';
    }
  }
  write_text(path, os.str());
}

void write_aggregate_csv(const std::vector<json>& runs, const fs::path& path) {
  std::ostringstream os;
  os << aggregate_header() << '\n';
  for (const auto& [variant, metrics] : collect_metrics(runs)) {
    os << aggregate_row(variant, metrics) << '\n';
  }
  write_text(path, os.str());
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Homophily-consistent graph self-training"};
  app.require_subcommand(1);

  std::string config_path;
  Bindings gen_bind, run_bind, sweep_bind;

  CLI::App* gen = app.add_subcommand("generate", "Write a seeded synthetic graph directory");
  gen->add_option("--config", config_path, "JSON config file; flags override its values");
  bind_flag<int>(gen, gen_bind, "n", "n", "Node count");
  bind_flag<int>(gen, gen_bind, "classes", "classes", "Class count");
  bind_flag<int>(gen, gen_bind, "feature-dim", "feature_dim", "Feature dimension");
  bind_flag<double>(gen, gen_bind, "mean-degree", "mean_degree", "Mean node degree");
  {
    auto holder = std::make_shared<std::vector<double>>();
    CLI::Option* opt = gen->add_option("--histogram", *holder, "Comma-separated target histogram")
                           ->delimiter(',');
    gen_bind.push_back([holder, opt](json& j) {
      if (opt->count() > 0) j["target_histogram"] = *holder;
    });
  }
  bind_flag<double>(gen, gen_bind, "separation", "separation", "Class-mean separation");
  bind_flag<bool>(gen, gen_bind, "paired-classes", "paired_classes",
                  "Restrict cross-class edges to class pairs (0-1, 2-3, ...)");
  bind_flag<std::uint64_t>(gen, gen_bind, "seed", "seed", "Seed");
  bind_flag<std::string>(gen, gen_bind, "out", "out", "Output directory");

  CLI::App* run = app.add_subcommand("run", "Run variants over seeds and write reports");
  run->add_option("--config", config_path, "JSON config file; flags override its values");
  bind_experiment(run, run_bind);

  std::string sweep_param;
  std::vector<double> sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "Repeat `run` over a parameter grid");
  sweep->add_option("--config", config_path, "JSON config file; flags override its values");
  sweep->add_option("--param", sweep_param, "lambda_s, lambda_d or delta_h")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values (default grid otherwise)")
      ->delimiter(',');
  bind_experiment(sweep, sweep_bind);

  std::string report_in, report_out;
  CLI::App* report = app.add_subcommand("report", "Rebuild CSV summaries from run_*.json files");
  report->add_option("--in", report_in, "Directory with run documents")->required();
  report->add_option("--out", report_out, "Output directory (default: --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (gen->parsed()) return cmd_generate(merged_config(config_path, gen_bind));
    if (run->parsed()) return cmd_run(merged_config(config_path, run_bind));
    if (sweep->parsed()) {
      return cmd_sweep(merged_config(config_path, sweep_bind), sweep_param, sweep_values);
    }
    if (report->parsed()) return cmd_report(report_in, report_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const RuntimeFailure& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitInput;
}

}  // namespace hcgst
