#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "nsbm/checkpoint.hpp"
#include "nsbm/classic_sbm.hpp"
#include "nsbm/error.hpp"
#include "nsbm/metrics.hpp"

namespace nsbm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpoint = "checkpoint.nsbm";

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string require_dir(const std::string& dir, const char* what) {
  if (dir.empty()) throw ConfigError(std::string("missing ") + what + " directory");
  return dir;
}

void ensure_out(const RunConfig& cfg) {
  require_dir(cfg.paths_out, "output");
  fs::create_directories(cfg.paths_out);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> snapshot(const ParameterStore& store) {
  std::vector<double> out;
  for (const auto& p : store) out.insert(out.end(), p->value.values().begin(), p->value.values().end());
  return out;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// ---------------------------------------------------------------- data ---

json manifest(const std::string& dir, const std::string& kind) {
  const json m = read_json(join(dir, "manifest.json"));
  if (m.value("kind", "") != kind) {
    throw ConfigError("dataset in " + dir + " is '" + m.value("kind", "?") + "', this task needs '" + kind + "'");
  }
  return m;
}

Graph load_graph(const std::string& dir, const std::string& stem) {
  Graph g = load_edge_list(join(dir, stem + ".tsv"));
  if (fs::exists(join(dir, stem + "_labels.tsv"))) load_labels(g, join(dir, stem + "_labels.tsv"));
  if (fs::exists(join(dir, stem + "_features.csv"))) load_features(g, join(dir, stem + "_features.csv"));
  return g;
}

void save_graph(const Graph& g, const std::string& dir, const std::string& stem) {
  save_edge_list(g, join(dir, stem + ".tsv"));
  if (g.has_labels()) save_labels(g, join(dir, stem + "_labels.tsv"));
  if (g.features) save_features(g, join(dir, stem + "_features.csv"));
}

std::size_t numeric_dim(const Graph& g) { return g.features ? g.features->cols() : 0; }

std::vector<AnomalyWindow> load_windows(const std::string& dir) {
  manifest(dir, "anomaly");
  const json truth = read_json(join(dir, "truth.json"));
  std::vector<AnomalyWindow> out;
  for (const auto& w : truth.at("windows")) {
    AnomalyWindow aw;
    aw.data = load_matrix_csv(join(dir, w.at("file").get<std::string>())).first;
    aw.injected = w.at("injected").get<bool>();
    aw.sets = w.at("sets").get<std::vector<std::vector<std::size_t>>>();
    out.push_back(std::move(aw));
  }
  if (out.empty()) throw ParseError(join(dir, "truth.json") + ": no windows");
  return out;
}

WindowTruth window_truth(const AnomalyWindow& w) {
  WindowTruth t;
  t.injected = w.injected;
  for (const auto& s : w.sets) t.members.insert(t.members.end(), s.begin(), s.end());
  std::sort(t.members.begin(), t.members.end());
  t.members.erase(std::unique(t.members.begin(), t.members.end()), t.members.end());
  return t;
}

json anomaly_json(const AnomalyEvalResult& r) {
  return {{"alert_recall", r.alert_recall}, {"anomaly_recall", r.anomaly_recall}, {"accuracy", r.accuracy},
          {"false_alarms", r.false_alarms}, {"injected", r.injected},             {"clean", r.clean}};
}

json community_json(const CommunityEvalResult& r) {
  return {{"avg_precision", r.avg_precision}, {"macro_f1", r.macro_f1}, {"nmi", r.nmi},
          {"precision", r.precision},         {"recall", r.recall},     {"f1", r.f1}};
}

// -------------------------------------------------------------- models ---

struct CommunitySetup {
  Graph g;
  ParameterStore store;
  GraphView view;
  NsbmModel model;

  CommunitySetup(const RunConfig& cfg, const std::string& dir) : g(load_graph(dir, "graph")) {
    const ModelConfig mc = cfg.model_config(numeric_dim(g));
    Rng rng(cfg.seed, 11);
    view = make_view(g, mc, store, rng);
    model = NsbmModel(view.encoder.dim(), mc, store, rng);
  }
};

struct AlignSetup {
  Graph g1, g2;
  std::vector<std::pair<NodeId, NodeId>> truth;
  ParameterStore store;
  GraphView v1, v2;
  NsbmModel model;
  AlignmentHead head;

  AlignSetup(const RunConfig& cfg, const std::string& dir) : g1(load_graph(dir, "g1")), g2(load_graph(dir, "g2")) {
    if (numeric_dim(g1) != numeric_dim(g2)) throw ShapeError("g1 and g2 have different attribute widths");
    if (fs::exists(join(dir, "truth.tsv"))) truth = load_alignment_truth(join(dir, "truth.tsv"), g1, g2);
    const ModelConfig mc = cfg.model_config(numeric_dim(g1));
    Rng rng(cfg.seed, 11);
    v1 = make_view(g1, mc, store, rng, "g1.attr");
    v2 = make_view(g2, mc, store, rng, "g2.attr");
    model = NsbmModel(v1.encoder.dim(), mc, store, rng);
    head = AlignmentHead::create(store, model.embedder().out_dim(), cfg.align_dim, cfg.model_alpha, cfg.align_tied,
                                 rng);
  }
};

struct AnomalySetup {
  std::vector<AnomalyWindow> windows;
  ParameterStore store;
  std::optional<AnomalyDetector> detector;

  AnomalySetup(const RunConfig& cfg, const std::string& dir) : windows(load_windows(dir)) {
    Rng rng(cfg.seed, 11);
    detector.emplace(cfg.detector_config(), store, rng);
  }
};

json checkpoint_meta(const RunConfig& cfg, const std::string& task) {
  return {{"task", task}, {"config", cfg.echo()}};
}

json load_for_eval(const RunConfig& cfg, const std::string& task, ParameterStore& store) {
  if (cfg.paths_checkpoint.empty()) throw ConfigError("missing --checkpoint");
  json meta = load_checkpoint(cfg.paths_checkpoint, store, nullptr);
  if (meta.value("task", "") != task) {
    throw ConfigError("checkpoint was trained for task '" + meta.value("task", "?") + "', not '" + task + "'");
  }
  return meta;
}

void check_task(const std::string& task) {
  if (task != "none" && task != "align" && task != "anomaly") {
    throw ConfigError("unknown task '" + task + "' (expected none, align or anomaly)");
  }
}

}  // namespace

// ------------------------------------------------------------ generate ---

void generate(const RunConfig& cfg) {
  ensure_out(cfg);
  const std::string& dir = cfg.paths_out;
  json m = {{"kind", cfg.data_kind}, {"config", cfg.echo()}};
  if (cfg.data_kind == "planted") {
    const Graph g = planted_partition(cfg.planted_spec());
    save_graph(g, dir, "graph");
    m["nodes"] = g.num_nodes();
    m["edges"] = g.num_edges();
  } else if (cfg.data_kind == "alignment") {
    const AlignmentPair p = perturb_pair(cfg.alignment_spec());
    save_graph(p.g1, dir, "g1");
    save_graph(p.g2, dir, "g2");
    std::vector<std::pair<NodeId, NodeId>> truth;
    for (NodeId v = 0; v < p.truth.size(); ++v) truth.emplace_back(v, p.truth[v]);
    save_alignment_truth(truth, p.g1, p.g2, join(dir, "truth.tsv"));
    m["nodes"] = p.g1.num_nodes();
    m["flips"] = p.flips;
  } else {
    const auto windows = synth_anomaly_windows(cfg.anomaly_scenario());
    fs::create_directories(join(dir, "windows"));
    json list = json::array();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "windows/%04zu.csv", i);
      save_matrix_csv(windows[i].data, {}, join(dir, name));
      list.push_back({{"file", name}, {"injected", windows[i].injected}, {"sets", windows[i].sets}});
    }
    write_json(join(dir, "truth.json"), {{"windows", list}});
    m["windows"] = windows.size();
  }
  write_json(join(dir, "manifest.json"), m);
}

// --------------------------------------------------------------- train ---

void train(const RunConfig& cfg, const std::string& task, const std::string& resume) {
  check_task(task);
  const std::string data = require_dir(cfg.paths_data, "data");
  if (!resume.empty() && task != "none") throw ConfigError("--resume is only supported with --task none");
  ensure_out(cfg);
  const std::string ckpt = join(cfg.paths_out, kCheckpoint);
  std::ofstream csv(join(cfg.paths_out, "loss.csv"));
  if (!csv) throw Error("cannot write " + join(cfg.paths_out, "loss.csv"));
  json meta = checkpoint_meta(cfg, task);

  if (task == "none") {
    manifest(data, "planted");
    CommunitySetup s(cfg, data);
    Trainer trainer(s.model, s.view, s.store, cfg.train_config());
    if (!resume.empty()) {
      const json prev = load_checkpoint(resume, s.store, &trainer.optimizer());
      if (prev.value("task", "") != "none") throw ConfigError("cannot resume from a '" + prev.value("task", "?") + "' checkpoint");
      trainer.restore(prev.at("trainer"));
    } else if (cfg.train_warmup_epochs > 0) {
      TrainConfig wc = cfg.train_config();
      wc.epochs = cfg.train_warmup_epochs;
      wc.weights = {0.0, 0.0, 1.0, 0.0};
      wc.seed = cfg.seed ^ 0x5741524dULL;
      std::ofstream wcsv(join(cfg.paths_out, "warmup_loss.csv"));
      wcsv << loss_csv_header() << '\n';
      Trainer warm(s.model, s.view, s.store, wc);
      warm.run([&](const StepRecord& r) { wcsv << loss_csv_row(r) << '\n'; });
      Rng krng(cfg.seed, 99);
      init_membership_from_clusters(s.model, s.view, kmeans(s.model.embeddings(s.view), cfg.model_K, krng));
    }
    csv << loss_csv_header() << '\n';
    trainer.run([&](const StepRecord& r) { csv << loss_csv_row(r) << '\n' << std::flush; });
    meta["trainer"] = trainer.state();
    save_checkpoint(ckpt, s.store, &trainer.optimizer(), meta);
  } else if (task == "align") {
    manifest(data, "alignment");
    AlignSetup s(cfg, data);
    const auto n_labels = static_cast<std::size_t>(std::llround(cfg.align_label_fraction * static_cast<double>(s.truth.size())));
    std::vector<std::pair<NodeId, NodeId>> labels(s.truth.begin(),
                                                  s.truth.begin() + static_cast<long>(std::min(n_labels, s.truth.size())));
    AlignmentTrainer trainer(s.model, s.head, s.v1, s.v2, s.store, cfg.align_config(), labels);
    csv << "step,community_only,community_align,node_align,labels,g1_total,g2_total,total\n";
    trainer.run([&](const AlignmentStep& r) {
      csv << r.step << ',' << (r.community_only ? 1 : 0) << ',' << num(r.community_align) << ',' << num(r.node_align)
          << ',' << num(r.labels) << ',' << num(r.g1.total) << ',' << num(r.g2.total) << ',' << num(r.total) << '\n'
          << std::flush;
    });
    meta["labels_used"] = labels.size();
    save_checkpoint(ckpt, s.store, &trainer.optimizer(), meta);
  } else {
    AnomalySetup s(cfg, data);
    csv << "step,window,sbm,entropy,link,labels,pca,total\n";
    train_detector(*s.detector, s.store, s.windows, cfg.detector_train_config(), [&](const DetectorStep& r) {
      csv << r.step << ',' << r.window << ',' << num(r.loss.sbm) << ',' << num(r.loss.entropy) << ','
          << num(r.loss.link) << ',' << (r.loss.labels ? num(*r.loss.labels) : "") << ',' << num(r.pca) << ','
          << num(r.loss.total) << '\n'
          << std::flush;
    });
    meta["theta_corr"] = s.detector->theta_corr();
    save_checkpoint(ckpt, s.store, nullptr, meta);
  }
  cfg.save(join(cfg.paths_out, "config.cfg"));
}

// ---------------------------------------------------------------- eval ---

void evaluate(const RunConfig& cfg, const std::string& task, bool oracle) {
  check_task(task);
  const std::string data = require_dir(cfg.paths_data, "data");
  ensure_out(cfg);
  if (cfg.paths_checkpoint.empty()) throw ConfigError("missing --checkpoint");
  const std::string hash_before = file_hash(cfg.paths_checkpoint);
  json report = {{"task", task}, {"config", cfg.echo()}, {"checkpoint_fnv1a", hash_before}};
  std::ostringstream timing;
  timing << "item,seconds\n";
  std::vector<double> before, after;

  if (task == "none") {
    manifest(data, "planted");
    CommunitySetup s(cfg, data);
    load_for_eval(cfg, task, s.store);
    before = snapshot(s.store);
    std::ostringstream rows;
    Tensor Z(s.g.num_nodes(), s.model.config().columns());
    for (NodeId v = 0; v < s.g.num_nodes(); ++v) {
      const Timer t;
      Tape tape;
      const NodeId one[1] = {v};
      const Tensor z = s.model.membership(tape, s.model.embed(tape, s.view, one)).value();
      for (std::size_t k = 0; k < Z.cols(); ++k) Z(v, k) = z(0, k);
      timing << s.g.id_of(v) << ',' << num(t.seconds()) << '\n';
    }
    const auto labels = argmax_rows(Z);
    rows << "node,community";
    for (std::size_t k = 0; k < Z.cols(); ++k) rows << ",z" << k;
    rows << '\n';
    for (NodeId v = 0; v < Z.rows(); ++v) {
      rows << s.g.id_of(v) << ',' << labels[v];
      for (std::size_t k = 0; k < Z.cols(); ++k) rows << ',' << num(Z(v, k));
      rows << '\n';
    }
    write_text(join(cfg.paths_out, "assignments.csv"), rows.str());
    std::vector<std::size_t> sizes(Z.cols(), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    report["community_sizes"] = sizes;
    report["metrics"] = s.g.has_labels() ? community_json(community_metrics(Z, s.g.labels)) : json(nullptr);
    report["nodes"] = s.g.num_nodes();
    after = snapshot(s.store);
  } else if (task == "align") {
    manifest(data, "alignment");
    AlignSetup s(cfg, data);
    load_for_eval(cfg, task, s.store);
    before = snapshot(s.store);
    const Timer t;
    const Tensor P1 = project(s.model, s.v1, s.head.l1);
    const Tensor P2 = project(s.model, s.v2, s.head.l2);
    const Matching m = match_nodes(P1, P2, std::max<std::size_t>(cfg.align_k, 1));
    const double per_node = t.seconds() / static_cast<double>(std::max<std::size_t>(P1.rows(), 1));
    for (NodeId v = 0; v < P1.rows(); ++v) timing << s.g1.id_of(v) << ',' << num(per_node) << '\n';
    save_matching(m, s.g1, s.g2, join(cfg.paths_out, "matching.tsv"));
    report["nodes"] = {s.g1.num_nodes(), s.g2.num_nodes()};
    report["metrics"] = s.truth.empty() ? json(nullptr)
                                        : json{{"top1_accuracy", alignment_accuracy(top1(m), s.truth)},
                                               {"truth_pairs", s.truth.size()}};
    after = snapshot(s.store);
  } else {
    AnomalySetup s(cfg, data);
    const json meta = load_for_eval(cfg, task, s.store);
    s.detector->set_theta_corr(meta.at("theta_corr").get<double>());
    before = snapshot(s.store);
    std::vector<WindowOutcome> outcomes;
    std::vector<WindowTruth> truths;
    json per_window = json::array();
    std::ostringstream rows;
    rows << "window,injected,alarmed,max_approx" << (oracle ? ",max_exact" : "") << '\n';
    for (std::size_t i = 0; i < s.windows.size(); ++i) {
      const Timer t;
      const AnomalyReport rep = s.detector->monitor(s.windows[i].data, oracle);
      timing << i << ',' << num(t.seconds()) << '\n';
      outcomes.push_back({rep.alarmed(), rep.detected()});
      truths.push_back(window_truth(s.windows[i]));
      json sets = json::array();
      double max_approx = 0.0, max_exact = 0.0;
      for (const auto& set : rep.sets) {
        json js = {{"label", set.label}, {"members", set.members}, {"alarm", set.alarm}};
        js["approx"] = set.approx ? json(*set.approx) : json(nullptr);
        if (oracle) js["exact"] = set.exact ? json(*set.exact) : json(nullptr);
        if (set.approx) max_approx = std::max(max_approx, *set.approx);
        if (set.exact) max_exact = std::max(max_exact, *set.exact);
        sets.push_back(js);
      }
      per_window.push_back({{"window", i}, {"alarmed", rep.alarmed()}, {"sets", sets}});
      rows << i << ',' << (s.windows[i].injected ? 1 : 0) << ',' << (rep.alarmed() ? 1 : 0) << ',' << num(max_approx);
      if (oracle) rows << ',' << num(max_exact);
      rows << '\n';
    }
    write_text(join(cfg.paths_out, "windows.csv"), rows.str());
    report["theta_corr"] = s.detector->theta_corr();
    report["metrics"] = anomaly_json(anomaly_metrics(outcomes, truths));
    report["windows"] = per_window;
    after = snapshot(s.store);
  }

  // Evaluation is a pure forward pass.
  if (after != before || file_hash(cfg.paths_checkpoint) != hash_before) {
    throw Error("eval changed the model parameters or the checkpoint file");
  }
  report["optimizer_steps"] = 0;
  write_json(join(cfg.paths_out, "metrics.json"), report);
  write_text(join(cfg.paths_out, "timing.csv"), timing.str());
}

// ------------------------------------------------------------ baseline ---

void baseline(const RunConfig& cfg, const std::string& which) {
  const std::string data = require_dir(cfg.paths_data, "data");
  ensure_out(cfg);
  json report = {{"baseline", which}, {"config", cfg.echo()}};
  if (which == "sbm") {
    manifest(data, "planted");
    const Graph g = load_graph(data, "graph");
    Rng rng(cfg.seed, 0x5B);
    const SbmFit fit = fit_sbm(g, cfg.model_K, rng);
    std::vector<int> z(fit.z.begin(), fit.z.end());
    report["log_likelihood"] = fit.log_likelihood;
    report["sweeps"] = fit.sweeps;
    report["labels"] = z;
    report["metrics"] = g.has_labels() ? community_json(community_metrics(one_hot(z, cfg.model_K), g.labels))
                                       : json(nullptr);
  } else if (which == "pca") {
    const auto windows = load_windows(data);
    std::vector<WindowOutcome> outcomes;
    std::vector<WindowTruth> truths;
    json per_window = json::array();
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const AnomalyReport rep = pca_baseline(windows[i].data, cfg.anomaly_theta, cfg.anomaly_pca_mass);
      outcomes.push_back({rep.alarmed(), rep.detected()});
      truths.push_back(window_truth(windows[i]));
      const auto& set = rep.sets.front();
      per_window.push_back({{"window", i},
                            {"alarmed", rep.alarmed()},
                            {"members", set.members},
                            {"exact", set.exact ? json(*set.exact) : json(nullptr)}});
    }
    report["metrics"] = anomaly_json(anomaly_metrics(outcomes, truths));
    report["windows"] = per_window;
  } else {
    throw ConfigError("unknown baseline '" + which + "' (expected sbm or pca)");
  }
  write_json(join(cfg.paths_out, "metrics.json"), report);
}

// ------------------------------------------------------------- command ---

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural SBM toolkit: generate data, train, evaluate and run baselines."};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir, data, checkpoint, task = "none", resume, which;
    std::vector<std::string> sets;
    bool oracle = false;
  } o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file");
    sub->add_option("--seed", o.seed, "overrides the seed key");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--set", o.sets, "key=value override, repeatable");
  };
  CLI::App* gen = app.add_subcommand("generate", "write a synthetic dataset");
  common(gen);
  CLI::App* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  common(tr);
  tr->add_option("--data", o.data, "dataset directory");
  tr->add_option("--task", o.task, "none | align | anomaly");
  tr->add_option("--resume", o.resume, "continue from this checkpoint (task none)");
  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  common(ev);
  ev->add_option("--data", o.data, "dataset directory");
  ev->add_option("--checkpoint", o.checkpoint, "checkpoint file");
  ev->add_option("--task", o.task, "none | align | anomaly");
  ev->add_flag("--oracle", o.oracle, "also report exact principal scores");
  CLI::App* bl = app.add_subcommand("baseline", "run a classical baseline");
  common(bl);
  bl->add_option("--data", o.data, "dataset directory");
  bl->add_option("--which", o.which, "sbm | pca")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    RunConfig cfg;
    if (!o.config.empty()) {
      cfg = RunConfig::load(o.config);
    } else if (ev->parsed() && !o.checkpoint.empty()) {
      // Without --config, eval reuses the configuration stored at training time.
      const json stored = read_checkpoint_manifest(o.checkpoint).at("meta").value("config", json::object());
      for (const auto& [key, value] : stored.items()) cfg.set(key, value.get<std::string>());
    }
    for (const auto& kv : o.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out_dir.empty()) cfg.paths_out = o.out_dir;
    if (!o.data.empty()) cfg.paths_data = o.data;
    if (!o.checkpoint.empty()) cfg.paths_checkpoint = o.checkpoint;

    if (gen->parsed()) {
      generate(cfg);
      out << "generated " << cfg.data_kind << " dataset in " << cfg.paths_out << '\n';
    } else if (tr->parsed()) {
      train(cfg, o.task, o.resume);
      out << "wrote " << join(cfg.paths_out, kCheckpoint) << '\n';
    } else if (ev->parsed()) {
      evaluate(cfg, o.task, o.oracle);
      out << "wrote " << join(cfg.paths_out, "metrics.json") << '\n';
    } else {
      baseline(cfg, o.which);
      out << "wrote " << join(cfg.paths_out, "metrics.json") << '\n';
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "nsbm: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "nsbm: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    err << "nsbm: error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace nsbm::cli
