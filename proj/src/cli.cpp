#include "emrld/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emrld/demos.hpp"
#include "emrld/io.hpp"
#include "emrld/meta.hpp"
#include "emrld/parallel.hpp"
#include "emrld/plot.hpp"
#include "emrld/tabular.hpp"

namespace emrld::cli {

namespace fs = std::filesystem;

namespace {

/// Maps the library's exception types onto exit codes.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DemoError& e) {
    err << "demo error: " << e.what() << "\n";
    return kDemoError;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

template <typename F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int resolve_workers(const std::optional<int>& flag) {
  const int w = flag.value_or(default_worker_count());
  if (w < 1) throw ConfigError("--workers must be positive");
  return w;
}

/// Demo tasks must coincide with the generated task list, id for id.
void check_demo_tasks(const DemoSet& demos, EnvKind kind, const std::vector<Task>& tasks) {
  if (demos.kind != kind) {
    throw DemoError("demonstrations are for " + to_string(demos.kind) + ", run is " + to_string(kind));
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto it = demos.tasks.find(static_cast<int>(i));
    if (it == demos.tasks.end()) throw DemoError("no demonstration for training task " + std::to_string(i));
    const Task& d = it->second;
    const Task& t = tasks[i];
    if (std::abs(d.goal_x - t.goal_x) > 1e-9 || std::abs(d.goal_y - t.goal_y) > 1e-9 ||
        std::abs(d.drift - t.drift) > 1e-9) {
      throw DemoError("demonstration task " + std::to_string(i) + " does not match the training task");
    }
  }
}

/// Renumbers demo tasks 0..n-1 in id order.
std::pair<std::vector<Task>, DemoSet> reindex(const DemoSet& src) {
  std::vector<Task> tasks;
  DemoSet out;
  out.kind = src.kind;
  for (const auto& [id, traj] : src.trajectories) {
    const int k = static_cast<int>(tasks.size());
    tasks.push_back(src.tasks.at(id));
    Trajectory t = traj;
    t.task_id = k;
    out.insert(k, tasks.back(), std::move(t));
  }
  return {tasks, std::move(out)};
}

json path_to_json(const Trajectory& t) {
  json pts = json::array();
  for (const auto& s : t.states) pts.push_back({s(0), s(1)});
  if (t.final_state.size() >= 2) pts.push_back({t.final_state(0), t.final_state(1)});
  return pts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  CsvTable table;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_commas(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(table.header.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (res.ec != std::errc() || res.ptr != c.data() + c.size()) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": not a number '" + c + "'");
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty() || table.rows.empty()) throw std::invalid_argument(path + ": no data rows");
  return table;
}

RunConfig effective_train_config(const TrainOptions& opt) {
  json j = json::object();
  if (!opt.config_path.empty()) {
    std::string text;
    try {
      text = read_text_file(opt.config_path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(opt.config_path + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw ConfigError(opt.config_path + ": top level must be an object");
  }
  if (opt.env) j["env"] = *opt.env;
  if (opt.algorithm) j["algorithm"] = *opt.algorithm;
  if (opt.iterations) j["iterations"] = *opt.iterations;
  if (opt.seed) j["seed"] = *opt.seed;
  if (opt.output_dir) j["output_dir"] = *opt.output_dir;
  if (opt.demos) j["demos"] = *opt.demos;
  if (opt.workers) j["workers"] = *opt.workers;
  if (opt.meta_grad_mode) j["meta_grad_mode"] = *opt.meta_grad_mode;
  if (!j.contains("workers")) j["workers"] = default_worker_count();
  return run_config_from_json(j);
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = effective_train_config(opt);
    const auto tasks = make_tasks(cfg.env, TaskSplit::Train, cfg.n_train_tasks, cfg.meta.seed);

    std::optional<DemoSet> demos;
    if (uses_demos(cfg.meta.algorithm)) {
      if (cfg.demos.empty()) throw DemoError(to_string(cfg.meta.algorithm) + " requires a demonstration file (--demos)");
      if (!fs::exists(cfg.demos)) throw DemoError("demonstration file not found: " + cfg.demos);
      demos = load_demos(cfg.demos);
      check_demo_tasks(*demos, cfg.env, tasks);
    }

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);
    write_text_file(dir / "config.json", run_config_to_json(cfg).dump(2) + "\n");

    std::ofstream metrics(dir / "metrics.csv", std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
    metrics << "iteration,mean_adapted_return,std_adapted_return,mean_pre_adapt_return,wall_seconds\n";

    Checkpoint ckpt{cfg, init_meta_state(cfg.env, cfg.meta, cfg.sigma, cfg.hidden)};
    const auto start = std::chrono::steady_clock::now();
    const DemoSet* demo_ptr = demos ? &*demos : nullptr;
    for (int it = 0; it < cfg.meta.iterations; ++it) {
      auto res = meta_iteration(ckpt.state, cfg.env, tasks, demo_ptr, cfg.meta);
      ckpt.state = std::move(res.next);
      const auto& m = res.metrics;
      const double wall =
          cfg.record_wall_time
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
              : 0.0;
      metrics << m.iteration << "," << format_double(m.mean_adapted_return) << ","
              << format_double(m.std_adapted_return) << "," << format_double(m.mean_pre_adapt_return) << ","
              << format_double(wall) << "\n";
      metrics.flush();
      out << "iter " << m.iteration << " adapted " << m.mean_adapted_return << " pre " << m.mean_pre_adapt_return
          << "\n";
      if ((it + 1) % cfg.save_interval == 0 || it + 1 == cfg.meta.iterations) {
        save_checkpoint(dir / "checkpoint.json", ckpt);
      }
    }
    if (cfg.meta.iterations == 0) save_checkpoint(dir / "checkpoint.json", ckpt);
    return static_cast<int>(kOk);
  });
}

int cmd_eval(const EvalOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.adapt_steps < 0) throw ConfigError("--adapt-steps must be nonnegative");
    if (opt.n_test_tasks < 1) throw ConfigError("--n-test-tasks must be positive");
    const Checkpoint ckpt = load_checkpoint(opt.checkpoint);
    EnvKind kind = ckpt.config.env;
    if (opt.env) {
      kind = as_config_error([&] { return parse_env_kind(*opt.env); });
      const auto& spec = env_spec(kind);
      if (ckpt.state.theta.state_dim() != spec.obs_dim || ckpt.state.theta.action_dim() != spec.action_dim) {
        throw ConfigError("checkpoint dimensions do not match " + to_string(kind));
      }
    }
    MetaConfig mc = ckpt.config.meta;
    mc.workers = resolve_workers(opt.workers);

    std::vector<Task> tasks;
    std::optional<DemoSet> demos;
    if (!opt.demos.empty()) {
      if (!fs::exists(opt.demos)) throw DemoError("demonstration file not found: " + opt.demos);
      const DemoSet loaded = load_demos(opt.demos);
      if (loaded.kind != kind) throw DemoError("demonstrations are for " + to_string(loaded.kind));
      auto [t, d] = reindex(loaded);
      tasks = std::move(t);
      demos = std::move(d);
    } else {
      tasks = make_tasks(kind, TaskSplit::Test, opt.n_test_tasks, opt.task_seed);
    }

    const auto curve =
        evaluate_meta_policy(ckpt.state.theta, kind, tasks, demos ? &*demos : nullptr, mc, opt.adapt_steps, opt.seed);

    const fs::path dir = opt.output_dir;
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "step,mean_return,std\n";
    for (std::size_t s = 0; s < curve.mean.size(); ++s) {
      csv << s << "," << format_double(curve.mean[s]) << "," << format_double(curve.std[s]) << "\n";
      out << "step " << s << " mean " << curve.mean[s] << " std " << curve.std[s] << "\n";
    }
    write_text_file(dir / "curve.csv", csv.str());

    json records = json::array();
    for (std::size_t s = 0; s < curve.sample_episodes.size(); ++s) {
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Trajectory& t = curve.sample_episodes[s][i];
        records.push_back({{"step", s},
                           {"task_index", i},
                           {"task", task_to_json(kind, tasks[i])},
                           {"return", t.total_return()},
                           {"done_reason", to_string(t.done_reason)},
                           {"path", path_to_json(t)}});
      }
    }
    json doc{{"env", to_string(kind)}, {"algorithm", to_string(mc.algorithm)}, {"records", records}};
    write_text_file(dir / "trajectories.json", doc.dump(1) + "\n");
    return static_cast<int>(kOk);
  });
}

int cmd_gen_demos(const GenDemosOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const EnvKind kind = as_config_error([&] { return parse_env_kind(opt.env); });
    const CorruptionMode mode = as_config_error([&] { return parse_corruption_mode(opt.mode); });
    if (opt.expert_iters < 0) throw ConfigError("--expert-iters must be nonnegative");
    if (opt.n_tasks < 0) throw ConfigError("--n-tasks must be nonnegative");
    TaskSplit split;
    if (opt.split == "train") {
      split = TaskSplit::Train;
    } else if (opt.split == "test") {
      split = TaskSplit::Test;
    } else {
      throw ConfigError("--split must be train or test");
    }
    const int n = opt.n_tasks > 0 ? opt.n_tasks : default_run_config(kind).n_train_tasks;
    const auto tasks = make_tasks(kind, split, n, opt.task_seed);

    ExpertConfig ecfg;
    ecfg.workers = resolve_workers(opt.workers);
    CorruptionSpec spec;
    if (mode != CorruptionMode::Optimal) spec = suboptimal_spec(mode, ecfg.sigma);
    ecfg.iterations = static_cast<int>(std::lround(spec.partial_fraction * opt.expert_iters));

    ExpertTrainingLog log;
    const ExpertPolicy expert = train_expert(kind, tasks, ecfg, opt.seed, &log);
    DemoSet demos;
    try {
      demos = generate_demos(expert, tasks, spec, opt.seed);
    } catch (const DemoError& e) {
      err << "expert failure: " << e.what() << "\n";
      return static_cast<int>(kNumericalError);
    }

    const fs::path path = opt.out;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_demos(path, demos);

    json per_task = json::array();
    for (const auto& [id, traj] : demos.trajectories) {
      per_task.push_back({{"task_id", id},
                          {"expert_return", expert_rollout(expert, demos.tasks.at(id), id).total_return()},
                          {"demo_return", traj.total_return()},
                          {"demo_length", traj.size()}});
    }
    json meta{{"env", to_string(kind)},
              {"mode", to_string(mode)},
              {"seed", opt.seed},
              {"task_seed", opt.task_seed},
              {"split", opt.split},
              {"n_tasks", n},
              {"expert_iterations", ecfg.iterations},
              {"expert_sigma", ecfg.sigma},
              {"noise_std", spec.noise_std},
              {"truncation_margin", spec.truncation_margin},
              {"prefix_length", spec.prefix_length},
              {"final_training_return", log.mean_return.empty() ? 0.0 : log.mean_return.back()},
              {"tasks", per_task}};
    write_text_file(path.string() + ".meta.json", meta.dump(2) + "\n");
    out << "wrote " << demos.size() << " demonstrations to " << path.string() << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_verify_bound(const VerifyBoundOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.n_instances < 1) throw ConfigError("--n-instances must be positive");
    const int workers = resolve_workers(opt.workers);
    const auto n = static_cast<std::size_t>(opt.n_instances);

    struct Row {
      std::uint64_t seed = 0;
      BoundCheck bound;
      double lemma_gap = 0.0;
      std::string error;
    };
    std::vector<Row> rows(n);
    parallel_for(n, workers, [&](std::size_t i) {
      Row& r = rows[i];
      r.seed = mix_seed(opt.seed, i);
      try {
        const TaskEnsemble ens = random_ensemble(r.seed);
        for (std::size_t k = 0; k < ens.tasks.size(); ++k) {
          const auto& p = ens.policies[k];
          r.lemma_gap = std::max(r.lemma_gap, perf_diff_identity_check(ens.tasks[k], p.next, p.current).gap);
        }
        r.bound = improvement_bound_check(ens);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    });

    json report = json::array();
    int violations = 0;
    for (const Row& r : rows) {
      const bool ok = r.error.empty() && r.bound.holds && r.lemma_gap < 1e-9;
      json row{{"instance_seed", r.seed},
               {"lhs", r.bound.lhs},
               {"rhs", r.bound.rhs},
               {"margin", r.bound.margin},
               {"holds", ok},
               {"lemma_gap", r.lemma_gap}};
      if (!r.error.empty()) row["error"] = r.error;
      report.push_back(row);
      if (!ok) {
        ++violations;
        err << "violation at instance seed " << r.seed << (r.error.empty() ? "" : ": " + r.error) << "\n";
      }
    }
    const fs::path path = opt.out;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, report.dump(1) + "\n");
    out << (n - static_cast<std::size_t>(violations)) << "/" << n << " instances hold\n";
    return static_cast<int>(violations == 0 ? kOk : kBoundViolation);
  });
}

int cmd_plot(const PlotOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (opt.inputs.empty()) throw ConfigError("plot needs at least one input");
    if (!opt.labels.empty() && opt.labels.size() != opt.inputs.size()) {
      throw ConfigError("--labels must match the number of inputs");
    }
    std::string svg;
    if (opt.kind == "curves") {
      std::vector<CurveSeries> series;
      std::string x_label;
      for (std::size_t k = 0; k < opt.inputs.size(); ++k) {
        const CsvTable t = read_csv(opt.inputs[k]);
        int xc = 0, yc = 1, bc = -1;
        if (t.column("mean_adapted_return") >= 0) {
          xc = t.column("iteration");
          yc = t.column("mean_adapted_return");
          bc = t.column("std_adapted_return");
        } else if (t.column("mean_return") >= 0) {
          xc = t.column("step");
          yc = t.column("mean_return");
          bc = t.column("std");
        }
        if (xc < 0 || yc < 0 || t.header.size() < 2) throw ConfigError(opt.inputs[k] + ": unrecognized columns");
        CurveSeries s;
        s.label = opt.labels.empty() ? fs::path(opt.inputs[k]).parent_path().filename().string() + "/" +
                                           fs::path(opt.inputs[k]).stem().string()
                                     : opt.labels[k];
        for (const auto& row : t.rows) {
          s.x.push_back(row[xc]);
          s.y.push_back(row[yc]);
          if (bc >= 0) s.band.push_back(row[bc]);
        }
        if (x_label.empty()) x_label = t.header[xc];
        series.push_back(std::move(s));
      }
      svg = render_curves_svg(series, x_label, "average return");
    } else if (opt.kind == "trajectories") {
      if (opt.inputs.size() != 1) throw ConfigError("trajectory plots take exactly one input");
      json doc;
      try {
        doc = json::parse(read_text_file(opt.inputs[0]));
      } catch (const json::exception& e) {
        throw ConfigError(opt.inputs[0] + ": malformed JSON (" + e.what() + ")");
      }
      try {
        const EnvKind kind = parse_env_kind(doc.at("env").get<std::string>());
        const auto& records = doc.at("records");
        int step = opt.step;
        if (step < 0) {
          for (const auto& r : records) step = std::max(step, r.at("step").get<int>());
        }
        std::vector<TrajectoryPlotItem> items;
        for (const auto& r : records) {
          if (r.at("step").get<int>() != step) continue;
          TrajectoryPlotItem item;
          item.task = task_from_json(kind, r.at("task"));
          for (const auto& p : r.at("path")) {
            Vec v(2);
            v << p.at(0).get<double>(), p.at(1).get<double>();
            item.path.push_back(v);
          }
          items.push_back(std::move(item));
        }
        if (items.empty()) throw ConfigError(opt.inputs[0] + ": no trajectories at step " + std::to_string(step));
        svg = render_trajectories_svg(kind, items);
      } catch (const json::exception& e) {
        throw ConfigError(opt.inputs[0] + ": invalid trajectory file (" + e.what() + ")");
      }
    } else {
      throw ConfigError("--kind must be curves or trajectories");
    }
    const fs::path path = opt.out;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, svg);
    out << "wrote " << path.string() << "\n";
    return static_cast<int>(kOk);
  });
}

}  // namespace emrld::cli
