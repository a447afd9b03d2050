#include "emrld/demos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "emrld/io.hpp"
#include "emrld/losses.hpp"
#include "emrld/meta.hpp"
#include "emrld/parallel.hpp"

namespace emrld {

const Trajectory* DemoSet::find(int task_id) const {
  const auto it = trajectories.find(task_id);
  return it == trajectories.end() ? nullptr : &it->second;
}

void DemoSet::insert(int task_id, const Task& task, Trajectory traj) {
  if (trajectories.contains(task_id)) throw DemoError("duplicate demonstration for task " + std::to_string(task_id));
  traj.task_id = task_id;
  tasks[task_id] = task;
  trajectories.emplace(task_id, std::move(traj));
}

std::string to_string(CorruptionMode mode) {
  switch (mode) {
    case CorruptionMode::Optimal: return "optimal";
    case CorruptionMode::TruncateEnd: return "truncate_end";
    case CorruptionMode::DropPrefix: return "drop_prefix";
  }
  return "unknown";
}

CorruptionMode parse_corruption_mode(const std::string& name) {
  if (name == "optimal") return CorruptionMode::Optimal;
  if (name == "truncate_end") return CorruptionMode::TruncateEnd;
  if (name == "drop_prefix") return CorruptionMode::DropPrefix;
  throw std::invalid_argument("unknown demonstration mode '" + name + "' (expected optimal, truncate_end, drop_prefix)");
}

void CorruptionSpec::validate() const {
  if (noise_std < 0.0 || truncation_margin < 0.0 || prefix_length < 0) {
    throw std::invalid_argument("corruption parameters must be nonnegative");
  }
  if (!(partial_fraction >= 0.0 && partial_fraction <= 1.0)) {
    throw std::invalid_argument("partial_fraction must lie in [0, 1]");
  }
}

CorruptionSpec suboptimal_spec(CorruptionMode mode, double sigma) {
  CorruptionSpec s;
  s.mode = mode;
  if (mode != CorruptionMode::Optimal) {
    s.partial_fraction = 0.3;
    s.noise_std = 0.3 * sigma;
  }
  return s;
}

namespace {

Vec value_input(const Vec& obs, const Vec& ctx, int t) {
  Vec in(obs.size() + ctx.size() + 1);
  in << obs, ctx, 0.01 * t;
  return in;
}

}  // namespace

ExpertPolicy train_expert(EnvKind kind, const std::vector<Task>& tasks, const ExpertConfig& cfg, std::uint64_t seed,
                          ExpertTrainingLog* log) {
  if (tasks.empty()) throw std::invalid_argument("train_expert: no tasks");
  if (cfg.iterations < 0 || cfg.episodes_per_task < 1) throw std::invalid_argument("train_expert: bad iteration counts");
  const auto& spec = env_spec(kind);
  const int in_dim = spec.obs_dim + spec.context_dim;
  ExpertPolicy expert;
  expert.kind = kind;
  const std::vector<int> pol_sizes{in_dim, cfg.hidden, cfg.hidden, spec.action_dim};
  const std::vector<int> val_sizes{in_dim + 1, cfg.hidden, cfg.hidden, 1};
  expert.policy = make_gaussian_policy(pol_sizes, cfg.sigma, mix_seed(seed, 1));
  expert.value_net = init_mlp(val_sizes, mix_seed(seed, 2));
  AdamState value_adam = AdamState::zeros(expert.value_net.num_params());
  std::mt19937_64 shuffle_rng(mix_seed(seed, 3));

  const std::size_t n_tasks = tasks.size();
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<std::vector<Trajectory>> batches(n_tasks);
    parallel_for(n_tasks, cfg.workers, [&](std::size_t i) {
      EpisodeOptions opt;
      opt.context = task_context(kind, tasks[i]);
      opt.task_id = static_cast<int>(i);
      batches[i] = collect_trajectories(kind, tasks[i], expert.policy, cfg.episodes_per_task,
                                        mix_seed(mix_seed(seed, 100 + static_cast<std::uint64_t>(it)), i), 1, opt);
    });

    // Assemble inputs, GAE advantages and return targets.
    std::vector<Vec> pol_cols, val_cols, act_cols;
    std::vector<double> advs, targets;
    double ret_sum = 0.0;
    std::size_t episodes = 0;
    for (std::size_t i = 0; i < n_tasks; ++i) {
      const Vec ctx = task_context(kind, tasks[i]);
      for (const auto& tr : batches[i]) {
        ret_sum += tr.total_return();
        ++episodes;
        const std::size_t len = tr.size();
        Mat vin(in_dim + 1, static_cast<Eigen::Index>(len));
        for (std::size_t t = 0; t < len; ++t) vin.col(static_cast<Eigen::Index>(t)) = value_input(tr.states[t], ctx, tr.times[t]);
        const Mat values = mlp_forward_batch(expert.value_net, vin).output();
        std::vector<double> rewards = tr.rewards;
        if (cfg.shaping_scale != 0.0) {
          for (std::size_t t = 0; t < len; ++t) {
            const Vec& next = t + 1 < len ? tr.states[t + 1] : tr.final_state;
            rewards[t] += cfg.shaping_scale * (goal_distance(kind, tr.states[t], tasks[i]) -
                                               cfg.gamma * goal_distance(kind, next, tasks[i]));
          }
        }
        const auto returns = discounted_returns(rewards, cfg.gamma);
        std::vector<double> adv(len);
        double acc = 0.0;
        for (std::size_t t = len; t-- > 0;) {
          const double v_next = t + 1 < len ? values(0, static_cast<Eigen::Index>(t + 1)) : 0.0;
          const double delta = rewards[t] + cfg.gamma * v_next - values(0, static_cast<Eigen::Index>(t));
          acc = delta + cfg.gamma * cfg.gae_tau * acc;
          adv[t] = acc;
        }
        for (std::size_t t = 0; t < len; ++t) {
          Vec pin(in_dim);
          pin << tr.states[t], ctx;
          pol_cols.push_back(std::move(pin));
          val_cols.push_back(vin.col(static_cast<Eigen::Index>(t)));
          act_cols.push_back(tr.actions[t]);
          advs.push_back(adv[t]);
          targets.push_back(returns[t]);
        }
      }
    }
    if (log) log->mean_return.push_back(ret_sum / static_cast<double>(episodes));

    const auto n = static_cast<Eigen::Index>(pol_cols.size());
    Mat states(in_dim, n), actions(spec.action_dim, n), vstates(in_dim + 1, n);
    Vec adv(n), target(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      states.col(c) = pol_cols[static_cast<std::size_t>(c)];
      actions.col(c) = act_cols[static_cast<std::size_t>(c)];
      vstates.col(c) = val_cols[static_cast<std::size_t>(c)];
      adv(c) = advs[static_cast<std::size_t>(c)];
      target(c) = targets[static_cast<std::size_t>(c)];
    }
    // Per-task normalization.
    Eigen::Index start = 0;
    for (const auto& batch : batches) {
      Eigen::Index len = 0;
      for (const auto& tr : batch) len += static_cast<Eigen::Index>(tr.size());
      auto seg = adv.segment(start, len);
      const double mean = seg.mean();
      const double sd = std::sqrt((seg.array() - mean).square().mean());
      if (sd > 1e-8) seg = (seg.array() - mean) / sd;
      start += len;
    }
    if (!adv.allFinite()) throw NumericalError("train_expert: non-finite advantages");

    expert.policy = trpo_step(expert.policy, states, actions, adv, cfg.trpo);

    // Value regression with minibatch Adam.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    constexpr Eigen::Index kBatch = 256;
    for (int epoch = 0; epoch < cfg.value_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (Eigen::Index start = 0; start < n; start += kBatch) {
        const Eigen::Index len = std::min(kBatch, n - start);
        Mat xb(in_dim + 1, len);
        Vec yb(len);
        for (Eigen::Index k = 0; k < len; ++k) {
          xb.col(k) = vstates.col(order[static_cast<std::size_t>(start + k)]);
          yb(k) = target(order[static_cast<std::size_t>(start + k)]);
        }
        const MlpCache cache = mlp_forward_batch(expert.value_net, xb);
        const Mat grad_out = (cache.output() - yb.transpose()) * (2.0 / static_cast<double>(len));
        const FlatGrad g = mlp_backward_batch(expert.value_net, cache, grad_out);
        if (!g.allFinite()) throw NumericalError("train_expert: non-finite value gradient");
        auto [next, next_state] = adam_step(flatten(expert.value_net), g, value_adam, cfg.value_lr);
        expert.value_net = unflatten_like(next, expert.value_net);
        value_adam = std::move(next_state);
      }
    }
  }
  return expert;
}

Trajectory expert_rollout(const ExpertPolicy& expert, const Task& task, int task_id) {
  EpisodeOptions opt;
  opt.greedy = true;
  opt.context = task_context(expert.kind, task);
  opt.task_id = task_id;
  std::mt19937_64 rng(0);
  return run_episode(expert.kind, task, expert.policy, opt, rng);
}

DemoSet generate_demos(const ExpertPolicy& expert, const std::vector<Task>& tasks, const CorruptionSpec& spec,
                       std::uint64_t seed) {
  spec.validate();
  const EnvKind kind = expert.kind;
  DemoSet set;
  set.kind = kind;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const int id = static_cast<int>(i);
    EpisodeOptions opt;
    opt.greedy = true;
    opt.extra_noise_std = spec.noise_std;
    opt.context = task_context(kind, tasks[i]);
    opt.task_id = id;
    std::mt19937_64 rng(mix_seed(seed, i));
    Trajectory tr = run_episode(kind, tasks[i], expert.policy, opt, rng);

    switch (spec.mode) {
      case CorruptionMode::Optimal:
        if (tr.done_reason != DoneReason::Goal && !in_reward_region(kind, tr.final_state(0), tr.final_state(1), tasks[i])) {
          throw DemoError("expert demonstration does not end in the reward region of task " + std::to_string(id));
        }
        break;
      case CorruptionMode::TruncateEnd: {
        const double radius = env_spec(kind).reward_radius + spec.truncation_margin;
        std::size_t cut = tr.size();
        for (std::size_t t = 0; t < tr.size(); ++t) {
          if (goal_distance(kind, tr.states[t], tasks[i]) <= radius) {
            cut = t;
            break;
          }
        }
        if (cut < tr.size()) {
          tr.final_state = tr.states[cut];
          tr.done_reason = DoneReason::Running;
          tr.states.resize(cut);
          tr.actions.resize(cut);
          tr.rewards.resize(cut);
          tr.times.resize(cut);
        }
        break;
      }
      case CorruptionMode::DropPrefix: {
        const auto p = std::min<std::size_t>(static_cast<std::size_t>(spec.prefix_length), tr.size());
        tr.states.erase(tr.states.begin(), tr.states.begin() + static_cast<std::ptrdiff_t>(p));
        tr.actions.erase(tr.actions.begin(), tr.actions.begin() + static_cast<std::ptrdiff_t>(p));
        tr.rewards.erase(tr.rewards.begin(), tr.rewards.begin() + static_cast<std::ptrdiff_t>(p));
        tr.times.erase(tr.times.begin(), tr.times.begin() + static_cast<std::ptrdiff_t>(p));
        break;
      }
    }
    if (tr.empty()) throw DemoError("demonstration for task " + std::to_string(id) + " is empty after corruption");
    set.insert(id, tasks[i], std::move(tr));
  }
  return set;
}

void save_demos(const std::filesystem::path& path, const DemoSet& set) {
  if (set.size() == 0) throw DemoError("refusing to save an empty demonstration set");
  std::ostringstream out;
  for (const auto& [id, traj] : set.trajectories) {
    json j = trajectory_to_json(traj);
    json line;
    line["schema_version"] = kDemoSchemaVersion;
    line["env"] = to_string(set.kind);
    line["task_id"] = id;
    line["task"] = task_to_json(set.kind, set.tasks.at(id));
    for (const char* key : {"states", "actions", "rewards", "times", "final_state", "done_reason"}) {
      if (j.contains(key)) line[key] = j[key];
    }
    out << line.dump() << '\n';
  }
  write_text_file(path, out.str());
}

DemoSet load_demos(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  DemoSet set;
  std::string line;
  int lineno = 0;
  bool have_kind = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DemoError(where + ": malformed JSON (" + e.what() + ")");
    }
    try {
      if (!j.is_object()) throw DemoError("record is not an object");
      if (j.contains("schema_version") && j.at("schema_version").get<int>() != kDemoSchemaVersion) {
        throw DemoError("unsupported schema_version");
      }
      for (const char* key : {"task_id", "task", "states", "actions"}) {
        if (!j.contains(key)) throw DemoError(std::string("missing '") + key + "'");
      }
      EnvKind kind = EnvKind::Point2D;
      if (j.contains("env")) {
        kind = parse_env_kind(j.at("env").get<std::string>());
      } else if (j.at("task").contains("drift")) {
        kind = EnvKind::TwoWheeledDrift;
      }
      if (have_kind && kind != set.kind) throw DemoError("mixed environments in one file");
      set.kind = kind;
      have_kind = true;
      Trajectory t = trajectory_from_json(j);
      if (t.empty()) throw DemoError("empty demonstration");
      if (t.states.size() != t.actions.size()) throw DemoError("states and actions differ in length");
      const int id = j.at("task_id").get<int>();
      set.insert(id, task_from_json(kind, j.at("task")), std::move(t));
    } catch (const DemoError& e) {
      throw DemoError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw DemoError(where + ": invalid record (" + e.what() + ")");
    }
  }
  if (set.size() == 0) throw DemoError(path.string() + ": no demonstrations in file");
  return set;
}

}  // namespace emrld
