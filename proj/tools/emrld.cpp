#include <iostream>

#include <CLI11.hpp>

#include "emrld/cli.hpp"

namespace cli = emrld::cli;

int main(int argc, char** argv) {
  CLI::App app{"emrld: meta-reinforcement learning from demonstrations"};
  app.require_subcommand(1);

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "meta-train a policy");
  t->add_option("--config", train.config_path, "JSON run configuration");
  t->add_option("--env", train.env, "point2d | two_wheeled | two_wheeled_drift");
  t->add_option("--algorithm", train.algorithm, "emrld | emrld_ws | maml | meta_bc | gmps");
  t->add_option("--iterations", train.iterations);
  t->add_option("--seed", train.seed);
  t->add_option("--output-dir", train.output_dir);
  t->add_option("--demos", train.demos, "demonstration file (JSONL)");
  t->add_option("--workers", train.workers);
  t->add_option("--meta-grad-mode", train.meta_grad_mode, "first_order | hvp_second_order");

  cli::EvalOptions eval;
  auto* e = app.add_subcommand("eval", "test-time adaptation curve of a checkpoint");
  e->add_option("--checkpoint", eval.checkpoint)->required();
  e->add_option("--env", eval.env);
  e->add_option("--demos", eval.demos, "test-task demonstrations; their tasks replace sampled ones");
  e->add_option("--n-test-tasks", eval.n_test_tasks);
  e->add_option("--adapt-steps", eval.adapt_steps);
  e->add_option("--seed", eval.seed);
  e->add_option("--task-seed", eval.task_seed);
  e->add_option("--output-dir", eval.output_dir);
  e->add_option("--workers", eval.workers);

  cli::GenDemosOptions gen;
  auto* g = app.add_subcommand("gen-demos", "train an expert and record demonstrations");
  g->add_option("--env", gen.env);
  g->add_option("--mode", gen.mode, "optimal | truncate_end | drop_prefix");
  g->add_option("--out", gen.out);
  g->add_option("--seed", gen.seed);
  g->add_option("--expert-iters", gen.expert_iters);
  g->add_option("--n-tasks", gen.n_tasks);
  g->add_option("--split", gen.split, "train | test");
  g->add_option("--task-seed", gen.task_seed);
  g->add_option("--workers", gen.workers);

  cli::VerifyBoundOptions vb;
  auto* v = app.add_subcommand("verify-bound", "check the improvement bound on random tabular ensembles");
  v->add_option("--n-instances", vb.n_instances);
  v->add_option("--seed", vb.seed);
  v->add_option("--out", vb.out);
  v->add_option("--workers", vb.workers);

  cli::PlotOptions plot;
  auto* p = app.add_subcommand("plot", "render curves or trajectories as SVG");
  p->add_option("inputs", plot.inputs)->required();
  p->add_option("--kind", plot.kind, "curves | trajectories");
  p->add_option("--labels", plot.labels);
  p->add_option("--out", plot.out);
  p->add_option("--step", plot.step);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (*t) return cli::cmd_train(train, std::cout, std::cerr);
  if (*e) return cli::cmd_eval(eval, std::cout, std::cerr);
  if (*g) return cli::cmd_gen_demos(gen, std::cout, std::cerr);
  if (*v) return cli::cmd_verify_bound(vb, std::cout, std::cerr);
  return cli::cmd_plot(plot, std::cout, std::cerr);
}
