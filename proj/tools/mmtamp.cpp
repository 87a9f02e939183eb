// mmtamp: command-line driver for the planning pipeline.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "mmtamp/pipeline.hpp"
#include "mmtamp/stats.hpp"
#include "mmtamp/svg.hpp"

namespace fs = std::filesystem;
using namespace mmtamp;

namespace {

struct Common {
  std::string scenario;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  double milp_time_limit = 300.0;
};

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
  app->add_option("scenario", c.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
  if (needs_out) app->add_option("--out", c.out, "artifact directory")->capture_default_str();
  app->add_option("--seed", c.seed, "override the scenario seed");
}

Scenario load(const Common& c) {
  Scenario s = load_scenario(c.scenario);
  if (c.seed) s.seed = *c.seed;
  return s;
}

std::string artifact(const Common& c, const char* name) { return (fs::path(c.out) / name).string(); }

RoadmapBundle load_roadmaps(const Scenario& s, const Common& c, bool need_pi) {
  const auto path = artifact(c, "roadmaps.json");
  if (!fs::exists(path)) throw StageError(need_pi ? "annotate" : "roadmap", "missing " + path);
  auto b = roadmaps_from_json(s, read_json_file(path));
  if (need_pi && !b.pi) throw StageError("annotate", path + " has no collision annotation");
  return b;
}

int fail(const std::exception& e) {
  if (const auto* st = dynamic_cast<const StageError*>(&e))
    std::cerr << "error [" << st->stage << "]: " << st->what() << "\n";
  else
    std::cerr << "error: " << e.what() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-robot task and motion planner"};
  app.require_subcommand(1);
  Common c;
  std::string solution_path, stop_after, stats_dir;
  double interval = 1.0;
  bool stats_json = false;

  auto* gen = app.add_subcommand("gen-roadmap", "build the assignment roadmaps");
  add_common(gen, c);
  auto* ann = app.add_subcommand("annotate", "annotate collisions between roadmap elements");
  add_common(ann, c);
  ann->add_option("--annotation-threads", c.threads)->check(CLI::PositiveNumber);
  auto* asg = app.add_subcommand("assign", "solve task assignment");
  add_common(asg, c);
  asg->add_option("--milp-time-limit", c.milp_time_limit, "seconds")->check(CLI::PositiveNumber);
  auto* lp = app.add_subcommand("export-lp", "write the assignment model in LP format");
  add_common(lp, c);
  auto* plan = app.add_subcommand("plan", "path finding for a solved assignment");
  add_common(plan, c);
  plan->add_option("--annotation-threads", c.threads)->check(CLI::PositiveNumber);
  auto* val = app.add_subcommand("validate", "check a solution by dense replay");
  add_common(val, c, false);
  val->add_option("solution", solution_path, "solution JSON file")->required()->check(CLI::ExistingFile);
  auto* solve = app.add_subcommand("solve", "run the whole pipeline");
  add_common(solve, c);
  solve->add_option("--annotation-threads", c.threads)->check(CLI::PositiveNumber);
  solve->add_option("--milp-time-limit", c.milp_time_limit, "seconds")->check(CLI::PositiveNumber);
  solve->add_option("--stop-after", stop_after, "last stage to run")
      ->check(CLI::IsMember({"roadmap", "annotate", "assign", "plan", "validate"}));
  auto* render = app.add_subcommand("render", "write SVG keyframes of a solution");
  add_common(render, c);
  render->add_option("solution", solution_path, "solution JSON file")->required()->check(CLI::ExistingFile);
  render->add_option("--interval", interval, "seconds between frames")->check(CLI::PositiveNumber);
  auto* stats = app.add_subcommand("stats", "print the statistics of a solve run");
  stats->add_option("dir", stats_dir, "artifact directory of a solve run")->required()->check(CLI::ExistingDirectory);
  stats->add_flag("--json", stats_json, "machine-readable output only");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto s = load(c);
      fs::create_directories(c.out);
      const auto maps = stage_roadmaps(s);
      write_json_file(artifact(c, "roadmaps.json"), roadmaps_to_json(s, maps, nullptr));
      std::cout << "wrote " << artifact(c, "roadmaps.json") << "\n";
    } else if (ann->parsed()) {
      const auto s = load(c);
      fs::create_directories(c.out);
      auto maps = fs::exists(artifact(c, "roadmaps.json")) ? load_roadmaps(s, c, false).maps : stage_roadmaps(s);
      const auto pi = stage_annotate(s, maps, c.threads);
      write_json_file(artifact(c, "roadmaps.json"), roadmaps_to_json(s, maps, &pi));
      std::cout << "annotated " << pi.size() << " collisions\n";
    } else if (asg->parsed()) {
      const auto s = load(c);
      const auto b = load_roadmaps(s, c, true);
      assign::SolveOptions so;
      so.time_limit = c.milp_time_limit;
      const auto as = stage_assign(s, b.maps, *b.pi, so);
      write_json_file(artifact(c, "assignment.json"), assign::assignment_to_json(s, as.problem, as.assignment));
      std::cout << "makespan " << as.assignment.makespan << (as.assignment.optimal ? " (optimal)" : "") << "\n";
    } else if (lp->parsed()) {
      const auto s = load(c);
      const auto b = load_roadmaps(s, c, true);
      const auto ap = assign::build_assignment_problem(s, b.pointers(), *b.pi);
      assign::export_lp(ap.model, artifact(c, "model.lp"));
      std::cout << "wrote " << artifact(c, "model.lp") << " (" << ap.model.num_binary() << " binaries)\n";
    } else if (plan->parsed()) {
      const auto s = load(c);
      const auto b = load_roadmaps(s, c, true);
      AssignStage as;
      as.problem = assign::build_assignment_problem(s, b.pointers(), *b.pi);
      const auto apath = artifact(c, "assignment.json");
      if (!fs::exists(apath)) throw StageError("assign", "missing " + apath);
      as.assignment = assign::assignment_from_json(s, as.problem, read_json_file(apath));
      PipelineOptions po;
      po.annotation_threads = c.threads;
      PlanStage ps;
      stage_plan(s, b.maps, as, po, ps);
      ps.solution.stats = path_finding_stats(ps);
      write_json_file(artifact(c, "subplans.json"), assign::subplans_to_json(s, ps.subplans));
      write_json_file(artifact(c, "solution.json"), solution_to_json(s, ps.solution));
      std::cout << "makespan " << ps.solution.makespan << "\n";
    } else if (val->parsed()) {
      const auto s = load(c);
      const auto sol = solution_from_json(s, read_json_file(solution_path));
      const auto rep = validate::validate_plan(s, sol);
      std::cout << validate::format_report(rep) << "\n";
      return rep.ok ? 0 : 1;
    } else if (solve->parsed()) {
      const auto s = load(c);
      PipelineOptions po;
      po.annotation_threads = c.threads;
      po.milp.time_limit = c.milp_time_limit;
      po.stop_after = stop_after;
      const auto run = run_pipeline(s, po, c.out);
      if (!run.stats.failed_stage.empty()) {
        std::cerr << "error [" << run.stats.failed_stage << "]: " << run.stats.error << "\n";
        return 1;
      }
      std::cout << format_table(table_row(run.stats.to_json(), timings_to_json(run.timings)));
      if (!stop_after.empty() && stop_after != "validate") return 0;
      return run.ok() ? 0 : 1;
    } else if (render->parsed()) {
      const auto s = load(c);
      const auto sol = solution_from_json(s, read_json_file(solution_path));
      svg::RenderOptions ro;
      ro.interval = interval;
      const auto frames = svg::render_svg(s, sol, c.out, ro);
      std::cout << "wrote " << frames.size() << " frame(s) to " << c.out << "\n";
    } else if (stats->parsed()) {
      const auto st = read_json_file((fs::path(stats_dir) / "stats.json").string());
      const auto tp = fs::path(stats_dir) / "timings.json";
      const auto tm = fs::exists(tp) ? read_json_file(tp.string()) : json::object();
      const auto row = table_row(st, tm);
      if (!stats_json) std::cout << format_table(row);
      std::cout << row.dump() << "\n";
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 0;
}
