#pragma once

// Stage-by-stage driver: roadmaps, annotation, assignment, path finding,
// validation. Each stage can be fed from the artifacts of the previous one.

#include <chrono>
#include <filesystem>

#include "mmtamp/assign/subplans.hpp"
#include "mmtamp/pbsat/to_solution.hpp"
#include "mmtamp/roadmap_io.hpp"
#include "mmtamp/validate/validate_plan.hpp"

namespace mmtamp {

/// A stage failed; `stage` names it.
struct StageError : Error {
  std::string stage;
  StageError(std::string st, const std::string& what) : Error(st + ": " + what), stage(std::move(st)) {}
};

inline constexpr const char* kStages[] = {"roadmap", "annotate", "assign", "plan", "validate"};

inline bool valid_stage(std::string_view s) {
  return std::find_if(std::begin(kStages), std::end(kStages), [&](const char* x) { return s == x; }) !=
         std::end(kStages);
}

struct PipelineOptions {
  int annotation_threads = 1;
  assign::SolveOptions milp;
  pbsat::PbsOptions pbs;
  validate::ValidateOptions validation;
  std::string stop_after;  // empty = run everything
};

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

struct Timings {
  double t_map = 0.0;       // assignment roadmaps
  double t_anno = 0.0;      // assignment annotation
  double t_T = 0.0;         // first incumbent
  double t_T_best = 0.0;    // best incumbent
  double t_T_all = 0.0;     // search finished
  double t_full_map = 0.0;  // full roadmaps
  double t_full_anno = 0.0;
  double t_P = 0.0;
  double t_validate = 0.0;
  double total = 0.0;
};

inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

inline json timings_to_json(const Timings& t) {
  return {{"t_map", round3(t.t_map)},
          {"t_anno", round3(t.t_anno)},
          {"t_T", round3(t.t_T)},
          {"t_T_dagger", round3(t.t_T_best)},
          {"t_T_star", round3(t.t_T_all)},
          {"t_full_map", round3(t.t_full_map)},
          {"t_full_anno", round3(t.t_full_anno)},
          {"t_P", round3(t.t_P)},
          {"t_validate", round3(t.t_validate)},
          {"total", round3(t.total)}};
}

/// Output of the path-finding stage. Owns everything PbsProblem points to.
struct PlanStage {
  assign::SubplanSet subplans;
  std::vector<roadmap::FullRoadmap> full;
  CollisionSet pi;
  pbsat::PbsProblem problem;
  pbsat::PbsResult result;
  Solution solution;

  PlanStage() = default;
  PlanStage(const PlanStage&) = delete;
  PlanStage& operator=(const PlanStage&) = delete;
};

// ---------------------------------------------------------------------------
// Stages.

inline std::vector<roadmap::MultiModalRoadmap> stage_roadmaps(const Scenario& s) {
  std::vector<roadmap::MultiModalRoadmap> maps;
  try {
    for (int r = 0; r < static_cast<int>(s.robots.size()); ++r)
      maps.push_back(roadmap::build_assignment_roadmap(s, r));
  } catch (const Error& e) {
    throw StageError("roadmap", e.what());
  }
  return maps;
}

inline std::vector<const roadmap::MultiModalRoadmap*> pointers(const std::vector<roadmap::MultiModalRoadmap>& maps) {
  std::vector<const roadmap::MultiModalRoadmap*> p;
  for (const auto& m : maps) p.push_back(&m);
  return p;
}

inline CollisionSet stage_annotate(const Scenario& s, const std::vector<roadmap::MultiModalRoadmap>& maps,
                                   int threads) {
  try {
    AnnotationOptions o;
    o.threads = threads;
    o.mode_changing_only = true;
    return annotate_collisions(s, pointers(maps), o);
  } catch (const Error& e) {
    throw StageError("annotate", e.what());
  }
}

struct AssignStage {
  assign::AssignmentProblem problem;
  assign::Assignment assignment;
};

inline AssignStage stage_assign(const Scenario& s, const std::vector<roadmap::MultiModalRoadmap>& maps,
                                const CollisionSet& pi, const assign::SolveOptions& opt) {
  AssignStage out;
  try {
    out.problem = assign::build_assignment_problem(s, pointers(maps), pi);
    out.assignment = assign::solve_assignment(s, pointers(maps), out.problem, opt);
  } catch (const Error& e) {
    throw StageError("assign", e.what());
  }
  return out;
}

/// Full roadmaps, their annotation and PBS-AT for a solved assignment.
inline void stage_plan(const Scenario& s, const std::vector<roadmap::MultiModalRoadmap>& maps,
                       const AssignStage& as, const PipelineOptions& opt, PlanStage& out,
                       Timings* timings = nullptr) {
  try {
    const auto ptrs = pointers(maps);
    out.subplans = assign::extract_subplans(s, ptrs, as.problem, as.assignment);
    Stopwatch sw;
    for (int r = 0; r < static_cast<int>(s.robots.size()); ++r) {
      const auto cache = roadmap::build_config_cache(s, r);
      out.full.push_back(roadmap::build_full_roadmap(s, r, maps[r], cache, assign::used_manipulations(out.subplans, r),
                                                     assign::long_moves(out.subplans, r)));
    }
    if (timings) timings->t_full_map = sw.seconds();
    Stopwatch sa;
    std::vector<const roadmap::MultiModalRoadmap*> fm;
    for (const auto& f : out.full) fm.push_back(&f.map);
    AnnotationOptions ao;
    ao.threads = opt.annotation_threads;
    out.pi = annotate_collisions(s, fm, ao);
    if (timings) timings->t_full_anno = sa.seconds();
    out.problem = pbsat::make_problem(s, out.full, out.pi, out.subplans);
    out.result = pbsat::pbs_at(out.problem, opt.pbs);
    if (timings) timings->t_P = out.result.stats.seconds;
  } catch (const Error& e) {
    throw StageError("plan", e.what());
  }
  if (!out.result.success)
    throw StageError("plan", "PBS-AT found no conflict-free plan: " + out.result.stats.failure);
  out.solution = pbsat::to_solution(out.problem, out.result);
}

// ---------------------------------------------------------------------------
// Statistics.

struct RoadmapCounts {
  double V = 0.0;  // highway and connection vertices, averaged over robots
  double E = 0.0;
  std::size_t vertices = 0;  // totals
  std::size_t edges = 0;
};

inline RoadmapCounts roadmap_counts(const std::vector<const roadmap::MultiModalRoadmap*>& maps) {
  RoadmapCounts c;
  if (maps.empty()) return c;
  for (const auto* m : maps) {
    std::set<int> vs;
    std::size_t es = 0;
    for (const auto& e : m->edges)
      if (e.kind == roadmap::EdgeKind::highway || e.kind == roadmap::EdgeKind::connection) {
        ++es;
        vs.insert(e.s);
        vs.insert(e.e);
      }
    c.V += static_cast<double>(vs.size());
    c.E += static_cast<double>(es);
    c.vertices += m->vertices.size();
    c.edges += m->edges.size();
  }
  c.V /= static_cast<double>(maps.size());
  c.E /= static_cast<double>(maps.size());
  return c;
}

/// Deterministic statistics of a pipeline run (no wall-clock values).
struct PipelineStats {
  json roadmap = json::object();
  json assignment = json::object();
  json path_finding = json::object();
  json validation = json::object();
  std::string failed_stage;
  std::string error;
  double makespan = kInf;

  json to_json() const {
    json j = {{"roadmap", roadmap},
              {"assignment", assignment},
              {"path_finding", path_finding},
              {"validation", validation}};
    j["makespan"] = std::isfinite(makespan) ? json(makespan) : json(nullptr);
    if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

inline json assignment_stats(const AssignStage& as, double relaxation) {
  const auto& m = as.problem.model;
  const auto& a = as.assignment;
  return {{"B", m.num_binary()},
          {"X", m.num_continuous()},
          {"C", m.num_constraints()},
          {"nodes", a.stats.nodes},
          {"incumbents", a.stats.incumbents.size()},
          {"optimal", a.optimal},
          {"makespan", a.makespan},
          {"relaxation_bound", std::isfinite(relaxation) ? json(relaxation) : json(nullptr)}};
}

inline json path_finding_stats(const PlanStage& ps) {
  const auto& st = ps.result.stats;
  const auto rc = [&] {
    std::vector<const roadmap::MultiModalRoadmap*> fm;
    for (const auto& f : ps.full) fm.push_back(&f.map);
    return roadmap_counts(fm);
  }();
  return {{"V", rc.V},
          {"E", rc.E},
          {"full_vertices", rc.vertices},
          {"full_edges", rc.edges},
          {"full_collisions", ps.pi.size()},
          {"g", st.subplans},
          {"N", st.nodes},
          {"rSIPP", st.rsipp_calls},
          {"used_collisions", st.used_pairs},
          {"eta", st.eta},
          {"livelocks", st.livelocks},
          {"skipped_intervals", st.skipped_intervals},
          {"success", ps.result.success},
          {"makespan", std::isfinite(ps.result.makespan) ? json(ps.result.makespan) : json(nullptr)}};
}

// ---------------------------------------------------------------------------
// Whole pipeline.

struct PipelineRun {
  std::vector<roadmap::MultiModalRoadmap> maps;
  std::optional<CollisionSet> pi;
  std::optional<AssignStage> assign;
  double relaxation = kInf;
  std::unique_ptr<PlanStage> plan;
  std::optional<validate::ValidationReport> report;
  PipelineStats stats;
  Timings timings;

  bool ok() const { return report && report->ok && stats.failed_stage.empty(); }
};

namespace detail {

inline void write_artifact(const std::optional<std::string>& dir, const std::string& name, const json& j) {
  if (dir) write_json_file((std::filesystem::path(*dir) / name).string(), j);
}

}  // namespace detail

/// Runs every stage up to `opt.stop_after`. Stage failures are recorded in
/// the returned stats rather than thrown. With `out_dir`, artifacts are
/// written as each stage completes.
inline PipelineRun run_pipeline(const Scenario& s, const PipelineOptions& opt,
                                const std::optional<std::string>& out_dir = std::nullopt) {
  PipelineRun run;
  Stopwatch total;
  if (out_dir) std::filesystem::create_directories(*out_dir);
  auto stop = [&](const char* stage) { return opt.stop_after == stage; };
  auto finish = [&] {
    run.timings.total = total.seconds();
    detail::write_artifact(out_dir, "stats.json", run.stats.to_json());
    detail::write_artifact(out_dir, "timings.json", timings_to_json(run.timings));
  };
  try {
    Stopwatch sw;
    run.maps = stage_roadmaps(s);
    run.timings.t_map = sw.seconds();
    const auto rc = roadmap_counts(pointers(run.maps));
    run.stats.roadmap = {{"assignment_vertices", rc.vertices}, {"assignment_edges", rc.edges}};
    detail::write_artifact(out_dir, "roadmaps.json", roadmaps_to_json(s, run.maps, nullptr));
    if (stop("roadmap")) return finish(), std::move(run);

    Stopwatch sa;
    run.pi = stage_annotate(s, run.maps, opt.annotation_threads);
    run.timings.t_anno = sa.seconds();
    run.stats.roadmap["assignment_collisions"] = run.pi->size();
    detail::write_artifact(out_dir, "roadmaps.json", roadmaps_to_json(s, run.maps, &*run.pi));
    if (stop("annotate")) return finish(), std::move(run);

    run.assign = stage_assign(s, run.maps, *run.pi, opt.milp);
    const auto& a = run.assign->assignment;
    run.timings.t_T = a.stats.t_first;
    run.timings.t_T_best = a.stats.t_best;
    run.timings.t_T_all = a.stats.t_total;
    run.relaxation = assign::relaxation_bound(s, pointers(run.maps), run.assign->problem, a.routes);
    run.stats.assignment = assignment_stats(*run.assign, run.relaxation);
    detail::write_artifact(out_dir, "assignment.json", assign::assignment_to_json(s, run.assign->problem, a));
    if (stop("assign")) return finish(), std::move(run);

    run.plan = std::make_unique<PlanStage>();
    try {
      stage_plan(s, run.maps, *run.assign, opt, *run.plan, &run.timings);
    } catch (const StageError&) {
      if (!run.plan->full.empty() && run.plan->result.stats.nodes > 0)
        run.stats.path_finding = path_finding_stats(*run.plan);
      throw;
    }
    run.stats.path_finding = path_finding_stats(*run.plan);
    run.stats.makespan = run.plan->solution.makespan;
    auto& sol = run.plan->solution;
    sol.stats = run.stats.path_finding;
    detail::write_artifact(out_dir, "subplans.json", assign::subplans_to_json(s, run.plan->subplans));
    detail::write_artifact(out_dir, "solution.json", solution_to_json(s, sol));
    if (stop("plan")) return finish(), std::move(run);

    Stopwatch sv;
    run.report = validate::validate_plan(s, sol, opt.validation);
    run.timings.t_validate = sv.seconds();
    run.stats.validation = {{"ok", run.report->ok}, {"violations", run.report->violations.size()}};
    detail::write_artifact(out_dir, "report.json", validate::report_to_json(*run.report));
    if (!run.report->ok) {
      run.stats.failed_stage = "validate";
      run.stats.error = "plan has " + std::to_string(run.report->violations.size()) + " violation(s)";
    }
  } catch (const StageError& e) {
    run.stats.failed_stage = e.stage;
    run.stats.error = e.what();
  }
  finish();
  return run;
}

}  // namespace mmtamp
