#pragma once

// MILP over plan roadmaps: variables A[e], t_n[v], t_T[tau, s|e], t and the
// constraint families (1)-(9), kept in symbolic and big-M compiled form.

#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmtamp/annotate.hpp"
#include "mmtamp/assign/task_roadmap.hpp"

namespace mmtamp::assign {

enum class VarType { Binary, Continuous };
enum class Sense { LE, GE, EQ };

struct Var {
  std::string name;
  VarType type = VarType::Continuous;
};

using Terms = std::vector<std::pair<int, double>>;

/// Linear row of the compiled model.
struct Row {
  int family = 0;
  Terms terms;
  Sense sense = Sense::GE;
  double rhs = 0.0;
};

/// sum(terms) >= rhs
struct Ineq {
  Terms terms;
  double rhs = 0.0;
};

/// (AND of antecedent binaries) implies OR over alternatives of
/// (AND of inequalities).
struct Symbolic {
  int family = 0;
  std::vector<int> antecedents;
  std::vector<std::vector<Ineq>> alternatives;
};

/// Mode-changing plan edges of two robots whose manipulations collide.
struct DisjunctivePair {
  int robot_a = -1, edge_a = -1;
  int robot_b = -1, edge_b = -1;
  int y = -1;
};

/// Family (8) or (9) applied to one plan edge.
struct ObjectOrder {
  int robot = -1;
  int edge = -1;
  int task = -1;  // task whose primitive detaches/attaches the object
  int k = -1;
  bool detach = true;
};

struct MilpModel {
  std::vector<Var> vars;
  std::vector<Row> rows;
  std::vector<Symbolic> symbolic;
  double H = 0.0;
  double gap = kGapEps;

  std::vector<std::vector<int>> A;   // [robot][plan edge] -> var
  std::vector<std::vector<int>> tn;  // [robot][plan vertex] -> var
  std::vector<std::vector<std::array<int, 2>>> tT;  // [task][k] -> {start var, end var}
  int t = -1;
  std::vector<DisjunctivePair> pairs;
  std::vector<ObjectOrder> object_orders;
  std::vector<PrecedenceConstraint> precedence;  // explicit plus implicit

  int num_binary() const {
    int n = 0;
    for (const auto& v : vars) n += v.type == VarType::Binary;
    return n;
  }
  int num_continuous() const { return static_cast<int>(vars.size()) - num_binary(); }
  int num_constraints() const { return static_cast<int>(rows.size()); }
  int time_var(const TimePoint& tp) const {
    return tT.at(tp.task).at(tp.k)[tp.endpoint == Endpoint::Start ? 0 : 1];
  }
};

namespace detail {

inline std::string lp_ident(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

/// Manipulation-level conflicts derived from Π on the assignment roadmaps.
struct ManipulationConflicts {
  // [robot][manipulation] -> sorted (robot', manipulation')
  std::vector<std::vector<std::vector<std::pair<int, int>>>> robots;
  // [robot][manipulation] -> sorted (object, pole)
  std::vector<std::vector<std::vector<std::pair<int, Pole>>>> objects;
};

inline ManipulationConflicts manipulation_conflicts(
    const std::vector<const roadmap::MultiModalRoadmap*>& maps, const CollisionSet& pi) {
  ManipulationConflicts mc;
  const auto& idx = pi.index;
  mc.robots.resize(maps.size());
  mc.objects.resize(maps.size());
  for (std::size_t r = 0; r < maps.size(); ++r) {
    const auto& map = *maps[r];
    mc.robots[r].resize(map.manipulations.size());
    mc.objects[r].resize(map.manipulations.size());
    for (const auto& m : map.manipulations) {
      std::set<std::pair<int, int>> rs;
      std::set<std::pair<int, Pole>> os;
      for (int eid : m.edges)
        for (int c : pi.neighbors_of(idx.edge(static_cast<int>(r), eid))) {
          const auto cond = idx.decode(c);
          if (cond.type == Condition::Type::Object) {
            os.emplace(cond.index, cond.pole);
          } else if (cond.type == Condition::Type::Edge) {
            const int other = maps[cond.robot]->edges[cond.index].manipulation;
            if (other >= 0 && cond.robot != static_cast<int>(r)) rs.emplace(cond.robot, other);
          }
        }
      mc.robots[r][m.id].assign(rs.begin(), rs.end());
      mc.objects[r][m.id].assign(os.begin(), os.end());
    }
  }
  return mc;
}

}  // namespace detail

/// Everything the assignment stage builds before solving.
struct AssignmentProblem {
  std::vector<std::vector<TaskRoadmap>> task_roadmaps;  // [robot][task]
  std::vector<PlanRoadmap> plan_roadmaps;               // [robot]
  std::vector<std::vector<std::vector<TaskPath>>> paths;  // [robot][task]
  MilpModel model;
};

inline AssignmentProblem build_assignment_problem(
    const Scenario& s, const std::vector<const roadmap::MultiModalRoadmap*>& maps,
    const CollisionSet& pi) {
  AssignmentProblem ap;
  const int N = static_cast<int>(s.robots.size());
  const int T = static_cast<int>(s.tasks.size());
  ap.task_roadmaps.resize(N);
  ap.paths.resize(N);
  for (int r = 0; r < N; ++r) {
    ComponentDistances dist(*maps[r]);
    for (int p = 0; p < T; ++p) ap.task_roadmaps[r].push_back(build_task_roadmap(s, *maps[r], p, dist));
    ap.plan_roadmaps.push_back(build_plan_roadmap(s, *maps[r], ap.task_roadmaps[r], dist));
    for (int p = 0; p < T; ++p) ap.paths[r].push_back(enumerate_task_paths(s, ap.plan_roadmaps[r], p));
  }
  for (int p = 0; p < T; ++p) {
    bool any = false;
    for (int r = 0; r < N; ++r) any = any || !ap.paths[r][p].empty();
    if (!any) throw EncodingError("task '" + s.tasks[p].id + "' cannot be done by any robot");
  }

  auto& m = ap.model;
  const auto& prs = ap.plan_roadmaps;
  double H = 1.0;
  for (const auto& pr : prs)
    for (const auto& e : pr.edges) H += e.w;
  m.H = H;

  auto add_var = [&](std::string name, VarType type) {
    m.vars.push_back({std::move(name), type});
    return static_cast<int>(m.vars.size()) - 1;
  };
  int global_edge = 0;
  m.A.resize(N);
  for (int r = 0; r < N; ++r)
    for (std::size_t e = 0; e < prs[r].edges.size(); ++e)
      m.A[r].push_back(add_var("A_e" + std::to_string(global_edge++), VarType::Binary));

  // (7) pairs: mode-changing plan edges of different robots with colliding manipulations.
  const auto conflicts = detail::manipulation_conflicts(maps, pi);
  std::vector<std::map<int, std::vector<int>>> edges_of_manip(N);
  for (int r = 0; r < N; ++r)
    for (const auto& e : prs[r].edges)
      if (e.kind == PlanEdgeKind::mode_changing) edges_of_manip[r][e.manipulation].push_back(e.id);
  for (int r = 0; r < N; ++r)
    for (const auto& e : prs[r].edges) {
      if (e.kind != PlanEdgeKind::mode_changing) continue;
      for (const auto& [r2, m2] : conflicts.robots[r][e.manipulation]) {
        if (r2 <= r) continue;
        auto it = edges_of_manip[r2].find(m2);
        if (it == edges_of_manip[r2].end()) continue;
        // edges of one task occurrence are never chosen together, by (4)
        for (int e2 : it->second)
          if (prs[r2].edges[e2].task != e.task) m.pairs.push_back({r, e.id, r2, e2, -1});
      }
    }
  for (std::size_t i = 0; i < m.pairs.size(); ++i)
    m.pairs[i].y = add_var("y_" + std::to_string(i), VarType::Binary);

  m.tn.resize(N);
  for (int r = 0; r < N; ++r)
    for (std::size_t v = 0; v < prs[r].vertices.size(); ++v)
      m.tn[r].push_back(add_var(
          "tn_" + detail::lp_ident(s.robots[r].id) + "_" + std::to_string(v), VarType::Continuous));
  m.tT.resize(T);
  for (int p = 0; p < T; ++p)
    for (std::size_t k = 0; k < s.tasks[p].primitives.size(); ++k) {
      const std::string base = "tT_" + detail::lp_ident(s.tasks[p].id) + "_" + std::to_string(k);
      const int a = add_var(base + "_s", VarType::Continuous);
      const int b = add_var(base + "_e", VarType::Continuous);
      m.tT[p].push_back({a, b});
    }
  m.t = add_var("t", VarType::Continuous);

  // A[e] (AND ...) implies a conjunction of inequalities, compiled as
  // sum >= rhs - H * (#antecedents - sum of antecedents).
  auto implication = [&](int family, std::vector<int> lits, std::vector<Ineq> conj) {
    m.symbolic.push_back({family, lits, {conj}});
    for (const auto& q : conj) {
      Row row{family, q.terms, Sense::GE, q.rhs - H * static_cast<double>(lits.size())};
      for (int v : lits) row.terms.emplace_back(v, -H);
      m.rows.push_back(std::move(row));
    }
  };
  auto diff = [](int plus, int minus) { return Terms{{plus, 1.0}, {minus, -1.0}}; };

  for (int r = 0; r < N; ++r) {
    const auto& pr = prs[r];
    std::vector<std::vector<int>> in(pr.vertices.size()), out(pr.vertices.size());
    for (const auto& e : pr.edges) {
      out[e.s].push_back(e.id);
      in[e.e].push_back(e.id);
    }
    // (1) flow conservation, (2) start/goal degree
    for (const auto& v : pr.vertices) {
      Terms t;
      for (int e : in[v.id]) t.emplace_back(m.A[r][e], 1.0);
      if (v.id == PlanRoadmap::kStart || v.id == PlanRoadmap::kGoal) continue;
      for (int e : out[v.id]) t.emplace_back(m.A[r][e], -1.0);
      m.symbolic.push_back({1, {}, {{Ineq{t, 0.0}, Ineq{[&] {
                                                         Terms neg = t;
                                                         for (auto& x : neg) x.second = -x.second;
                                                         return neg;
                                                       }(),
                                                       0.0}}}});
      m.rows.push_back({1, t, Sense::EQ, 0.0});
    }
    {
      Terms ts, tg;
      for (int e : out[PlanRoadmap::kStart]) ts.emplace_back(m.A[r][e], 1.0);
      for (int e : in[PlanRoadmap::kGoal]) tg.emplace_back(m.A[r][e], 1.0);
      for (const auto& t : {ts, tg}) {
        Terms neg = t;
        for (auto& x : neg) x.second = -x.second;
        m.symbolic.push_back({2, {}, {{Ineq{t, 1.0}, Ineq{neg, -1.0}}}});
        m.rows.push_back({2, t, Sense::EQ, 1.0});
      }
    }
    // (3) traversal times
    for (const auto& e : pr.edges)
      implication(3, {m.A[r][e.id]}, {Ineq{diff(m.tn[r][e.e], m.tn[r][e.s]), e.w}});
    // (5) linking
    for (const auto& e : pr.edges) {
      if (e.k < 0) continue;
      const auto [ts, te] = m.tT[e.task][e.k];
      implication(5, {m.A[r][e.id]},
                  {Ineq{diff(ts, m.tn[r][e.s]), 0.0}, Ineq{diff(m.tn[r][e.s], ts), 0.0},
                   Ineq{diff(te, m.tn[r][e.e]), 0.0}, Ineq{diff(m.tn[r][e.e], te), 0.0}});
    }
  }
  // (4) exactly one labeled edge per primitive occurrence
  for (int p = 0; p < T; ++p)
    for (std::size_t k = 0; k < s.tasks[p].primitives.size(); ++k) {
      Terms t;
      for (int r = 0; r < N; ++r)
        for (const auto& e : prs[r].edges)
          if (e.task == p && e.k == static_cast<int>(k)) t.emplace_back(m.A[r][e.id], 1.0);
      Terms neg = t;
      for (auto& x : neg) x.second = -x.second;
      m.symbolic.push_back({4, {}, {{Ineq{t, 1.0}, Ineq{neg, -1.0}}}});
      m.rows.push_back({4, t, Sense::EQ, 1.0});
    }
  // (6) precedence and makespan
  m.precedence = derive_implicit_precedence(s);
  for (const auto& c : m.precedence) {
    const Terms t = diff(m.time_var(c.b), m.time_var(c.a));
    m.symbolic.push_back({6, {}, {{Ineq{t, 0.0}}}});
    m.rows.push_back({6, t, Sense::GE, 0.0});
  }
  for (int v = 0; v < static_cast<int>(m.vars.size()); ++v) {
    if (m.vars[v].type != VarType::Continuous || v == m.t) continue;
    const Terms t = diff(m.t, v);
    m.symbolic.push_back({6, {}, {{Ineq{t, 0.0}}}});
    m.rows.push_back({6, t, Sense::GE, 0.0});
  }
  // (7) temporal disjunction: y = 0 -> e before e', y = 1 -> e' before e
  for (const auto& pp : m.pairs) {
    const auto& ea = prs[pp.robot_a].edges[pp.edge_a];
    const auto& eb = prs[pp.robot_b].edges[pp.edge_b];
    const Ineq before{diff(m.tn[pp.robot_b][eb.s], m.tn[pp.robot_a][ea.e]), m.gap};
    const Ineq after{diff(m.tn[pp.robot_a][ea.s], m.tn[pp.robot_b][eb.e]), m.gap};
    const int Aa = m.A[pp.robot_a][pp.edge_a], Ab = m.A[pp.robot_b][pp.edge_b];
    m.symbolic.push_back({7, {Aa, Ab}, {{before}, {after}}});
    // before: sum >= gap - H(2 - Aa - Ab) - H*y
    Row r1{7, before.terms, Sense::GE, m.gap - 2 * H};
    r1.terms.emplace_back(Aa, -H);
    r1.terms.emplace_back(Ab, -H);
    r1.terms.emplace_back(pp.y, H);
    // after: sum >= gap - H(2 - Aa - Ab) - H*(1 - y)
    Row r2{7, after.terms, Sense::GE, m.gap - 3 * H};
    r2.terms.emplace_back(Aa, -H);
    r2.terms.emplace_back(Ab, -H);
    r2.terms.emplace_back(pp.y, -H);
    m.rows.push_back(std::move(r1));
    m.rows.push_back(std::move(r2));
  }
  // (8)/(9) object-pose sequencing
  for (int r = 0; r < N; ++r)
    for (const auto& e : prs[r].edges) {
      if (e.kind != PlanEdgeKind::mode_changing) continue;
      for (const auto& [o, pole] : conflicts.objects[r][e.manipulation]) {
        const auto kind = pole == Pole::Start ? PrimitiveKind::Detach : PrimitiveKind::Attach;
        for (int q = 0; q < T; ++q) {
          if (q == e.task) continue;
          const auto& prims = s.tasks[q].primitives;
          for (int k = 0; k < static_cast<int>(prims.size()); ++k) {
            if (prims[k].kind != kind || prims[k].object != o) continue;
            m.object_orders.push_back({r, e.id, q, k, pole == Pole::Start});
            if (pole == Pole::Start)
              implication(8, {m.A[r][e.id]}, {Ineq{diff(m.tn[r][e.s], m.tT[q][k][0]), m.gap}});
            else
              implication(9, {m.A[r][e.id]}, {Ineq{diff(m.tT[q][k][1], m.tn[r][e.e]), m.gap}});
          }
        }
      }
    }
  return ap;
}

// ---------------------------------------------------------------------------
// Checking a variable assignment.

struct CheckReport {
  std::vector<std::string> symbolic_violations;
  std::vector<std::string> compiled_violations;
  bool ok() const { return symbolic_violations.empty() && compiled_violations.empty(); }
};

inline double eval(const Terms& t, const std::vector<double>& x) {
  double v = 0.0;
  for (const auto& [i, c] : t) v += c * x[i];
  return v;
}

inline CheckReport check_solution(const MilpModel& m, const std::vector<double>& x,
                                  double tol = kTimeEps) {
  CheckReport rep;
  for (std::size_t i = 0; i < m.vars.size(); ++i) {
    if (x[i] < -tol) rep.compiled_violations.push_back("negative " + m.vars[i].name);
    if (m.vars[i].type == VarType::Binary && x[i] != 0.0 && x[i] != 1.0)
      rep.compiled_violations.push_back("fractional " + m.vars[i].name);
  }
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& r = m.rows[i];
    const double lhs = eval(r.terms, x);
    const bool ok = r.sense == Sense::GE   ? lhs >= r.rhs - tol
                    : r.sense == Sense::LE ? lhs <= r.rhs + tol
                                           : std::abs(lhs - r.rhs) <= tol;
    if (!ok)
      rep.compiled_violations.push_back("row " + std::to_string(i) + " family " +
                                        std::to_string(r.family));
  }
  for (std::size_t i = 0; i < m.symbolic.size(); ++i) {
    const auto& c = m.symbolic[i];
    bool active = true;
    for (int a : c.antecedents) {
      active = active && x[a] > 0.5;
    }
    if (!active) continue;
    bool any = false;
    for (const auto& alt : c.alternatives) {
      bool all = true;
      for (const auto& q : alt) all = all && eval(q.terms, x) >= q.rhs - tol;
      any = any || all;
    }
    if (!any)
      rep.symbolic_violations.push_back("constraint " + std::to_string(i) + " family " +
                                        std::to_string(c.family));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// LP export.

inline std::string to_lp(const MilpModel& m) {
  std::ostringstream os;
  os.precision(17);
  auto write_terms = [&](const Terms& terms) {
    std::map<int, double> merged;
    for (const auto& [v, c] : terms) merged[v] += c;
    int col = 0;
    bool first = true;
    for (const auto& [v, c] : merged) {
      if (c == 0.0) continue;
      std::ostringstream t;
      t.precision(17);
      if (c < 0)
        t << (first ? "- " : " - ");
      else if (!first)
        t << " + ";
      const double a = std::abs(c);
      if (a != 1.0) t << a << ' ';
      t << m.vars[v].name;
      const auto s = t.str();
      if (col + s.size() > 200) {
        os << "\n   ";
        col = 3;
      }
      os << s;
      col += static_cast<int>(s.size());
      first = false;
    }
    if (first) os << "0 " << m.vars[m.t].name;
  };
  os << "\\ assignment model\nMinimize\n obj: " << m.vars[m.t].name << "\nSubject To\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& r = m.rows[i];
    os << " c" << r.family << "_" << i << ": ";
    write_terms(r.terms);
    os << (r.sense == Sense::GE ? " >= " : r.sense == Sense::LE ? " <= " : " = ") << r.rhs
       << "\n";
  }
  os << "Bounds\n";
  for (const auto& v : m.vars)
    if (v.type == VarType::Continuous) os << " " << v.name << " >= 0\n";
  os << "Binaries\n";
  for (const auto& v : m.vars)
    if (v.type == VarType::Binary) os << " " << v.name << "\n";
  os << "End\n";
  return os.str();
}

inline void export_lp(const MilpModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << to_lp(m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace mmtamp::assign
