//! Dependency graph, recomputation and cycle detection.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::eval::{column_target, range_members, resolve_ref, RefTarget};
use super::{evaluate, AggArg, Expr, Formula};
use crate::model::{CellId, Pos, SheetState};
use crate::value::{ErrorKind, Value};

/// Cells a formula reads, plus textual descriptions of references that do
/// not resolve.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Deps {
    pub cells: BTreeSet<CellId>,
    pub dangling: Vec<String>,
}

/// Cells `f` reads when placed at `host`. Ranges contribute every member.
pub fn dependencies(f: &Formula, state: &SheetState, host: Pos) -> Deps {
    let mut deps = Deps::default();
    let add = |t: Option<CellId>, what: &dyn Fn() -> String, deps: &mut Deps| match t {
        Some(id) => {
            deps.cells.insert(id);
        }
        None => deps.dangling.push(what()),
    };
    let mut stack = vec![f.expr()];
    while let Some(e) = stack.pop() {
        match e {
            Expr::Ref(r) => {
                let t = match resolve_ref(r, state, host) {
                    RefTarget::Cell(id) => Some(id),
                    RefTarget::Missing => None,
                };
                add(t, &|| Formula::new(Expr::Ref(r.clone())).to_text(Some(host)), &mut deps);
            }
            Expr::Column(n) => {
                add(column_target(n, state, host), &|| n.clone(), &mut deps);
            }
            Expr::Prior => add(state.coords().cell_at(host), &|| "VALUE".into(), &mut deps),
            Expr::Agg(_, args) => {
                for a in args {
                    match a {
                        AggArg::Range(x, y) => match range_members(x, y, state, host) {
                            Some(ids) => deps.cells.extend(ids),
                            None => {
                                let t = |r: &super::CellRef| {
                                    Formula::new(Expr::Ref(r.clone())).to_text(Some(host))
                                };
                                deps.dangling.push(format!("{}:{}", t(x), t(y)));
                            }
                        },
                        AggArg::Expr(x) => stack.push(x),
                    }
                }
            }
            Expr::Unary(_, x) | Expr::Cast(x, _) => stack.push(x),
            Expr::Binary(_, a, b) => stack.extend([&**a, &**b]),
            Expr::If(a, b, c) | Expr::Between(a, b, c) => stack.extend([&**a, &**b, &**c]),
            Expr::In(x, items) => {
                stack.push(x);
                stack.extend(items.iter());
            }
            Expr::Lit(_) | Expr::RowId => {}
        }
    }
    deps
}

/// For every placed cell, the cells it reads.
pub fn dependency_graph(state: &SheetState) -> BTreeMap<CellId, BTreeSet<CellId>> {
    state
        .coords()
        .cells_row_major()
        .into_iter()
        .map(|(pos, id)| {
            let f = &state.cell(id).expect("placed cell exists").formula;
            (id, dependencies(f, state, pos).cells)
        })
        .collect()
}

/// Strongly connected components, precedents before dependents.
fn components(graph: &BTreeMap<CellId, BTreeSet<CellId>>) -> Vec<Vec<CellId>> {
    let mut g: DiGraph<CellId, ()> = DiGraph::new();
    let mut idx: BTreeMap<CellId, NodeIndex> = BTreeMap::new();
    for id in graph.keys() {
        idx.insert(*id, g.add_node(*id));
    }
    for (id, deps) in graph {
        for d in deps {
            if let Some(t) = idx.get(d) {
                g.add_edge(idx[id], *t, ());
            }
        }
    }
    // Edges point from a cell to what it reads, so postorder puts precedents
    // first.
    tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut ids: Vec<CellId> = c.into_iter().map(|n| g[n]).collect();
            ids.sort();
            ids
        })
        .collect()
}

fn is_cyclic(comp: &[CellId], graph: &BTreeMap<CellId, BTreeSet<CellId>>) -> bool {
    comp.len() > 1 || graph.get(&comp[0]).is_some_and(|d| d.contains(&comp[0]))
}

/// Cells that lie on some reference cycle.
pub fn cyclic_cells(state: &SheetState) -> BTreeSet<CellId> {
    let graph = dependency_graph(state);
    components(&graph)
        .into_iter()
        .filter(|c| is_cyclic(c, &graph))
        .flatten()
        .collect()
}

/// Re-evaluate `dirty` and everything that transitively reads it, in
/// dependency order. Cells on a cycle get `CYCLE`.
pub fn recompute(state: &SheetState, dirty: &BTreeSet<CellId>) -> SheetState {
    let mut out = state.clone();
    recompute_in_place(&mut out, dirty);
    out
}

/// Re-evaluate every cell.
pub fn recompute_all(state: &SheetState) -> SheetState {
    let all: BTreeSet<CellId> = state.cells().map(|c| c.id).collect();
    recompute(state, &all)
}

pub(crate) fn recompute_in_place(state: &mut SheetState, dirty: &BTreeSet<CellId>) {
    let graph = dependency_graph(state);
    let mut readers: BTreeMap<CellId, Vec<CellId>> = BTreeMap::new();
    for (id, deps) in &graph {
        for d in deps {
            readers.entry(*d).or_default().push(*id);
        }
    }
    let mut affected: BTreeSet<CellId> = BTreeSet::new();
    let mut stack: Vec<CellId> = dirty.iter().copied().filter(|d| graph.contains_key(d)).collect();
    while let Some(id) = stack.pop() {
        if affected.insert(id) {
            if let Some(rs) = readers.get(&id) {
                stack.extend(rs.iter().copied());
            }
        }
    }
    let sub: BTreeMap<CellId, BTreeSet<CellId>> = affected
        .iter()
        .map(|id| (*id, graph[id].intersection(&affected).copied().collect()))
        .collect();
    for comp in components(&sub) {
        if is_cyclic(&comp, &sub) {
            for id in comp {
                state.cell_mut(id).expect("exists").value = Value::Error(ErrorKind::Cycle);
            }
            continue;
        }
        let id = comp[0];
        let pos = state.coords().position_of(id).expect("placed");
        let v = evaluate(&state.cell(id).expect("exists").formula, state, pos);
        state.cell_mut(id).expect("exists").value = v;
    }
}

/// Elementary cycles of the reference graph (Johnson's algorithm). Each
/// cycle starts at its smallest cell id.
pub fn detect_cycles(state: &SheetState) -> Vec<Vec<CellId>> {
    let graph = dependency_graph(state);
    let nodes: Vec<CellId> = graph.keys().copied().collect();
    let mut out = Vec::new();
    for (i, &s) in nodes.iter().enumerate() {
        let allowed: BTreeSet<CellId> = nodes[i..].iter().copied().collect();
        let sub: BTreeMap<CellId, BTreeSet<CellId>> = allowed
            .iter()
            .map(|id| (*id, graph[id].intersection(&allowed).copied().collect()))
            .collect();
        let Some(comp) = components(&sub).into_iter().find(|c| c.contains(&s)) else {
            continue;
        };
        if !is_cyclic(&comp, &sub) {
            continue;
        }
        let comp: BTreeSet<CellId> = comp.into_iter().collect();
        let adj: BTreeMap<CellId, Vec<CellId>> = comp
            .iter()
            .map(|id| (*id, sub[id].intersection(&comp).copied().collect()))
            .collect();
        let mut j = Johnson {
            adj: &adj,
            blocked: BTreeSet::new(),
            b: BTreeMap::new(),
            stack: Vec::new(),
            out: &mut out,
        };
        j.circuit(s, s);
    }
    out
}

struct Johnson<'a> {
    adj: &'a BTreeMap<CellId, Vec<CellId>>,
    blocked: BTreeSet<CellId>,
    b: BTreeMap<CellId, BTreeSet<CellId>>,
    stack: Vec<CellId>,
    out: &'a mut Vec<Vec<CellId>>,
}

impl Johnson<'_> {
    fn unblock(&mut self, u: CellId) {
        let mut work = vec![u];
        while let Some(u) = work.pop() {
            if self.blocked.remove(&u) {
                if let Some(ws) = self.b.remove(&u) {
                    work.extend(ws);
                }
            }
        }
    }

    fn circuit(&mut self, v: CellId, s: CellId) -> bool {
        let mut found = false;
        self.stack.push(v);
        self.blocked.insert(v);
        for &w in &self.adj[&v] {
            if w == s {
                self.out.push(self.stack.clone());
                found = true;
            } else if !self.blocked.contains(&w) && self.circuit(w, s) {
                found = true;
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &w in &self.adj[&v] {
                self.b.entry(w).or_default().insert(v);
            }
        }
        self.stack.pop();
        found
    }
}
