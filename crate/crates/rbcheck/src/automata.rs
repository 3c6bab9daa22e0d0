//! Specification automata, the finite-word automaton of the unwinding, the
//! bounded-counter automaton over the classified edges, synchronous products,
//! and emptiness with self-checking lasso certificates. Safety and liveness
//! checks wire the whole pipeline together.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde_json::json;
use thiserror::Error;

use crate::classifier::{classify, Classification, EdgeColor};
use crate::model::{Diagnostic, EdgeId, EdgeLabel, ProcessTemplate};
use crate::oracle::{realize_lasso, realize_word, SearchBudget};
use crate::timed::RelabelMap;
use crate::unwinding::{build_unwinding, UEdgeId, Unwinding, UnwindingTemplate};

// ---------------------------------------------------------------------------
// specification automata

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldPattern {
    Any,
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LetterPattern {
    Any,
    Broadcast,
    Letter { action: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EdgePattern {
    AnyEdge,
    Fields { src: FieldPattern, letter: LetterPattern, dst: FieldPattern },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecTransition {
    pub src: usize,
    pub pattern: EdgePattern,
    pub dst: usize,
}

/// A nondeterministic automaton over template edges: Buechi acceptance for
/// infinite words (`nbw`), final-state acceptance for finite words (`nfw`).
/// Specifications describe the BAD behaviors; the checks test emptiness of
/// the product with the system automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecAutomaton {
    pub finite: bool,
    pub states: Vec<String>,
    pub initial: BTreeSet<usize>,
    pub accepting: BTreeSet<usize>,
    pub transitions: Vec<SpecTransition>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecBindError {
    #[error("pattern references unknown state `{0}`")]
    UnknownState(String),
    #[error("pattern references unknown action `{0}`")]
    UnknownAction(String),
    #[error("letter index {index} out of range 1..={k}")]
    LetterIndexRange { index: usize, k: usize },
}

/// A specification whose patterns have been resolved against a template: one
/// boolean per (transition, template edge).
#[derive(Debug, Clone)]
pub struct BoundSpec {
    pub spec: SpecAutomaton,
    pub matches: Vec<Vec<bool>>,
}

fn state_matches(name: &str, pattern: &str) -> bool {
    name == pattern || name.starts_with(&format!("{pattern}__"))
}

/// Resolves spec patterns against a template; with a relabel map, original
/// letters match all their relabeled descendants and original state names
/// match every product state built from them.
pub fn bind_spec(
    spec: &SpecAutomaton,
    t: &ProcessTemplate,
    map: Option<&RelabelMap>,
) -> Result<BoundSpec, SpecBindError> {
    // validate referenced names
    for tr in &spec.transitions {
        if let EdgePattern::Fields { src, letter, dst } = &tr.pattern {
            for field in [src, dst] {
                if let FieldPattern::Name(nm) = field {
                    if !t.states.iter().any(|s| state_matches(s, nm)) {
                        return Err(SpecBindError::UnknownState(nm.clone()));
                    }
                }
            }
            if let LetterPattern::Letter { action, index } = letter {
                if *index == 0 || *index > t.k {
                    return Err(SpecBindError::LetterIndexRange { index: *index, k: t.k });
                }
                let direct = t.actions.iter().any(|a| &a.name == action);
                let via_map = map
                    .map(|m| m.actions.values().any(|e| &e.orig_action == action))
                    .unwrap_or(false);
                if !direct && !via_map {
                    return Err(SpecBindError::UnknownAction(action.clone()));
                }
            }
        }
    }
    let matches = spec
        .transitions
        .iter()
        .map(|tr| {
            (0..t.edges.len())
                .map(|e| pattern_matches(&tr.pattern, t, map, EdgeId(e)))
                .collect()
        })
        .collect();
    Ok(BoundSpec { spec: spec.clone(), matches })
}

fn pattern_matches(
    p: &EdgePattern,
    t: &ProcessTemplate,
    map: Option<&RelabelMap>,
    e: EdgeId,
) -> bool {
    let edge = &t.edges[e.0];
    match p {
        EdgePattern::AnyEdge => true,
        EdgePattern::Fields { src, letter, dst } => {
            let src_ok = match src {
                FieldPattern::Any => true,
                FieldPattern::Name(nm) => state_matches(t.state_name(edge.src), nm),
            };
            let dst_ok = match dst {
                FieldPattern::Any => true,
                FieldPattern::Name(nm) => state_matches(t.state_name(edge.dst), nm),
            };
            let letter_ok = match letter {
                LetterPattern::Any => true,
                LetterPattern::Broadcast => edge.label.is_broadcast(),
                LetterPattern::Letter { action, index } => match edge.label {
                    EdgeLabel::Rendezvous { action: a, index: i } => {
                        let name = &t.actions[a.0].name;
                        i == *index
                            && (name == action
                                || map
                                    .and_then(|m| m.actions.get(name))
                                    .map(|entry| &entry.orig_action == action)
                                    .unwrap_or(false))
                    }
                    EdgeLabel::Broadcast => false,
                },
            };
            src_ok && dst_ok && letter_ok
        }
    }
}

/// A spec automaton that accepts exactly `prefix . cycle^omega`, as exact
/// one-edge patterns over the template.
pub fn lasso_word_spec(t: &ProcessTemplate, prefix: &[EdgeId], cycle: &[EdgeId]) -> SpecAutomaton {
    assert!(!cycle.is_empty());
    let word: Vec<EdgeId> = prefix.iter().chain(cycle).copied().collect();
    let n = word.len();
    let exact = |e: EdgeId| -> EdgePattern {
        let edge = &t.edges[e.0];
        EdgePattern::Fields {
            src: FieldPattern::Name(t.state_name(edge.src).to_string()),
            letter: match edge.label {
                EdgeLabel::Broadcast => LetterPattern::Broadcast,
                EdgeLabel::Rendezvous { action, index } => LetterPattern::Letter {
                    action: t.actions[action.0].name.clone(),
                    index,
                },
            },
            dst: FieldPattern::Name(t.state_name(edge.dst).to_string()),
        }
    };
    let transitions = (0..n)
        .map(|i| SpecTransition {
            src: i,
            pattern: exact(word[i]),
            dst: if i + 1 == n { prefix.len() } else { i + 1 },
        })
        .collect();
    SpecAutomaton {
        finite: false,
        states: (0..n).map(|i| format!("w{i}")).collect(),
        initial: [0].into(),
        accepting: (0..n).collect(),
        transitions,
    }
}

// ---------------------------------------------------------------------------
// graph utilities

/// Strongly connected components; returns a component id per node. Ids are
/// renumbered so that iterating components by id is deterministic.
pub fn scc_partition(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Vec<usize> {
    let mut g: DiGraph<(), (), u32> = DiGraph::new();
    for _ in 0..n {
        g.add_node(());
    }
    for (s, d) in edges {
        g.add_edge((s as u32).into(), (d as u32).into(), ());
    }
    let sccs = tarjan_scc(&g);
    let mut out = vec![usize::MAX; n];
    for (i, comp) in sccs.iter().enumerate() {
        for node in comp {
            out[node.index()] = i;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// the finite-word automaton of the unwinding

/// The unwinding viewed as an automaton on finite words over the base
/// template's edges; every state accepts.
#[derive(Debug, Clone)]
pub struct FinAutomaton {
    pub state_names: Vec<String>,
    pub initial: Vec<usize>,
    pub transitions: Vec<(usize, EdgeId, usize)>,
}

pub fn build_afin(u: &Unwinding, ut: &UnwindingTemplate) -> FinAutomaton {
    let transitions = ut
        .template
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.src.0, u.edges[ut.edge_uidx[i].0].base, e.dst.0))
        .collect();
    FinAutomaton {
        state_names: ut.template.states.clone(),
        initial: ut.template.init.iter().map(|s| s.0).collect(),
        transitions,
    }
}

// ---------------------------------------------------------------------------
// bounded-counter automata

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterOp {
    Noop,
    Increment,
    Reset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcaTransition {
    pub src: usize,
    pub edge: EdgeId,
    pub op: CounterOp,
    pub dst: usize,
}

/// A Buechi automaton with one increment/reset counter; acceptance needs all
/// Buechi sets visited infinitely often and the counter bounded.
#[derive(Debug, Clone)]
pub struct BoundedCounterAutomaton {
    pub state_names: Vec<String>,
    pub initial: Vec<usize>,
    pub transitions: Vec<BcaTransition>,
    pub buchi_sets: Vec<BTreeSet<usize>>,
}

/// Builds the infinite-execution automaton from the classified unwinding:
/// copy 1 carries every edge and can jump into copies 2 and 3; copy 2 keeps
/// green and orange edges, counting orange rendezvous edges and resetting on
/// broadcasts; copy 3 keeps blue and green edges and hence has no broadcast
/// edges at all. Copies 2 and 3 are the Buechi states.
pub fn build_ainf(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    cls: &Classification,
) -> BoundedCounterAutomaton {
    let ns = ut.template.states.len();
    let name = |copy: usize, s: usize| format!("{}:{}", copy + 1, ut.template.states[s]);
    let mut state_names = Vec::with_capacity(3 * ns);
    for copy in 0..3 {
        for s in 0..ns {
            state_names.push(name(copy, s));
        }
    }
    let initial: Vec<usize> = ut.template.init.iter().map(|s| s.0).collect();

    let mut transitions = Vec::new();
    for (i, e) in ut.template.edges.iter().enumerate() {
        let base = u.edges[ut.edge_uidx[i].0].base;
        let color = cls.color_of(UEdgeId(i));
        let is_b = e.label.is_broadcast();
        // copy 1 retains everything and guesses when to commit
        for target_copy in 0..3 {
            transitions.push(BcaTransition {
                src: e.src.0,
                edge: base,
                op: CounterOp::Noop,
                dst: target_copy * ns + e.dst.0,
            });
        }
        if matches!(color, EdgeColor::Green | EdgeColor::Orange) {
            let op = match color {
                EdgeColor::Green => CounterOp::Noop,
                EdgeColor::Orange if is_b => CounterOp::Reset,
                EdgeColor::Orange => CounterOp::Increment,
                _ => unreachable!(),
            };
            transitions.push(BcaTransition {
                src: ns + e.src.0,
                edge: base,
                op,
                dst: ns + e.dst.0,
            });
        }
        if matches!(color, EdgeColor::Blue | EdgeColor::Green) {
            assert!(!is_b, "blue and green edges are never broadcast edges");
            transitions.push(BcaTransition {
                src: 2 * ns + e.src.0,
                edge: base,
                op: CounterOp::Noop,
                dst: 2 * ns + e.dst.0,
            });
        }
    }
    let buchi: BTreeSet<usize> = (ns..3 * ns).collect();
    BoundedCounterAutomaton {
        state_names,
        initial,
        transitions,
        buchi_sets: vec![buchi],
    }
}

/// Synchronous product with a bad-behavior NBW; counter operations come from
/// the system side, and the product carries both Buechi obligations.
pub fn intersect(a: &BoundedCounterAutomaton, bound: &BoundSpec) -> BoundedCounterAutomaton {
    assert!(!bound.spec.finite, "liveness products need an nbw spec");
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut names = Vec::new();
    let mut pairs = Vec::new();
    let mut initial = Vec::new();
    let mut queue = VecDeque::new();
    for ai in &a.initial {
        for qi in &bound.spec.initial {
            let key = (*ai, *qi);
            if !index.contains_key(&key) {
                index.insert(key, pairs.len());
                names.push(format!("{}|{}", a.state_names[*ai], bound.spec.states[*qi]));
                pairs.push(key);
                initial.push(index[&key]);
                queue.push_back(index[&key]);
            }
        }
    }
    // transitions grouped by source for discovery
    let mut a_by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in a.transitions.iter().enumerate() {
        a_by_src.entry(tr.src).or_default().push(i);
    }
    let mut s_by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in bound.spec.transitions.iter().enumerate() {
        s_by_src.entry(tr.src).or_default().push(i);
    }
    let mut transitions = Vec::new();
    while let Some(v) = queue.pop_front() {
        let (ai, qi) = pairs[v];
        let Some(av) = a_by_src.get(&ai) else { continue };
        let Some(sv) = s_by_src.get(&qi) else { continue };
        for &ti in av {
            let at = a.transitions[ti];
            for &si in sv {
                if !bound.matches[si][at.edge.0] {
                    continue;
                }
                let st = &bound.spec.transitions[si];
                let key = (at.dst, st.dst);
                let d = match index.get(&key) {
                    Some(d) => *d,
                    None => {
                        index.insert(key, pairs.len());
                        names.push(format!(
                            "{}|{}",
                            a.state_names[at.dst], bound.spec.states[st.dst]
                        ));
                        pairs.push(key);
                        queue.push_back(pairs.len() - 1);
                        pairs.len() - 1
                    }
                };
                transitions.push(BcaTransition { src: v, edge: at.edge, op: at.op, dst: d });
            }
        }
    }
    let mut buchi_sets = Vec::new();
    for set in &a.buchi_sets {
        buchi_sets.push(
            pairs
                .iter()
                .enumerate()
                .filter(|(_, (ai, _))| set.contains(ai))
                .map(|(i, _)| i)
                .collect(),
        );
    }
    buchi_sets.push(
        pairs
            .iter()
            .enumerate()
            .filter(|(_, (_, qi))| bound.spec.accepting.contains(qi))
            .map(|(i, _)| i)
            .collect(),
    );
    BoundedCounterAutomaton { state_names: names, initial, transitions, buchi_sets }
}

/// An accepted lasso: indices into the automaton's transition list.
#[derive(Debug, Clone)]
pub struct Lasso {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct EmptinessStats {
    pub states: usize,
    pub transitions: usize,
    pub sccs: usize,
}

/// Replays a lasso through the automaton: the prefix starts in an initial
/// state and chains into the cycle, the cycle closes, visits every Buechi
/// set, and keeps the counter bounded (a reset on the cycle, or no increment
/// on it).
pub fn lasso_is_accepting(a: &BoundedCounterAutomaton, lasso: &Lasso) -> bool {
    if lasso.cycle.is_empty() {
        return false;
    }
    let first = lasso.prefix.first().or(lasso.cycle.first()).unwrap();
    let mut cur = a.transitions[*first].src;
    if !a.initial.contains(&cur) {
        return false;
    }
    for ti in lasso.prefix.iter().chain(&lasso.cycle) {
        let tr = &a.transitions[*ti];
        if tr.src != cur {
            return false;
        }
        cur = tr.dst;
    }
    let cycle_start = a.transitions[lasso.cycle[0]].src;
    if cur != cycle_start {
        return false;
    }
    let cycle_nodes: BTreeSet<usize> = lasso
        .cycle
        .iter()
        .map(|ti| a.transitions[*ti].src)
        .collect();
    for set in &a.buchi_sets {
        if set.is_disjoint(&cycle_nodes) {
            return false;
        }
    }
    let has_reset = lasso
        .cycle
        .iter()
        .any(|ti| a.transitions[*ti].op == CounterOp::Reset);
    let has_increment = lasso
        .cycle
        .iter()
        .any(|ti| a.transitions[*ti].op == CounterOp::Increment);
    has_reset || !has_increment
}

/// Decides language emptiness. Nonemptiness needs a reachable cycle through
/// every Buechi set that keeps the counter bounded: either it contains a
/// reset, or it avoids increments entirely. Any bounded accepting run yields
/// such a cycle (annotate states with counter values: a value-preserving
/// cycle with an increment but no reset is impossible), and conversely such
/// a cycle pumps into an accepting run.
pub fn emptiness(a: &BoundedCounterAutomaton) -> (Option<Lasso>, EmptinessStats) {
    let n = a.state_names.len();
    // reachable restriction
    let mut by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in a.transitions.iter().enumerate() {
        by_src.entry(tr.src).or_default().push(i);
    }
    let mut reachable = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for i in &a.initial {
        if !reachable[*i] {
            reachable[*i] = true;
            queue.push_back(*i);
        }
    }
    while let Some(v) = queue.pop_front() {
        if let Some(ts) = by_src.get(&v) {
            for &ti in ts {
                let d = a.transitions[ti].dst;
                if !reachable[d] {
                    reachable[d] = true;
                    queue.push_back(d);
                }
            }
        }
    }
    let live: Vec<usize> = a
        .transitions
        .iter()
        .enumerate()
        .filter(|(_, tr)| reachable[tr.src])
        .map(|(i, _)| i)
        .collect();
    let sccs = scc_partition(n, live.iter().map(|i| {
        let tr = &a.transitions[*i];
        (tr.src, tr.dst)
    }));
    let mut stats = EmptinessStats {
        states: reachable.iter().filter(|r| **r).count(),
        transitions: live.len(),
        sccs: 0,
    };

    // group members and internal transitions per SCC, deterministic order
    let mut members: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (v, r) in reachable.iter().enumerate() {
        if *r {
            members.entry(sccs[v]).or_default().insert(v);
        }
    }
    stats.sccs = members.len();
    let mut order: Vec<(usize, &BTreeSet<usize>)> = members
        .iter()
        .map(|(id, m)| (*id, m))
        .collect();
    order.sort_by_key(|(_, m)| *m.iter().next().unwrap());

    for (scc_id, m) in order {
        let internal: Vec<usize> = live
            .iter()
            .copied()
            .filter(|i| {
                let tr = &a.transitions[*i];
                sccs[tr.src] == scc_id && sccs[tr.dst] == scc_id
            })
            .collect();
        if internal.is_empty() {
            continue;
        }
        // case A: every Buechi set meets the SCC and a reset edge exists
        let all_sets_meet = a.buchi_sets.iter().all(|set| !set.is_disjoint(m));
        if all_sets_meet {
            if let Some(reset) = internal
                .iter()
                .copied()
                .find(|i| a.transitions[*i].op == CounterOp::Reset)
            {
                let lasso = build_lasso(a, &by_src, &internal, reset, m);
                assert!(lasso_is_accepting(a, &lasso), "certificate must replay");
                return (Some(lasso), stats);
            }
        }
        // case B: a sub-SCC of the increment-free subgraph meets every set
        let inc_free: Vec<usize> = internal
            .iter()
            .copied()
            .filter(|i| a.transitions[*i].op != CounterOp::Increment)
            .collect();
        if inc_free.is_empty() {
            continue;
        }
        let sub = scc_partition(n, inc_free.iter().map(|i| {
            let tr = &a.transitions[*i];
            (tr.src, tr.dst)
        }));
        let mut sub_members: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for i in &inc_free {
            let tr = &a.transitions[*i];
            sub_members.entry(sub[tr.src]).or_default().insert(tr.src);
            sub_members.entry(sub[tr.dst]).or_default().insert(tr.dst);
        }
        let mut sub_order: Vec<(usize, BTreeSet<usize>)> = sub_members
            .into_iter()
            .filter(|(id, mm)| {
                // keep only genuine sub-SCCs: some internal inc-free edge
                inc_free.iter().any(|i| {
                    let tr = &a.transitions[*i];
                    sub[tr.src] == *id && sub[tr.dst] == *id && mm.contains(&tr.src)
                })
            })
            .collect();
        sub_order.sort_by_key(|(_, mm)| *mm.iter().next().unwrap());
        for (sub_id, mm) in sub_order {
            if !a.buchi_sets.iter().all(|set| !set.is_disjoint(&mm)) {
                continue;
            }
            let sub_internal: Vec<usize> = inc_free
                .iter()
                .copied()
                .filter(|i| {
                    let tr = &a.transitions[*i];
                    sub[tr.src] == sub_id && sub[tr.dst] == sub_id
                })
                .collect();
            let anchor_tr = sub_internal[0];
            let lasso = build_lasso(a, &by_src, &sub_internal, anchor_tr, &mm);
            assert!(lasso_is_accepting(a, &lasso), "certificate must replay");
            return (Some(lasso), stats);
        }
    }
    (None, stats)
}

/// Builds a concrete lasso: the cycle takes `anchor_tr`, then visits one
/// representative of every Buechi set inside the allowed transition set, and
/// closes; the prefix is a shortest path from an initial state.
fn build_lasso(
    a: &BoundedCounterAutomaton,
    by_src: &BTreeMap<usize, Vec<usize>>,
    allowed: &[usize],
    anchor_tr: usize,
    members: &BTreeSet<usize>,
) -> Lasso {
    let allowed_set: BTreeSet<usize> = allowed.iter().copied().collect();
    let path_inside = |from: usize, to: usize| -> Vec<usize> {
        if from == to {
            return Vec::new();
        }
        let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
        let mut seen: BTreeSet<usize> = [from].into();
        let mut q = VecDeque::from([from]);
        while let Some(v) = q.pop_front() {
            if let Some(ts) = by_src.get(&v) {
                for ti in ts {
                    if !allowed_set.contains(ti) {
                        continue;
                    }
                    let d = a.transitions[*ti].dst;
                    if seen.insert(d) {
                        parent.insert(d, *ti);
                        if d == to {
                            let mut path = Vec::new();
                            let mut cur = to;
                            while cur != from {
                                let ti = parent[&cur];
                                path.push(ti);
                                cur = a.transitions[ti].src;
                            }
                            path.reverse();
                            return path;
                        }
                        q.push_back(d);
                    }
                }
            }
        }
        unreachable!("strongly connected members must be mutually reachable");
    };

    let start = a.transitions[anchor_tr].src;
    let mut cycle = vec![anchor_tr];
    let mut at = a.transitions[anchor_tr].dst;
    for set in &a.buchi_sets {
        let rep = *set
            .intersection(members)
            .next()
            .expect("caller checked the intersection");
        // skip if some state on the walk already covers the set
        let covered = cycle.iter().map(|ti| a.transitions[*ti].src).any(|s| set.contains(&s))
            || set.contains(&at);
        if covered {
            continue;
        }
        let leg = path_inside(at, rep);
        at = rep;
        cycle.extend(leg);
    }
    cycle.extend(path_inside(at, start));

    // shortest prefix from an initial state to the cycle start
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut q = VecDeque::new();
    for i in &a.initial {
        if seen.insert(*i) {
            q.push_back(*i);
        }
    }
    let mut prefix = Vec::new();
    if !seen.contains(&start) {
        'bfs: while let Some(v) = q.pop_front() {
            if let Some(ts) = by_src.get(&v) {
                for ti in ts {
                    let d = a.transitions[*ti].dst;
                    if !seen.contains(&d) {
                        seen.insert(d);
                        parent.insert(d, *ti);
                        if d == start {
                            break 'bfs;
                        }
                        q.push_back(d);
                    }
                }
            }
        }
        let mut cur = start;
        while let Some(ti) = parent.get(&cur) {
            prefix.push(*ti);
            cur = a.transitions[*ti].src;
            if a.initial.contains(&cur) && !parent.contains_key(&cur) {
                break;
            }
        }
        prefix.reverse();
    }
    Lasso { prefix, cycle }
}

// ---------------------------------------------------------------------------
// verdicts and end-to-end checks

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violated,
}

#[derive(Debug, Clone, Default)]
pub struct VerdictStats {
    pub states: usize,
    pub transitions: usize,
    pub sccs: usize,
    pub ms: u64,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub status: Status,
    /// Prefix and cycle words over base template edges; the cycle is empty
    /// for finite-word (safety) counterexamples.
    pub counterexample: Option<(Vec<EdgeId>, Vec<EdgeId>)>,
    pub realized_at_n: Option<usize>,
    pub stats: VerdictStats,
}

impl Verdict {
    pub fn to_json(&self, t: &ProcessTemplate) -> serde_json::Value {
        let word = |w: &[EdgeId]| -> Vec<String> {
            w.iter().map(|e| t.edge_display(*e)).collect()
        };
        json!({
            "status": match self.status { Status::Holds => "holds", Status::Violated => "violated" },
            "counterexample": self.counterexample.as_ref().map(|(p, c)| json!({
                "prefix": word(p),
                "cycle": word(c),
            })),
            "realized_at_n": self.realized_at_n,
            "stats": {
                "states": self.stats.states,
                "transitions": self.stats.transitions,
                "sccs": self.stats.sccs,
                "ms": self.stats.ms,
            },
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("expected a {expected} specification for this check")]
    WrongSpecKind { expected: &'static str },
    #[error("template is not well-formed: {0:?}")]
    InvalidTemplate(Vec<Diagnostic>),
    #[error(transparent)]
    Bind(#[from] SpecBindError),
    #[error(transparent)]
    Classify(#[from] crate::classifier::ClassifyError),
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Try to confirm counterexamples on concrete instances via the oracle.
    pub realize: bool,
    pub budget: SearchBudget,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { realize: true, budget: SearchBudget::default() }
    }
}

/// Decides whether any finite execution matches the bad-prefix automaton:
/// emptiness of the product of the all-accepting unwinding automaton with the
/// spec, over finite words.
pub fn check_safety(
    t: &ProcessTemplate,
    bad_prefix: &SpecAutomaton,
    map: Option<&RelabelMap>,
    opts: &CheckOptions,
) -> Result<Verdict, PipelineError> {
    if !bad_prefix.finite {
        return Err(PipelineError::WrongSpecKind { expected: "nfw" });
    }
    let diags = t.validate(false);
    if !diags.is_empty() {
        return Err(PipelineError::InvalidTemplate(diags));
    }
    let u = build_unwinding(t);
    let ut = u.to_template();
    let afin = build_afin(&u, &ut);
    let bound = bind_spec(bad_prefix, t, map)?;

    let mut a_by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, (s, _, _)) in afin.transitions.iter().enumerate() {
        a_by_src.entry(*s).or_default().push(i);
    }
    let mut s_by_src: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, tr) in bound.spec.transitions.iter().enumerate() {
        s_by_src.entry(tr.src).or_default().push(i);
    }

    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    let mut parent: Vec<Option<(usize, EdgeId)>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut goal = None;
    'outer: for ai in &afin.initial {
        for qi in &bound.spec.initial {
            let key = (*ai, *qi);
            if index.contains_key(&key) {
                continue;
            }
            index.insert(key, nodes.len());
            nodes.push(key);
            parent.push(None);
            if bound.spec.accepting.contains(qi) {
                goal = Some(nodes.len() - 1);
                break 'outer;
            }
            queue.push_back(nodes.len() - 1);
        }
    }
    let mut transitions_seen = 0usize;
    while goal.is_none() {
        let Some(v) = queue.pop_front() else { break };
        let (ai, qi) = nodes[v];
        let (Some(av), Some(sv)) = (a_by_src.get(&ai), s_by_src.get(&qi)) else {
            continue;
        };
        'expand: for &ti in av {
            let (_, e, ad) = afin.transitions[ti];
            for &si in sv {
                if !bound.matches[si][e.0] {
                    continue;
                }
                transitions_seen += 1;
                let sd = bound.spec.transitions[si].dst;
                let key = (ad, sd);
                if index.contains_key(&key) {
                    continue;
                }
                index.insert(key, nodes.len());
                nodes.push(key);
                parent.push(Some((v, e)));
                if bound.spec.accepting.contains(&sd) {
                    goal = Some(nodes.len() - 1);
                    break 'expand;
                }
                queue.push_back(nodes.len() - 1);
            }
        }
    }

    let stats = VerdictStats {
        states: nodes.len(),
        transitions: transitions_seen,
        sccs: 0,
        ms: 0,
    };
    match goal {
        None => Ok(Verdict { status: Status::Holds, counterexample: None, realized_at_n: None, stats }),
        Some(g) => {
            let mut word = Vec::new();
            let mut cur = g;
            while let Some((prev, e)) = parent[cur] {
                word.push(e);
                cur = prev;
            }
            word.reverse();
            let realized_at_n = if opts.realize {
                realize_word(t, &word, &opts.budget).found
            } else {
                None
            };
            Ok(Verdict {
                status: Status::Violated,
                counterexample: Some((word, Vec::new())),
                realized_at_n,
                stats,
            })
        }
    }
}

/// Decides whether any infinite execution matches the bad-behavior NBW:
/// unwind, classify, build the bounded-counter automaton, intersect, and
/// check emptiness. Violations come with a replayable lasso.
pub fn check_liveness(
    t: &ProcessTemplate,
    bad: &SpecAutomaton,
    map: Option<&RelabelMap>,
    opts: &CheckOptions,
) -> Result<Verdict, PipelineError> {
    if bad.finite {
        return Err(PipelineError::WrongSpecKind { expected: "nbw" });
    }
    let diags = t.validate(true);
    if !diags.is_empty() {
        return Err(PipelineError::InvalidTemplate(diags));
    }
    let u = build_unwinding(t);
    let ut = u.to_template();
    let cls = classify(&u)?;
    let ainf = build_ainf(&u, &ut, &cls);
    let bound = bind_spec(bad, t, map)?;
    let product = intersect(&ainf, &bound);
    let (lasso, estats) = emptiness(&product);
    let stats = VerdictStats {
        states: product.state_names.len(),
        transitions: product.transitions.len(),
        sccs: estats.sccs,
        ms: 0,
    };
    match lasso {
        None => Ok(Verdict { status: Status::Holds, counterexample: None, realized_at_n: None, stats }),
        Some(l) => {
            let prefix: Vec<EdgeId> =
                l.prefix.iter().map(|ti| product.transitions[*ti].edge).collect();
            let cycle: Vec<EdgeId> =
                l.cycle.iter().map(|ti| product.transitions[*ti].edge).collect();
            let realized_at_n = if opts.realize {
                realize_lasso(t, &prefix, &cycle, &opts.budget).found
            } else {
                None
            };
            Ok(Verdict {
                status: Status::Violated,
                counterexample: Some((prefix, cycle)),
                realized_at_n,
                stats,
            })
        }
    }
}

/// Membership of an ultimately periodic word in the automaton's language,
/// via the product with the single-word automaton.
pub fn accepts_lasso_word(
    a: &BoundedCounterAutomaton,
    t: &ProcessTemplate,
    prefix: &[EdgeId],
    cycle: &[EdgeId],
) -> bool {
    let spec = lasso_word_spec(t, prefix, cycle);
    let bound = bind_spec(&spec, t, None).expect("exact patterns always bind");
    let product = intersect(a, &bound);
    emptiness(&product).0.is_some()
}
