//! Brute-force ground truth on fixed-size instances: state graphs, the
//! finite-execution language, pseudo-cycle and loading-run search, and
//! realization of lasso words. Searches run on the twin quotient (per-state
//! counts) because twins have identical futures by symmetry; the tracked
//! process is kept explicit where projections matter.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    is_pseudo_cycle, successors, Configuration, EdgeId, EdgeLabel, Pid, ProcessTemplate, Run,
    StateId, TransitionLabel,
};
use crate::unwinding::{UEdgeId, Unwinding, UnwindingTemplate};

#[derive(Debug, Clone)]
pub struct SearchBudget {
    pub max_n: usize,
    pub max_depth: usize,
    pub max_states: usize,
    pub max_millis: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { max_n: 4, max_depth: 64, max_states: 200_000, max_millis: 5_000 }
    }
}

/// A search answer that never conflates "absent" with "not found in budget".
#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub found: Option<T>,
    pub truncated: bool,
}

impl<T> SearchOutcome<T> {
    fn found(v: T) -> Self {
        SearchOutcome { found: Some(v), truncated: false }
    }
    fn not_found(truncated: bool) -> Self {
        SearchOutcome { found: None, truncated }
    }
}

/// The reachable fragment of an instance, materialized.
#[derive(Debug, Clone)]
pub struct StateGraph {
    pub vertices: Vec<Configuration>,
    pub initial: Vec<usize>,
    pub edges: Vec<(usize, TransitionLabel, usize)>,
    pub truncated: bool,
    pub depth_reached: usize,
}

impl StateGraph {
    pub fn to_dot(&self, t: &ProcessTemplate) -> String {
        let mut out = String::from("digraph instance {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let label: Vec<&str> = v
                .assignment()
                .values()
                .map(|s| t.state_name(*s))
                .collect();
            out.push_str(&format!("  v{} [label=\"({})\"];\n", i, label.join(",")));
        }
        for (s, label, d) in &self.edges {
            let l = match label {
                TransitionLabel::Broadcast => "b".to_string(),
                TransitionLabel::Rendezvous { action, .. } => {
                    t.actions[action.0].name.clone()
                }
            };
            out.push_str(&format!("  v{s} -> v{d} [label=\"{l}\"];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// All initial configurations of size `n` (every assignment of processes
/// `1..=n` to initial states).
pub fn initial_configurations(t: &ProcessTemplate, n: usize) -> Vec<Configuration> {
    let inits: Vec<StateId> = t.init.iter().copied().collect();
    let mut out: Vec<Vec<StateId>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for v in &out {
            for s in &inits {
                let mut w = v.clone();
                w.push(*s);
                next.push(w);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|states| Configuration::from_states(&states, t.dim()))
        .collect()
}

/// BFS materialization of the reachable state graph within the budget.
pub fn enumerate(t: &ProcessTemplate, n: usize, budget: &SearchBudget) -> StateGraph {
    let start = Instant::now();
    let mut vertices: Vec<Configuration> = Vec::new();
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut initial = Vec::new();
    let mut edges = Vec::new();
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let mut truncated = false;
    let mut depth_reached = 0;

    for c in initial_configurations(t, n) {
        if let Some(id) = index.get(&c) {
            initial.push(*id);
            continue;
        }
        let id = vertices.len();
        index.insert(c.clone(), id);
        vertices.push(c);
        initial.push(id);
        queue.push_back((id, 0));
    }

    while let Some((v, depth)) = queue.pop_front() {
        depth_reached = depth_reached.max(depth);
        if depth >= budget.max_depth {
            truncated = true;
            continue;
        }
        if start.elapsed().as_millis() as u64 > budget.max_millis {
            truncated = true;
            break;
        }
        let cfg = vertices[v].clone();
        for step in successors(t, &cfg) {
            let id = match index.get(&step.dst) {
                Some(id) => *id,
                None => {
                    if vertices.len() >= budget.max_states {
                        truncated = true;
                        continue;
                    }
                    let id = vertices.len();
                    index.insert(step.dst.clone(), id);
                    vertices.push(step.dst.clone());
                    queue.push_back((id, depth + 1));
                    id
                }
            };
            edges.push((v, step.label, id));
        }
    }
    StateGraph { vertices, initial, edges, truncated, depth_reached }
}

// ---------------------------------------------------------------------------
// count-level semantics (twin quotient)

type CountVec = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CountLabel {
    /// Chosen edge per letter, in letter order.
    Rendezvous { edges: Vec<EdgeId> },
    /// Process flow per broadcast edge (zero flows omitted).
    Broadcast { flows: Vec<(EdgeId, u32)> },
}

impl CountLabel {
    fn takes(&self, e: EdgeId) -> bool {
        match self {
            CountLabel::Rendezvous { edges } => edges.contains(&e),
            CountLabel::Broadcast { flows } => flows.iter().any(|(f, c)| *f == e && *c > 0),
        }
    }
    fn is_broadcast(&self) -> bool {
        matches!(self, CountLabel::Broadcast { .. })
    }
}

fn weak_compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; parts];
    fn rec(total: u32, i: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == cur.len() {
            cur[i] = total;
            out.push(cur.clone());
            return;
        }
        for v in 0..=total {
            cur[i] = v;
            rec(total - v, i + 1, cur, out);
        }
    }
    rec(total, 0, &mut cur, &mut out);
    out
}

/// Per-letter edge choices of every rendezvous action, in declaration order.
fn letter_choice_sets(t: &ProcessTemplate) -> Vec<Vec<Vec<EdgeId>>> {
    (0..t.actions.len())
        .map(|a| {
            (1..=t.k)
                .map(|j| t.edges_with_letter(crate::model::ActionId(a), j).collect())
                .collect()
        })
        .collect()
}

/// Successor counts under one transition at the twin-quotient level.
fn count_successors(
    t: &ProcessTemplate,
    choices: &[Vec<Vec<EdgeId>>],
    counts: &CountVec,
) -> Vec<(CountLabel, CountVec)> {
    let mut out = Vec::new();
    // rendezvous
    for per_letter in choices {
        let mut pick = vec![0usize; per_letter.len()];
        if per_letter.iter().any(|c| c.is_empty()) {
            continue;
        }
        'combo: loop {
            let edges: Vec<EdgeId> = per_letter
                .iter()
                .zip(&pick)
                .map(|(c, i)| c[*i])
                .collect();
            let mut demand = vec![0u32; t.dim()];
            for e in &edges {
                demand[t.edges[e.0].src.0] += 1;
            }
            if demand.iter().zip(counts).all(|(d, c)| d <= c) {
                let mut next = counts.clone();
                for e in &edges {
                    next[t.edges[e.0].src.0] -= 1;
                }
                for e in &edges {
                    next[t.edges[e.0].dst.0] += 1;
                }
                out.push((CountLabel::Rendezvous { edges }, next));
            }
            // odometer
            let mut i = per_letter.len();
            loop {
                if i == 0 {
                    break 'combo;
                }
                i -= 1;
                pick[i] += 1;
                if pick[i] < per_letter[i].len() {
                    break;
                }
                pick[i] = 0;
                if i == 0 {
                    break 'combo;
                }
            }
        }
    }
    // broadcast: distribute each state's processes over its broadcast edges
    if !t.r_only {
        let mut per_state: Vec<(usize, Vec<EdgeId>, u32)> = Vec::new();
        let mut possible = true;
        for (s, c) in counts.iter().enumerate() {
            if *c == 0 {
                continue;
            }
            let opts: Vec<EdgeId> = t.broadcast_edges_from(StateId(s)).collect();
            if opts.is_empty() {
                possible = false;
                break;
            }
            per_state.push((s, opts, *c));
        }
        if possible {
            let comp_sets: Vec<Vec<Vec<u32>>> = per_state
                .iter()
                .map(|(_, opts, c)| weak_compositions(*c, opts.len()))
                .collect();
            let mut pick = vec![0usize; per_state.len()];
            loop {
                let mut next = vec![0u32; t.dim()];
                let mut flows = Vec::new();
                for ((_, opts, _), (set, i)) in
                    per_state.iter().zip(comp_sets.iter().zip(&pick))
                {
                    for (e, f) in opts.iter().zip(&set[*i]) {
                        if *f > 0 {
                            next[t.edges[e.0].dst.0] += f;
                            flows.push((*e, *f));
                        }
                    }
                }
                out.push((CountLabel::Broadcast { flows }, next));
                let mut i = per_state.len();
                let mut done = per_state.is_empty();
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    pick[i] += 1;
                    if pick[i] < comp_sets[i].len() {
                        break;
                    }
                    pick[i] = 0;
                    if i == 0 {
                        done = true;
                        break;
                    }
                }
                if done {
                    break;
                }
            }
        }
    }
    out
}

/// Rebuilds an explicit pid-level run from a count-level start and labels;
/// pids are assigned smallest-first, so reconstruction is deterministic.
fn reconstruct_run(t: &ProcessTemplate, start: &CountVec, labels: &[CountLabel]) -> Run {
    let mut states: Vec<StateId> = Vec::new();
    for (s, c) in start.iter().enumerate() {
        for _ in 0..*c {
            states.push(StateId(s));
        }
    }
    let start_cfg = Configuration::from_states(&states, t.dim());
    let mut cur = start_cfg.clone();
    let mut steps = Vec::new();
    for label in labels {
        let step = match label {
            CountLabel::Rendezvous { edges } => {
                let mut used: BTreeSet<Pid> = BTreeSet::new();
                let mut participants = Vec::with_capacity(edges.len());
                let mut moves = BTreeMap::new();
                let mut action = None;
                for e in edges {
                    let edge = &t.edges[e.0];
                    if let EdgeLabel::Rendezvous { action: a, .. } = edge.label {
                        action = Some(a);
                    }
                    let pid = cur
                        .pids_at(edge.src)
                        .into_iter()
                        .find(|p| !used.contains(p))
                        .expect("count-level label must be realizable");
                    used.insert(pid);
                    participants.push(pid);
                    moves.insert(pid, edge.dst);
                }
                let dst = cur.with_moves(&moves);
                crate::model::GlobalTransition {
                    src: cur.clone(),
                    label: TransitionLabel::Rendezvous {
                        action: action.unwrap(),
                        participants,
                    },
                    dst,
                }
            }
            CountLabel::Broadcast { flows } => {
                let mut moves = BTreeMap::new();
                let mut cursor: BTreeMap<StateId, Vec<Pid>> = BTreeMap::new();
                for (e, f) in flows {
                    let edge = &t.edges[e.0];
                    let avail = cursor
                        .entry(edge.src)
                        .or_insert_with(|| cur.pids_at(edge.src));
                    for _ in 0..*f {
                        let pid = avail.remove(0);
                        moves.insert(pid, edge.dst);
                    }
                }
                let dst = cur.with_moves(&moves);
                crate::model::GlobalTransition {
                    src: cur.clone(),
                    label: TransitionLabel::Broadcast,
                    dst,
                }
            }
        };
        cur = step.dst.clone();
        steps.push(step);
    }
    Run::new(start_cfg, steps).expect("reconstructed runs chain by construction")
}

// ---------------------------------------------------------------------------
// finite execution language

/// All process-1 projections of runs of length at most `maxlen`, as words
/// over the template's edges. The non-tracked processes are quotiented by
/// counts.
pub fn exec_fin(
    t: &ProcessTemplate,
    n: usize,
    maxlen: usize,
    budget: &SearchBudget,
) -> (BTreeSet<Vec<EdgeId>>, bool) {
    exec_fin_words(t, n, maxlen, maxlen, budget)
}

/// As [`exec_fin`], but with separate caps on run length and word length: a
/// short word may only be realizable by a longer run in which the tracked
/// process idles while partners reposition.
pub fn exec_fin_words(
    t: &ProcessTemplate,
    n: usize,
    max_steps: usize,
    max_word: usize,
    budget: &SearchBudget,
) -> (BTreeSet<Vec<EdgeId>>, bool) {
    assert!(n >= 1);
    let choices = letter_choice_sets(t);
    let mut memo: HashMap<(StateId, CountVec, usize, usize), BTreeSet<Vec<EdgeId>>> =
        HashMap::new();
    let mut truncated = false;

    let mut out = BTreeSet::new();
    let inits: Vec<StateId> = t.init.iter().copied().collect();
    for p1 in &inits {
        let mut rest: Vec<CountVec> = vec![vec![0; t.dim()]];
        for _ in 0..n - 1 {
            let mut next = Vec::new();
            for v in &rest {
                for s in &inits {
                    let mut w = v.clone();
                    w[s.0] += 1;
                    next.push(w);
                }
            }
            rest = next;
        }
        rest.sort();
        rest.dedup();
        for others in rest {
            out.extend(word_suffixes(
                t,
                &choices,
                *p1,
                &others,
                max_steps,
                max_word,
                &mut memo,
                budget,
                &mut truncated,
            ));
        }
    }
    (out, truncated)
}

#[allow(clippy::too_many_arguments)]
fn word_suffixes(
    t: &ProcessTemplate,
    choices: &[Vec<Vec<EdgeId>>],
    p1: StateId,
    others: &CountVec,
    steps: usize,
    word_budget: usize,
    memo: &mut HashMap<(StateId, CountVec, usize, usize), BTreeSet<Vec<EdgeId>>>,
    budget: &SearchBudget,
    truncated: &mut bool,
) -> BTreeSet<Vec<EdgeId>> {
    let key = (p1, others.clone(), steps, word_budget);
    if let Some(hit) = memo.get(&key) {
        return hit.clone();
    }
    let mut words: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
    words.insert(Vec::new());
    if steps > 0 {
        if memo.len() >= budget.max_states {
            *truncated = true;
        } else {
            for (p1_edge, p1_next, others_next) in tracked_successors(t, choices, p1, others) {
                match p1_edge {
                    None => {
                        words.extend(word_suffixes(
                            t, choices, p1_next, &others_next, steps - 1, word_budget, memo,
                            budget, truncated,
                        ));
                    }
                    Some(e) if word_budget > 0 => {
                        let subs = word_suffixes(
                            t, choices, p1_next, &others_next, steps - 1, word_budget - 1,
                            memo, budget, truncated,
                        );
                        for w in subs {
                            let mut word = vec![e];
                            word.extend(w);
                            words.insert(word);
                        }
                    }
                    Some(_) => {}
                }
            }
        }
    }
    memo.insert(key, words.clone());
    words
}

/// Transitions of the instance with process 1 explicit and the remaining
/// processes quotiented: yields (edge taken by process 1 if it moved, its new
/// state, the new counts of the others).
fn tracked_successors(
    t: &ProcessTemplate,
    choices: &[Vec<Vec<EdgeId>>],
    p1: StateId,
    others: &CountVec,
) -> Vec<(Option<EdgeId>, StateId, CountVec)> {
    let mut out = Vec::new();
    // rendezvous
    for per_letter in choices {
        if per_letter.iter().any(|c| c.is_empty()) {
            continue;
        }
        let mut pick = vec![0usize; per_letter.len()];
        'combo: loop {
            let edges: Vec<EdgeId> = per_letter.iter().zip(&pick).map(|(c, i)| c[*i]).collect();
            // process 1 not involved
            let mut demand = vec![0u32; t.dim()];
            for e in &edges {
                demand[t.edges[e.0].src.0] += 1;
            }
            if demand.iter().zip(others).all(|(d, c)| d <= c) {
                let mut next = others.clone();
                for e in &edges {
                    next[t.edges[e.0].src.0] -= 1;
                }
                for e in &edges {
                    next[t.edges[e.0].dst.0] += 1;
                }
                out.push((None, p1, next));
            }
            // process 1 takes letter j
            for (j, e) in edges.iter().enumerate() {
                if t.edges[e.0].src != p1 {
                    continue;
                }
                let mut demand = vec![0u32; t.dim()];
                for (l, f) in edges.iter().enumerate() {
                    if l != j {
                        demand[t.edges[f.0].src.0] += 1;
                    }
                }
                if demand.iter().zip(others).all(|(d, c)| d <= c) {
                    let mut next = others.clone();
                    for (l, f) in edges.iter().enumerate() {
                        if l != j {
                            next[t.edges[f.0].src.0] -= 1;
                        }
                    }
                    for (l, f) in edges.iter().enumerate() {
                        if l != j {
                            next[t.edges[f.0].dst.0] += 1;
                        }
                    }
                    out.push((Some(*e), t.edges[e.0].dst, next));
                }
            }
            let mut i = per_letter.len();
            loop {
                if i == 0 {
                    break 'combo;
                }
                i -= 1;
                pick[i] += 1;
                if pick[i] < per_letter[i].len() {
                    break;
                }
                pick[i] = 0;
                if i == 0 {
                    break 'combo;
                }
            }
        }
    }
    // broadcast
    if !t.r_only {
        let p1_opts: Vec<EdgeId> = t.broadcast_edges_from(p1).collect();
        if !p1_opts.is_empty() {
            let mut per_state: Vec<(Vec<EdgeId>, u32)> = Vec::new();
            let mut possible = true;
            for (s, c) in others.iter().enumerate() {
                if *c == 0 {
                    continue;
                }
                let opts: Vec<EdgeId> = t.broadcast_edges_from(StateId(s)).collect();
                if opts.is_empty() {
                    possible = false;
                    break;
                }
                per_state.push((opts, *c));
            }
            if possible {
                let comp_sets: Vec<Vec<Vec<u32>>> = per_state
                    .iter()
                    .map(|(opts, c)| weak_compositions(*c, opts.len()))
                    .collect();
                for p1_edge in &p1_opts {
                    let mut pick = vec![0usize; per_state.len()];
                    loop {
                        let mut next = vec![0u32; t.dim()];
                        for ((opts, _), (set, i)) in
                            per_state.iter().zip(comp_sets.iter().zip(&pick))
                        {
                            for (e, f) in opts.iter().zip(&set[*i]) {
                                next[t.edges[e.0].dst.0] += f;
                            }
                        }
                        out.push((Some(*p1_edge), t.edges[p1_edge.0].dst, next));
                        let mut i = per_state.len();
                        let mut done = per_state.is_empty();
                        loop {
                            if i == 0 {
                                break;
                            }
                            i -= 1;
                            pick[i] += 1;
                            if pick[i] < comp_sets[i].len() {
                                break;
                            }
                            pick[i] = 0;
                            if i == 0 {
                                done = true;
                                break;
                            }
                        }
                        if done {
                            break;
                        }
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// pseudo-cycle search

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    NoBroadcasts,
    WithBroadcasts,
    Any,
}

#[derive(Debug, Clone)]
pub struct FoundCycle {
    /// Explicit path of the unwinding instance, twin endpoints included.
    pub run: Run,
    pub broadcasts: usize,
    /// Size of the instance the cycle lives in.
    pub n: usize,
}

/// Searches for a pseudo-cycle of the unwinding instance through the given
/// unwinding edge, on the twin quotient, starting from any configuration
/// whose processes sit in a single component. `n` is the instance size.
pub fn find_pseudo_cycle(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    target: UEdgeId,
    n: usize,
    kind: CycleKind,
    budget: &SearchBudget,
) -> SearchOutcome<FoundCycle> {
    let t = &ut.template;
    let target_edge = EdgeId(target.0); // annotated edges align with unwinding edges
    let choices = letter_choice_sets(t);
    let start_time = Instant::now();
    let mut states_seen = 0usize;
    let mut truncated = false;

    for comp in &u.components {
        if comp.states.is_empty() {
            continue;
        }
        // cycles through a broadcast never return to a prefix component
        if kind == CycleKind::WithBroadcasts && u.is_prefix_comp(comp.index) {
            continue;
        }
        // states of this component, annotated
        let comp_states: Vec<StateId> = comp
            .states
            .iter()
            .map(|s| ut.state_index[&(*s, comp.index)])
            .collect();
        for split in weak_compositions(n as u32, comp_states.len()) {
            if start_time.elapsed().as_millis() as u64 > budget.max_millis {
                return SearchOutcome::not_found(true);
            }
            let mut v0 = vec![0u32; t.dim()];
            for (s, c) in comp_states.iter().zip(&split) {
                v0[s.0] = *c;
            }
            // BFS over (counts, took target, saw broadcast)
            type Node = (CountVec, bool, bool);
            let start_node: Node = (v0.clone(), false, false);
            let mut parents: HashMap<Node, Option<(Node, CountLabel)>> = HashMap::new();
            parents.insert(start_node.clone(), None);
            let mut queue = VecDeque::new();
            queue.push_back(start_node);
            while let Some(node) = queue.pop_front() {
                states_seen += 1;
                if states_seen > budget.max_states {
                    truncated = true;
                    break;
                }
                let (counts, took, has_b) = &node;
                for (label, next_counts) in count_successors(t, &choices, counts) {
                    if label.is_broadcast() && kind == CycleKind::NoBroadcasts {
                        continue;
                    }
                    let next: Node = (
                        next_counts,
                        *took || label.takes(target_edge),
                        *has_b || label.is_broadcast(),
                    );
                    if parents.contains_key(&next) {
                        continue;
                    }
                    parents.insert(next.clone(), Some((node.clone(), label.clone())));
                    let goal = next.1
                        && next.0 == v0
                        && match kind {
                            CycleKind::NoBroadcasts => !next.2,
                            CycleKind::WithBroadcasts => next.2,
                            CycleKind::Any => true,
                        };
                    if goal {
                        // reconstruct the label sequence
                        let mut labels = Vec::new();
                        let mut cur = next.clone();
                        while let Some(Some((prev, label))) = parents.get(&cur) {
                            labels.push(label.clone());
                            cur = prev.clone();
                        }
                        labels.reverse();
                        let run = reconstruct_run(t, &v0, &labels);
                        assert!(is_pseudo_cycle(&run), "oracle cycle must close on twins");
                        let broadcasts = run.broadcast_count();
                        return SearchOutcome::found(FoundCycle { run, broadcasts, n });
                    }
                    queue.push_back(next);
                }
            }
        }
    }
    SearchOutcome::not_found(truncated)
}

/// Ground truth for whole-template classification harnesses: the sets of
/// unwinding edges that lie on some broadcast-free pseudo-cycle, and on some
/// pseudo-cycle containing a broadcast, at instance size `n`. Works on the
/// count-vector graph seeded with every single-component configuration: a
/// pseudo-cycle is exactly a cycle there, so SCC membership decides both
/// questions at once.
pub fn cycle_edge_sets(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    n: usize,
    budget: &SearchBudget,
) -> SearchOutcome<(BTreeSet<UEdgeId>, BTreeSet<UEdgeId>)> {
    let t = &ut.template;
    let choices = letter_choice_sets(t);
    let start_time = Instant::now();

    let mut vertices: Vec<CountVec> = Vec::new();
    let mut index: HashMap<CountVec, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for comp in &u.components {
        if comp.states.is_empty() {
            continue;
        }
        let comp_states: Vec<StateId> = comp
            .states
            .iter()
            .map(|s| ut.state_index[&(*s, comp.index)])
            .collect();
        for split in weak_compositions(n as u32, comp_states.len()) {
            let mut v0 = vec![0u32; t.dim()];
            for (s, c) in comp_states.iter().zip(&split) {
                v0[s.0] = *c;
            }
            if !index.contains_key(&v0) {
                index.insert(v0.clone(), vertices.len());
                vertices.push(v0);
                queue.push_back(vertices.len() - 1);
            }
        }
    }
    let mut graph_edges: Vec<(usize, CountLabel, usize)> = Vec::new();
    let mut truncated = false;
    while let Some(vi) = queue.pop_front() {
        if vertices.len() > budget.max_states {
            truncated = true;
            break;
        }
        if start_time.elapsed().as_millis() as u64 > budget.max_millis {
            truncated = true;
            break;
        }
        let counts = vertices[vi].clone();
        for (label, next) in count_successors(t, &choices, &counts) {
            let di = match index.get(&next) {
                Some(d) => *d,
                None => {
                    index.insert(next.clone(), vertices.len());
                    vertices.push(next);
                    queue.push_back(vertices.len() - 1);
                    vertices.len() - 1
                }
            };
            graph_edges.push((vi, label, di));
        }
    }

    // broadcast-free cycles: SCCs of the subgraph without broadcast steps
    let bf = crate::automata::scc_partition(
        vertices.len(),
        graph_edges
            .iter()
            .filter(|(_, l, _)| !l.is_broadcast())
            .map(|(s, _, d)| (*s, *d)),
    );
    // cycles with broadcasts: SCCs of the full graph that contain an internal
    // broadcast step can route any internal edge through one
    let full = crate::automata::scc_partition(
        vertices.len(),
        graph_edges.iter().map(|(s, _, d)| (*s, *d)),
    );
    let mut scc_has_broadcast: BTreeSet<usize> = BTreeSet::new();
    for (s, l, d) in &graph_edges {
        if l.is_broadcast() && full[*s] == full[*d] {
            scc_has_broadcast.insert(full[*s]);
        }
    }

    let mut no_b: BTreeSet<UEdgeId> = BTreeSet::new();
    let mut with_b: BTreeSet<UEdgeId> = BTreeSet::new();
    for (s, l, d) in &graph_edges {
        let taken: Vec<UEdgeId> = match l {
            CountLabel::Rendezvous { edges } => {
                edges.iter().map(|e| ut.edge_uidx[e.0]).collect()
            }
            CountLabel::Broadcast { flows } => flows
                .iter()
                .filter(|(_, c)| *c > 0)
                .map(|(e, _)| ut.edge_uidx[e.0])
                .collect(),
        };
        if !l.is_broadcast() && bf[*s] == bf[*d] {
            no_b.extend(taken.iter().copied());
        }
        if full[*s] == full[*d] {
            let in_b_scc = scc_has_broadcast.contains(&full[*s]);
            if l.is_broadcast() || in_b_scc {
                with_b.extend(taken.iter().copied());
            }
        }
    }
    SearchOutcome { found: Some((no_b, with_b)), truncated }
}

// ---------------------------------------------------------------------------
// loading runs

/// A run of the unwinding instance with exactly `b` broadcasts that ends with
/// at least `n_target` processes in every state of component `comp(b)`.
/// Searches instance sizes up to the budget.
pub fn find_loading_run(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    b: usize,
    n_target: u32,
    budget: &SearchBudget,
) -> SearchOutcome<(usize, Run)> {
    let t = &ut.template;
    let choices = letter_choice_sets(t);
    let goal_comp = u.comp(b);
    let goal_states: Vec<StateId> = u.components[goal_comp]
        .states
        .iter()
        .map(|s| ut.state_index[&(*s, goal_comp)])
        .collect();
    let start_time = Instant::now();
    let mut truncated = false;

    for n in 1..=budget.max_n {
        let mut states_seen = 0usize;
        // initial count vectors over the annotated initial states
        let init_states: Vec<StateId> = ut.template.init.iter().copied().collect();
        for split in weak_compositions(n as u32, init_states.len()) {
            let mut v0 = vec![0u32; t.dim()];
            for (s, c) in init_states.iter().zip(&split) {
                v0[s.0] += c;
            }
            type Node = (CountVec, usize);
            let start_node: Node = (v0.clone(), 0);
            let mut parents: HashMap<Node, Option<(Node, CountLabel)>> = HashMap::new();
            parents.insert(start_node.clone(), None);
            let mut queue = VecDeque::new();
            queue.push_back(start_node);
            while let Some(node) = queue.pop_front() {
                states_seen += 1;
                if states_seen > budget.max_states {
                    truncated = true;
                    break;
                }
                if start_time.elapsed().as_millis() as u64 > budget.max_millis {
                    return SearchOutcome::not_found(true);
                }
                let (counts, bc) = &node;
                if *bc == b && goal_states.iter().all(|s| counts[s.0] >= n_target) {
                    let mut labels = Vec::new();
                    let mut cur = node.clone();
                    while let Some(Some((prev, label))) = parents.get(&cur) {
                        labels.push(label.clone());
                        cur = prev.clone();
                    }
                    labels.reverse();
                    let run = reconstruct_run(t, &v0, &labels);
                    assert_eq!(run.broadcast_count(), b);
                    return SearchOutcome::found((n, run));
                }
                for (label, next_counts) in count_successors(t, &choices, counts) {
                    let nb = bc + usize::from(label.is_broadcast());
                    if nb > b {
                        continue;
                    }
                    let next: Node = (next_counts, nb);
                    if parents.contains_key(&next) {
                        continue;
                    }
                    parents.insert(next.clone(), Some((node.clone(), label.clone())));
                    queue.push_back(next);
                }
            }
        }
    }
    SearchOutcome::not_found(truncated)
}

// ---------------------------------------------------------------------------
// lasso and word realization

/// Search node: tracked process state, counts of the others, word position.
type RealizeNode = (StateId, CountVec, usize);

fn initial_realize_nodes(t: &ProcessTemplate, n: usize) -> Vec<(StateId, CountVec)> {
    let inits: Vec<StateId> = t.init.iter().copied().collect();
    let mut rest: Vec<CountVec> = vec![vec![0; t.dim()]];
    for _ in 0..n - 1 {
        let mut next = Vec::new();
        for v in &rest {
            for s in &inits {
                let mut w = v.clone();
                w[s.0] += 1;
                next.push(w);
            }
        }
        rest = next;
    }
    rest.sort();
    rest.dedup();
    let mut out = Vec::new();
    for p1 in &inits {
        for others in &rest {
            out.push((*p1, others.clone()));
        }
    }
    out
}

/// Finds an instance size and a run whose process-1 projection equals `word`.
pub fn realize_word(
    t: &ProcessTemplate,
    word: &[EdgeId],
    budget: &SearchBudget,
) -> SearchOutcome<usize> {
    let choices = letter_choice_sets(t);
    let start_time = Instant::now();
    let mut truncated = false;
    for n in 1..=budget.max_n {
        let mut visited: BTreeSet<RealizeNode> = BTreeSet::new();
        let mut queue: VecDeque<RealizeNode> = VecDeque::new();
        for (p1, others) in initial_realize_nodes(t, n) {
            let node = (p1, others, 0usize);
            if visited.insert(node.clone()) {
                queue.push_back(node);
            }
        }
        while let Some((p1, others, pos)) = queue.pop_front() {
            if pos == word.len() {
                return SearchOutcome::found(n);
            }
            if visited.len() > budget.max_states {
                truncated = true;
                break;
            }
            if start_time.elapsed().as_millis() as u64 > budget.max_millis {
                return SearchOutcome::not_found(true);
            }
            for (p1_edge, p1_next, others_next) in tracked_successors(t, &choices, p1, &others) {
                let next_pos = match p1_edge {
                    None => pos,
                    Some(e) if e == word[pos] => pos + 1,
                    Some(_) => continue,
                };
                let node = (p1_next, others_next, next_pos);
                if visited.insert(node.clone()) {
                    queue.push_back(node);
                }
            }
        }
    }
    SearchOutcome::not_found(truncated)
}

/// Finds an instance size whose executions contain `prefix . cycle^omega`:
/// looks for a reachable loop of the tracked-process search graph that winds
/// through the whole cycle word, which yields a twin closure that pumps.
pub fn realize_lasso(
    t: &ProcessTemplate,
    prefix: &[EdgeId],
    cycle: &[EdgeId],
    budget: &SearchBudget,
) -> SearchOutcome<usize> {
    assert!(!cycle.is_empty(), "lasso cycles are nonempty");
    let choices = letter_choice_sets(t);
    let start_time = Instant::now();
    let mut truncated = false;
    let plen = prefix.len();
    let word_at = |pos: usize| -> EdgeId {
        if pos < plen {
            prefix[pos]
        } else {
            cycle[(pos - plen) % cycle.len()]
        }
    };
    let advance = |pos: usize| -> usize {
        let next = pos + 1;
        if next > plen && next - plen == cycle.len() {
            plen
        } else {
            next
        }
    };

    for n in 1..=budget.max_n {
        // discover the tracked graph; positions wrap at the end of the cycle
        let mut nodes: Vec<RealizeNode> = Vec::new();
        let mut index: HashMap<RealizeNode, usize> = HashMap::new();
        let mut edges: Vec<(usize, usize, bool)> = Vec::new(); // (src, dst, p1 moved)
        let mut queue: VecDeque<usize> = VecDeque::new();
        for (p1, others) in initial_realize_nodes(t, n) {
            let node = (p1, others, 0usize);
            if !index.contains_key(&node) {
                index.insert(node.clone(), nodes.len());
                nodes.push(node);
                queue.push_back(nodes.len() - 1);
            }
        }
        let mut over = false;
        while let Some(vi) = queue.pop_front() {
            if nodes.len() > budget.max_states {
                truncated = true;
                over = true;
                break;
            }
            if start_time.elapsed().as_millis() as u64 > budget.max_millis {
                return SearchOutcome::not_found(true);
            }
            let (p1, others, pos) = nodes[vi].clone();
            for (p1_edge, p1_next, others_next) in tracked_successors(t, &choices, p1, &others) {
                let (next_pos, moved) = match p1_edge {
                    None => (pos, false),
                    Some(e) if e == word_at(pos) => (advance(pos), true),
                    Some(_) => continue,
                };
                let node = (p1_next, others_next, next_pos);
                let di = match index.get(&node) {
                    Some(d) => *d,
                    None => {
                        index.insert(node.clone(), nodes.len());
                        nodes.push(node);
                        queue.push_back(nodes.len() - 1);
                        nodes.len() - 1
                    }
                };
                edges.push((vi, di, moved));
            }
        }
        if over {
            continue;
        }
        // an SCC with an internal progressing edge winds the full cycle
        let sccs = crate::automata::scc_partition(nodes.len(), edges.iter().map(|(s, d, _)| (*s, *d)));
        for (s, d, moved) in &edges {
            if *moved && sccs[*s] == sccs[*d] && nodes[*s].2 >= plen {
                return SearchOutcome::found(n);
            }
        }
    }
    SearchOutcome::not_found(truncated)
}

// ---------------------------------------------------------------------------
// pumped execution sampling

/// Samples ultimately periodic executions by random walks that are cut at the
/// first twin recurrence (process 1 kept fixed) and pumped; the projection of
/// the pumped run on process 1 is `prefix . cycle^omega`.
pub fn sample_pumped_executions(
    t: &ProcessTemplate,
    count: usize,
    seed: u64,
    budget: &SearchBudget,
) -> Vec<(Vec<EdgeId>, Vec<EdgeId>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count && attempts < count * 200 {
        attempts += 1;
        let n = rng.gen_range(2..=budget.max_n.max(2));
        let inits = initial_configurations(t, n);
        let start = inits[rng.gen_range(0..inits.len())].clone();
        let mut run = Run::new(start, vec![]).unwrap();
        let mut closure: Option<(usize, usize)> = None;
        for _ in 0..budget.max_depth {
            let succ = successors(t, run.end());
            if succ.is_empty() {
                break;
            }
            let step = succ[rng.gen_range(0..succ.len())].clone();
            run.steps.push(step);
            // twin recurrence with process 1 pinned to its state; process 1
            // must move inside the would-be cycle or the projection ends
            let now = run.end().clone();
            for i in 0..run.steps.len() {
                let at = if i == 0 { &run.start } else { &run.steps[i - 1].dst };
                if crate::model::twins(at, &now)
                    && at.state_of(1) == now.state_of(1)
                    && run.steps[i..].iter().any(|s| s.moved().contains(&1))
                {
                    closure = Some((i, run.steps.len()));
                    break;
                }
            }
            if closure.is_some() {
                break;
            }
        }
        let Some((i, j)) = closure else { continue };
        let prefix_run = Run::new(run.start.clone(), run.steps[..i].to_vec()).unwrap();
        let edge_ids = |steps: &[crate::model::GlobalTransition]| -> Vec<EdgeId> {
            steps
                .iter()
                .filter_map(|s| {
                    s.edge_taken_by(1)
                        .map(|e| t.edge_id(e.src, e.label, e.dst).unwrap())
                })
                .collect()
        };
        let prefix = edge_ids(&prefix_run.steps);
        let cycle = edge_ids(&run.steps[i..j]);
        if cycle.is_empty() {
            continue;
        }
        out.push((prefix, cycle));
    }
    out
}
