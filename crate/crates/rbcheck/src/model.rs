//! Process templates and the exact operational semantics of their finite
//! instances: configurations, global transitions, twins, pseudo-cycles,
//! run composition and pumping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// Index of a state in a template's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Index of a rendezvous action in a template's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// Index of an edge in a template's declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

/// Process identifiers are arbitrary naturals so that renamings stay explicit.
pub type Pid = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    /// Letter `j` (1-based, `1..=k`) of a rendezvous action.
    Rendezvous { action: ActionId, index: usize },
    Broadcast,
}

impl EdgeLabel {
    pub fn is_broadcast(&self) -> bool {
        matches!(self, EdgeLabel::Broadcast)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: StateId,
    pub label: EdgeLabel,
    pub dst: StateId,
}

/// A rendezvous action; its `k` letters are implicit (`name.1 .. name.k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RendezvousAction {
    pub name: String,
}

/// A finite edge-labeled process description. Instances of size `n` run `n`
/// identical copies synchronizing by k-wise rendezvous and, unless `r_only`,
/// symmetric broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessTemplate {
    pub k: usize,
    /// Declaration order doubles as the global state ordering.
    pub states: Vec<String>,
    pub init: BTreeSet<StateId>,
    pub actions: Vec<RendezvousAction>,
    pub edges: Vec<Edge>,
    /// R-template: rendezvous only, no broadcast edges required (or allowed).
    pub r_only: bool,
}

/// A violated well-formedness rule, with enough context to locate it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("process {0} is not part of the run")]
    ProcessNotInRun(Pid),
    #[error("broadcast combination enumeration exceeded the cap of {limit}")]
    BroadcastCombinationCap { limit: usize },
    #[error("path is not a pseudo-cycle")]
    NotAPseudoCycle,
    #[error("runs have unequal broadcast counts ({0} vs {1})")]
    BroadcastCountMismatch(usize, usize),
    #[error("schedule violates composition rules: {0}")]
    ScheduleViolation(String),
    #[error("invalid run: {0}")]
    InvalidRun(String),
}

impl ProcessTemplate {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a.name == name).map(ActionId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s.0]
    }

    pub fn letter_display(&self, label: &EdgeLabel) -> String {
        match label {
            EdgeLabel::Rendezvous { action, index } => {
                format!("{}.{}", self.actions[action.0].name, index)
            }
            EdgeLabel::Broadcast => "b".to_string(),
        }
    }

    /// Stable textual id of a base edge: `src:letter:dst`.
    pub fn edge_display(&self, e: EdgeId) -> String {
        let edge = &self.edges[e.0];
        format!(
            "{}:{}:{}",
            self.state_name(edge.src),
            self.letter_display(&edge.label),
            self.state_name(edge.dst)
        )
    }

    /// Looks an edge up by its exact (src, label, dst) triple. Duplicate edge
    /// declarations are rejected at parse time, so the triple is unique.
    pub fn edge_id(&self, src: StateId, label: EdgeLabel, dst: StateId) -> Option<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.src == src && e.label == label && e.dst == dst)
            .map(EdgeId)
    }

    pub fn edges_with_letter<'a>(
        &'a self,
        action: ActionId,
        index: usize,
    ) -> impl Iterator<Item = EdgeId> + 'a {
        self.edges.iter().enumerate().filter_map(move |(i, e)| {
            (e.label == EdgeLabel::Rendezvous { action, index }).then_some(EdgeId(i))
        })
    }

    pub fn broadcast_edges_from<'a>(&'a self, s: StateId) -> impl Iterator<Item = EdgeId> + 'a {
        self.edges.iter().enumerate().filter_map(move |(i, e)| {
            (e.src == s && e.label == EdgeLabel::Broadcast).then_some(EdgeId(i))
        })
    }

    /// One edge per rendezvous letter? Required by the classification
    /// pipeline; the timed reduction emits templates that satisfy it.
    pub fn is_strict(&self) -> bool {
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if let EdgeLabel::Rendezvous { action, index } = e.label {
                if !seen.insert((action, index)) {
                    return false;
                }
            }
        }
        true
    }

    /// Checks the template invariants; an empty result means well-formed.
    pub fn validate(&self, require_unique_letters: bool) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.k < 2 {
            out.push(Diagnostic {
                rule: "rendezvous-arity",
                detail: format!("k must be at least 2, got {}", self.k),
            });
        }
        if self.init.is_empty() {
            out.push(Diagnostic {
                rule: "empty-init",
                detail: "template declares no initial state".into(),
            });
        }
        for e in &self.edges {
            if let EdgeLabel::Rendezvous { index, .. } = e.label {
                if index == 0 || index > self.k {
                    out.push(Diagnostic {
                        rule: "letter-index-range",
                        detail: format!(
                            "letter index {} out of range 1..={} on edge {}:{}:{}",
                            index,
                            self.k,
                            self.state_name(e.src),
                            self.letter_display(&e.label),
                            self.state_name(e.dst)
                        ),
                    });
                }
            }
        }
        if self.r_only {
            for e in &self.edges {
                if e.label.is_broadcast() {
                    out.push(Diagnostic {
                        rule: "broadcast-in-r-only",
                        detail: format!(
                            "broadcast edge {}:b:{} in an r_only template",
                            self.state_name(e.src),
                            self.state_name(e.dst)
                        ),
                    });
                }
            }
        } else {
            for (i, name) in self.states.iter().enumerate() {
                if self.broadcast_edges_from(StateId(i)).next().is_none() {
                    out.push(Diagnostic {
                        rule: "missing-broadcast-edge",
                        detail: format!("state {name} has no outgoing broadcast edge"),
                    });
                }
            }
        }
        if require_unique_letters {
            let mut seen: BTreeMap<(ActionId, usize), EdgeId> = BTreeMap::new();
            for (i, e) in self.edges.iter().enumerate() {
                if let EdgeLabel::Rendezvous { action, index } = e.label {
                    if let Some(prev) = seen.insert((action, index), EdgeId(i)) {
                        out.push(Diagnostic {
                            rule: "duplicate-letter-edge",
                            detail: format!(
                                "letter {}.{} labels both {} and {}",
                                self.actions[action.0].name,
                                index,
                                self.edge_display(prev),
                                self.edge_display(EdgeId(i))
                            ),
                        });
                    }
                }
            }
        }
        out
    }
}

/// A configuration maps every process id to a state. The per-state counts are
/// materialized at construction so the counter view and the map view can
/// never drift apart.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    assignment: BTreeMap<Pid, StateId>,
    counts: Vec<u32>,
}

impl Configuration {
    pub fn new(assignment: BTreeMap<Pid, StateId>, dim: usize) -> Self {
        assert!(!assignment.is_empty(), "configurations have nonempty domain");
        let mut counts = vec![0u32; dim];
        for s in assignment.values() {
            assert!(s.0 < dim, "state id out of range");
            counts[s.0] += 1;
        }
        Configuration { assignment, counts }
    }

    /// Processes `1..=n` placed at the given states, in order.
    pub fn from_states(states: &[StateId], dim: usize) -> Self {
        let assignment = states
            .iter()
            .enumerate()
            .map(|(i, s)| ((i + 1) as Pid, *s))
            .collect();
        Configuration::new(assignment, dim)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn state_of(&self, pid: Pid) -> Option<StateId> {
        self.assignment.get(&pid).copied()
    }

    pub fn pids(&self) -> impl Iterator<Item = Pid> + '_ {
        self.assignment.keys().copied()
    }

    pub fn assignment(&self) -> &BTreeMap<Pid, StateId> {
        &self.assignment
    }

    /// Per-state process counts in the global state ordering.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Sorted pids currently sitting at `s`.
    pub fn pids_at(&self, s: StateId) -> Vec<Pid> {
        self.assignment
            .iter()
            .filter_map(|(p, st)| (*st == s).then_some(*p))
            .collect()
    }

    pub fn with_moves(&self, moves: &BTreeMap<Pid, StateId>) -> Self {
        let mut assignment = self.assignment.clone();
        for (p, s) in moves {
            assignment.insert(*p, *s);
        }
        Configuration::new(assignment, self.dim())
    }
}

/// Two configurations are twins when every state holds the same number of
/// processes in both.
pub fn twins(f: &Configuration, g: &Configuration) -> bool {
    f.counts == g.counts
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionLabel {
    Broadcast,
    /// `participants[j]` takes letter `j+1` of the action.
    Rendezvous { action: ActionId, participants: Vec<Pid> },
}

impl TransitionLabel {
    /// The action taken: the rendezvous action id, or `None` for a broadcast.
    pub fn actn(&self) -> Option<ActionId> {
        match self {
            TransitionLabel::Broadcast => None,
            TransitionLabel::Rendezvous { action, .. } => Some(*action),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalTransition {
    pub src: Configuration,
    pub label: TransitionLabel,
    pub dst: Configuration,
}

impl GlobalTransition {
    pub fn moved(&self) -> BTreeSet<Pid> {
        match &self.label {
            TransitionLabel::Broadcast => self.src.pids().collect(),
            TransitionLabel::Rendezvous { participants, .. } => {
                participants.iter().copied().collect()
            }
        }
    }

    /// The template edge taken by `pid`, or `None` if it did not move.
    pub fn edge_taken_by(&self, pid: Pid) -> Option<Edge> {
        match &self.label {
            TransitionLabel::Broadcast => Some(Edge {
                src: self.src.state_of(pid)?,
                label: EdgeLabel::Broadcast,
                dst: self.dst.state_of(pid)?,
            }),
            TransitionLabel::Rendezvous { action, participants } => {
                let j = participants.iter().position(|p| *p == pid)?;
                Some(Edge {
                    src: self.src.state_of(pid)?,
                    label: EdgeLabel::Rendezvous { action: *action, index: j + 1 },
                    dst: self.dst.state_of(pid)?,
                })
            }
        }
    }
}

/// A finite path of global transitions together with its start configuration,
/// so that empty paths still carry a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub start: Configuration,
    pub steps: Vec<GlobalTransition>,
}

impl Run {
    pub fn new(start: Configuration, steps: Vec<GlobalTransition>) -> Result<Self, ModelError> {
        let mut cur = &start;
        for (i, t) in steps.iter().enumerate() {
            if &t.src != cur {
                return Err(ModelError::InvalidRun(format!(
                    "step {i} source does not chain with the previous destination"
                )));
            }
            cur = &t.dst;
        }
        Ok(Run { start, steps })
    }

    pub fn end(&self) -> &Configuration {
        self.steps.last().map(|t| &t.dst).unwrap_or(&self.start)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn broadcast_count(&self) -> usize {
        self.steps
            .iter()
            .filter(|t| matches!(t.label, TransitionLabel::Broadcast))
            .count()
    }
}

/// Enumerates every global transition enabled at `f`: all rendezvous choices
/// of `k` distinct processes matching the `k` letters of some action, and all
/// broadcast resolutions (one broadcast edge per process).
pub fn successors(t: &ProcessTemplate, f: &Configuration) -> Vec<GlobalTransition> {
    successors_capped(t, f, None).expect("uncapped enumeration cannot hit the cap")
}

/// As [`successors`], but errors out once more than `cap` broadcast
/// combinations would be produced. Rendezvous enumeration is never capped;
/// only the per-process broadcast choice is exponential in `n`.
pub fn successors_capped(
    t: &ProcessTemplate,
    f: &Configuration,
    cap: Option<usize>,
) -> Result<Vec<GlobalTransition>, ModelError> {
    let mut out = Vec::new();
    let pids: Vec<Pid> = f.pids().collect();

    // Rendezvous: ordered tuples of k distinct processes, one per letter.
    for (aid, _action) in t.actions.iter().enumerate() {
        let action = ActionId(aid);
        let mut chosen: Vec<(Pid, EdgeId)> = Vec::with_capacity(t.k);
        rendezvous_rec(t, f, action, &pids, &mut chosen, &mut out);
    }

    // Broadcast: every process simultaneously takes some broadcast edge.
    if !t.r_only {
        let mut options: Vec<(Pid, Vec<EdgeId>)> = Vec::with_capacity(pids.len());
        let mut possible = true;
        for &p in &pids {
            let s = f.state_of(p).unwrap();
            let opts: Vec<EdgeId> = t.broadcast_edges_from(s).collect();
            if opts.is_empty() {
                possible = false;
                break;
            }
            options.push((p, opts));
        }
        if possible {
            let combos: usize = options.iter().map(|(_, o)| o.len()).product();
            if let Some(limit) = cap {
                if combos > limit {
                    return Err(ModelError::BroadcastCombinationCap { limit });
                }
            }
            let mut choice = vec![0usize; options.len()];
            loop {
                let mut moves = BTreeMap::new();
                for (i, (p, opts)) in options.iter().enumerate() {
                    moves.insert(*p, t.edges[opts[choice[i]].0].dst);
                }
                let dst = f.with_moves(&moves);
                out.push(GlobalTransition {
                    src: f.clone(),
                    label: TransitionLabel::Broadcast,
                    dst,
                });
                // next combination, odometer style
                let mut i = options.len();
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    choice[i] += 1;
                    if choice[i] < options[i].1.len() {
                        break;
                    }
                    choice[i] = 0;
                    if i == 0 {
                        return Ok(out);
                    }
                }
                if options.is_empty() {
                    break;
                }
            }
        }
    }
    Ok(out)
}

fn rendezvous_rec(
    t: &ProcessTemplate,
    f: &Configuration,
    action: ActionId,
    pids: &[Pid],
    chosen: &mut Vec<(Pid, EdgeId)>,
    out: &mut Vec<GlobalTransition>,
) {
    if chosen.len() == t.k {
        let mut moves = BTreeMap::new();
        for (p, e) in chosen.iter() {
            moves.insert(*p, t.edges[e.0].dst);
        }
        let dst = f.with_moves(&moves);
        out.push(GlobalTransition {
            src: f.clone(),
            label: TransitionLabel::Rendezvous {
                action,
                participants: chosen.iter().map(|(p, _)| *p).collect(),
            },
            dst,
        });
        return;
    }
    let j = chosen.len() + 1; // letter index being matched
    for &p in pids {
        if chosen.iter().any(|(q, _)| *q == p) {
            continue;
        }
        let s = f.state_of(p).unwrap();
        for e in t.edges_with_letter(action, j) {
            if t.edges[e.0].src == s {
                chosen.push((p, e));
                rendezvous_rec(t, f, action, pids, chosen, out);
                chosen.pop();
            }
        }
    }
}

/// The path of the template taken by process `pid` along the run: the edges
/// of exactly the steps in which it moved, in order.
pub fn project_run(run: &Run, pid: Pid) -> Result<Vec<Edge>, ModelError> {
    if run.start.state_of(pid).is_none() {
        return Err(ModelError::ProcessNotInRun(pid));
    }
    Ok(run
        .steps
        .iter()
        .filter(|t| t.moved().contains(&pid))
        .map(|t| t.edge_taken_by(pid).unwrap())
        .collect())
}

/// A nonempty path whose endpoint configurations are twins.
pub fn is_pseudo_cycle(path: &Run) -> bool {
    !path.is_empty() && twins(&path.start, path.end())
}

/// A permutation `perm` of the common pid set with `f(perm(i)) = g(i)` for
/// all `i`; exists exactly when `f` and `g` are twins. Matching is by sorted
/// pid order within each state, so the result is deterministic.
pub fn twin_permutation(f: &Configuration, g: &Configuration) -> Option<BTreeMap<Pid, Pid>> {
    if !twins(f, g) || f.pids().collect::<Vec<_>>() != g.pids().collect::<Vec<_>>() {
        return None;
    }
    let mut perm = BTreeMap::new();
    for s in 0..f.dim() {
        let fs = f.pids_at(StateId(s));
        let gs = g.pids_at(StateId(s));
        debug_assert_eq!(fs.len(), gs.len());
        for (fp, gp) in fs.into_iter().zip(gs) {
            perm.insert(gp, fp);
        }
    }
    Some(perm)
}

/// How the inter-broadcast segments of composed runs are interleaved. Each
/// phase between broadcast barriers must complete in every group before the
/// merged broadcast fires.
#[derive(Debug, Clone)]
pub enum Schedule {
    RoundRobin,
    Sequential,
    /// Group index per emitted rendezvous step; broadcasts are implicit at
    /// the phase barriers.
    Explicit(Vec<usize>),
}

/// Composes runs of smaller instances into one run of the combined instance,
/// with each group's processes renamed into a disjoint range. Returns the
/// combined run plus the per-group renaming maps (old pid to new pid).
pub fn compose_runs(
    runs: &[Run],
    schedule: &Schedule,
) -> Result<(Run, Vec<BTreeMap<Pid, Pid>>), ModelError> {
    assert!(!runs.is_empty(), "need at least one run to compose");
    let b = runs[0].broadcast_count();
    for r in runs.iter().skip(1) {
        if r.broadcast_count() != b {
            return Err(ModelError::BroadcastCountMismatch(b, r.broadcast_count()));
        }
    }
    let dim = runs[0].start.dim();

    // Disjoint renaming: group pids are packed densely, in sorted order.
    let mut renamings: Vec<BTreeMap<Pid, Pid>> = Vec::with_capacity(runs.len());
    let mut base: Pid = 1;
    for r in runs {
        let mut m = BTreeMap::new();
        for (i, p) in r.start.pids().enumerate() {
            m.insert(p, base + i as Pid);
        }
        base += r.start.n() as Pid;
        renamings.push(m);
    }

    // Split each run into segments of rendezvous steps separated by the
    // broadcast steps.
    let mut segments: Vec<Vec<Vec<&GlobalTransition>>> = Vec::new();
    let mut broadcasts: Vec<Vec<&GlobalTransition>> = vec![Vec::new(); b];
    for r in runs {
        let mut segs = vec![Vec::new()];
        let mut bi = 0;
        for t in &r.steps {
            if matches!(t.label, TransitionLabel::Broadcast) {
                broadcasts[bi].push(t);
                bi += 1;
                segs.push(Vec::new());
            } else {
                segs.last_mut().unwrap().push(t);
            }
        }
        segments.push(segs);
    }

    let mut assignment = BTreeMap::new();
    for (g, r) in runs.iter().enumerate() {
        for (p, s) in r.start.assignment() {
            assignment.insert(renamings[g][p], *s);
        }
    }
    let mut current = Configuration::new(assignment, dim);
    let start = current.clone();
    let mut steps = Vec::new();

    let mut explicit = match schedule {
        Schedule::Explicit(order) => Some(order.iter().copied()),
        _ => None,
    };

    for phase in 0..=b {
        // cursor into each group's current segment
        let mut cursors = vec![0usize; runs.len()];
        let total: usize = segments.iter().map(|s| s[phase].len()).sum();
        let mut emitted = 0;
        while emitted < total {
            let g = match schedule {
                Schedule::Sequential => (0..runs.len())
                    .find(|&g| cursors[g] < segments[g][phase].len())
                    .unwrap(),
                Schedule::RoundRobin => {
                    let mut pick = None;
                    for off in 0..runs.len() {
                        let g = (emitted + off) % runs.len();
                        if cursors[g] < segments[g][phase].len() {
                            pick = Some(g);
                            break;
                        }
                    }
                    pick.unwrap()
                }
                Schedule::Explicit(_) => {
                    let g = explicit
                        .as_mut()
                        .and_then(|it| it.next())
                        .ok_or_else(|| {
                            ModelError::ScheduleViolation("schedule ended early".into())
                        })?;
                    if g >= runs.len() {
                        return Err(ModelError::ScheduleViolation(format!(
                            "group index {g} out of range"
                        )));
                    }
                    if cursors[g] >= segments[g][phase].len() {
                        return Err(ModelError::ScheduleViolation(format!(
                            "group {g} has no step left before the next broadcast barrier"
                        )));
                    }
                    g
                }
            };
            let t = segments[g][phase][cursors[g]];
            cursors[g] += 1;
            emitted += 1;
            let TransitionLabel::Rendezvous { action, participants } = &t.label else {
                unreachable!("segments contain rendezvous steps only");
            };
            let renamed: Vec<Pid> = participants.iter().map(|p| renamings[g][p]).collect();
            let mut moves = BTreeMap::new();
            for p in participants {
                moves.insert(renamings[g][p], t.dst.state_of(*p).unwrap());
            }
            let dst = current.with_moves(&moves);
            steps.push(GlobalTransition {
                src: current.clone(),
                label: TransitionLabel::Rendezvous {
                    action: *action,
                    participants: renamed,
                },
                dst: dst.clone(),
            });
            current = dst;
        }
        if phase < b {
            // merged broadcast: every group follows its own broadcast step
            let mut moves = BTreeMap::new();
            for (g, t) in broadcasts[phase].iter().enumerate() {
                for (p, _) in t.src.assignment() {
                    moves.insert(renamings[g][p], t.dst.state_of(*p).unwrap());
                }
            }
            let dst = current.with_moves(&moves);
            steps.push(GlobalTransition {
                src: current.clone(),
                label: TransitionLabel::Broadcast,
                dst: dst.clone(),
            });
            current = dst;
        }
    }
    if let Some(mut it) = explicit {
        if it.next().is_some() {
            return Err(ModelError::ScheduleViolation(
                "schedule longer than the steps to interleave".into(),
            ));
        }
    }
    Ok((Run { start, steps }, renamings))
}

/// Lazily replays a pseudo-cycle forever, renaming processes after each lap
/// by the twin-matching permutation.
pub struct PumpIter<'a> {
    path: &'a Run,
    /// sigma with start(sigma(i)) = end(i), composed lap by lap
    sigma: BTreeMap<Pid, Pid>,
    perm: BTreeMap<Pid, Pid>,
    inv_perm: BTreeMap<Pid, Pid>,
    current: Configuration,
    idx: usize,
}

impl<'a> Iterator for PumpIter<'a> {
    type Item = GlobalTransition;

    fn next(&mut self) -> Option<GlobalTransition> {
        let t = &self.path.steps[self.idx];
        let label = match &t.label {
            TransitionLabel::Broadcast => TransitionLabel::Broadcast,
            TransitionLabel::Rendezvous { action, participants } => TransitionLabel::Rendezvous {
                action: *action,
                participants: participants.iter().map(|p| self.inv_perm[p]).collect(),
            },
        };
        let mut moves = BTreeMap::new();
        for p in t.moved() {
            moves.insert(self.inv_perm[&p], t.dst.state_of(p).unwrap());
        }
        let dst = self.current.with_moves(&moves);
        let out = GlobalTransition { src: self.current.clone(), label, dst: dst.clone() };
        self.current = dst;
        self.idx += 1;
        if self.idx == self.path.steps.len() {
            self.idx = 0;
            // advance one lap: perm := perm . sigma
            let next_perm: BTreeMap<Pid, Pid> =
                self.perm.iter().map(|(i, v)| (*i, self.sigma[v])).collect();
            self.perm = next_perm;
            self.inv_perm = self.perm.iter().map(|(a, b)| (*b, *a)).collect();
        }
        Some(out)
    }
}

/// An infinite replay of `path`; take as many steps as needed.
pub fn pump_iter(path: &Run) -> Result<PumpIter<'_>, ModelError> {
    if !is_pseudo_cycle(path) {
        return Err(ModelError::NotAPseudoCycle);
    }
    let sigma = twin_permutation(&path.start, path.end()).unwrap();
    let identity: BTreeMap<Pid, Pid> = path.start.pids().map(|p| (p, p)).collect();
    Ok(PumpIter {
        path,
        sigma,
        perm: identity.clone(),
        inv_perm: identity,
        current: path.start.clone(),
        idx: 0,
    })
}

/// Replays the pseudo-cycle `iterations` times; the result is a valid path of
/// length `|path| * iterations`.
pub fn pump_pseudo_cycle(path: &Run, iterations: usize) -> Result<Run, ModelError> {
    let it = pump_iter(path)?;
    let steps: Vec<GlobalTransition> = it.take(path.len() * iterations).collect();
    Run::new(path.start.clone(), steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn fig_rb() -> ProcessTemplate {
        corpus::fig_not_regular()
    }

    fn fig_r() -> ProcessTemplate {
        corpus::fig_three_state()
    }

    #[test]
    fn validate_accepts_the_fixtures() {
        assert!(fig_rb().validate(true).is_empty());
        assert!(fig_r().validate(true).is_empty());
    }

    #[test]
    fn validate_flags_missing_broadcast_edge() {
        let mut t = fig_rb();
        let q = t.state_id("q").unwrap();
        t.edges.retain(|e| !(e.src == q && e.label.is_broadcast()));
        let diags = t.validate(true);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].rule, "missing-broadcast-edge");
        assert!(diags[0].detail.contains('q'));
    }

    #[test]
    fn successors_single_process_broadcast_only() {
        let t = fig_rb();
        let q = t.state_id("q").unwrap();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[q], t.dim());
        let succ = successors(&t, &f);
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].label, TransitionLabel::Broadcast);
        assert_eq!(succ[0].dst.state_of(1), Some(p));
    }

    #[test]
    fn successors_two_processes_at_p() {
        let t = fig_rb();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let succ = successors(&t, &f);
        let rdz = succ
            .iter()
            .filter(|t| matches!(t.label, TransitionLabel::Rendezvous { .. }))
            .count();
        let bc = succ.len() - rdz;
        assert_eq!((rdz, bc), (2, 1));
    }

    #[test]
    fn successors_contains_the_reference_step() {
        let t = fig_r();
        let (p, q, r) = (
            t.state_id("p").unwrap(),
            t.state_id("q").unwrap(),
            t.state_id("r").unwrap(),
        );
        let f = Configuration::from_states(&[p, q, q, r], t.dim());
        let c = t.action_id("c").unwrap();
        let succ = successors(&t, &f);
        let expect_dst = Configuration::from_states(&[p, q, r, p], t.dim());
        assert!(succ.iter().any(|tr| {
            tr.label
                == TransitionLabel::Rendezvous {
                    action: c,
                    participants: vec![3, 4],
                }
                && tr.dst == expect_dst
        }));
    }

    #[test]
    fn twins_of_reference_endpoints() {
        let t = fig_r();
        let (p, q, r) = (
            t.state_id("p").unwrap(),
            t.state_id("q").unwrap(),
            t.state_id("r").unwrap(),
        );
        let f = Configuration::from_states(&[p, q, q, r], t.dim());
        let g = Configuration::from_states(&[p, r, q, q], t.dim());
        let h = Configuration::from_states(&[p, q, r, p], t.dim());
        assert!(twins(&f, &g));
        assert!(!twins(&f, &h));
        assert!(twins(&f, &f));
    }

    #[test]
    fn reference_path_is_a_pseudo_cycle_but_not_its_prefix() {
        let run = corpus::reference_pseudo_cycle();
        assert!(is_pseudo_cycle(&run));
        assert_ne!(&run.start, run.end());
        let prefix = Run::new(run.start.clone(), run.steps[..2].to_vec()).unwrap();
        assert!(!is_pseudo_cycle(&prefix));
    }

    #[test]
    fn reference_path_replays_through_successors() {
        let t = fig_r();
        let run = corpus::reference_pseudo_cycle();
        let mut cur = run.start.clone();
        for step in &run.steps {
            let succ = successors(&t, &cur);
            assert!(succ.contains(step), "step not among enabled transitions");
            cur = step.dst.clone();
        }
    }

    #[test]
    fn projection_of_reference_path_on_process_3() {
        let t = fig_r();
        let run = corpus::reference_pseudo_cycle();
        let proj = project_run(&run, 3).unwrap();
        let name = |e: &Edge| {
            format!(
                "{}:{}:{}",
                t.state_name(e.src),
                t.letter_display(&e.label),
                t.state_name(e.dst)
            )
        };
        let got: Vec<String> = proj.iter().map(name).collect();
        // process 3 moves in all three steps: c.1 from q, then c.2 from r,
        // then a.1 from p
        assert_eq!(got, vec!["q:c.1:r", "r:c.2:p", "p:a.1:q"]);
    }

    #[test]
    fn projection_on_idle_process_is_empty() {
        let _t = fig_r();
        let run = corpus::reference_pseudo_cycle();
        assert!(project_run(&run, 1).unwrap().is_empty());
        assert!(matches!(
            project_run(&run, 99),
            Err(ModelError::ProcessNotInRun(99))
        ));
    }

    #[test]
    fn broadcast_only_projection() {
        let t = fig_rb();
        let q = t.state_id("q").unwrap();
        let f = Configuration::from_states(&[q], t.dim());
        let s1 = successors(&t, &f).remove(0);
        let s2 = successors(&t, &s1.dst).remove(0);
        let run = Run::new(f, vec![s1, s2]).unwrap();
        let proj = project_run(&run, 1).unwrap();
        let words: Vec<String> = proj
            .iter()
            .map(|e| {
                format!(
                    "{}:{}:{}",
                    t.state_name(e.src),
                    t.letter_display(&e.label),
                    t.state_name(e.dst)
                )
            })
            .collect();
        assert_eq!(words, vec!["q:b:p", "p:b:p"]);
    }

    #[test]
    fn compose_two_reference_cycles_round_robin() {
        let run = corpus::reference_pseudo_cycle();
        let (combined, renamings) =
            compose_runs(&[run.clone(), run.clone()], &Schedule::RoundRobin).unwrap();
        assert_eq!(combined.start.n(), 8);
        assert_eq!(combined.len(), 6);
        assert_eq!(combined.broadcast_count(), 0);
        // replays through successors of the r-template
        let t = fig_r();
        let mut cur = combined.start.clone();
        for step in &combined.steps {
            assert!(successors(&t, &cur).contains(step));
            cur = step.dst.clone();
        }
        // projecting back along the renaming reproduces each input run's moves
        for renaming in &renamings {
            for (old, new) in renaming {
                let orig = project_run(&run, *old).unwrap();
                let lifted = project_run(&combined, *new).unwrap();
                assert_eq!(orig, lifted);
            }
        }
    }

    #[test]
    fn compose_single_run_is_identity_shape() {
        let run = corpus::reference_pseudo_cycle();
        let (combined, _) = compose_runs(&[run.clone()], &Schedule::Sequential).unwrap();
        assert_eq!(combined.len(), run.len());
        assert_eq!(combined.broadcast_count(), run.broadcast_count());
    }

    #[test]
    fn compose_rejects_unequal_broadcast_counts() {
        let t = fig_rb();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let succ = successors(&t, &f);
        let bcast = succ
            .iter()
            .find(|s| matches!(s.label, TransitionLabel::Broadcast))
            .unwrap()
            .clone();
        let with_b = Run::new(f.clone(), vec![bcast]).unwrap();
        let without = Run::new(f, vec![]).unwrap();
        assert!(matches!(
            compose_runs(&[with_b, without], &Schedule::RoundRobin),
            Err(ModelError::BroadcastCountMismatch(1, 0))
        ));
    }

    #[test]
    fn pump_reference_cycle_twice() {
        let run = corpus::reference_pseudo_cycle();
        let pumped = pump_pseudo_cycle(&run, 2).unwrap();
        assert_eq!(pumped.len(), 6);
        let t = fig_r();
        let mut cur = pumped.start.clone();
        for step in &pumped.steps {
            assert!(successors(&t, &cur).contains(step));
            cur = step.dst.clone();
        }
        // every full lap ends in a twin of the start
        let mid = Run::new(pumped.start.clone(), pumped.steps[..3].to_vec()).unwrap();
        assert!(twins(&pumped.start, mid.end()));
        assert!(twins(&pumped.start, pumped.end()));
    }

    #[test]
    fn pump_true_cycle_repeats_identically() {
        let t = fig_rb();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let bcast = successors(&t, &f)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Broadcast))
            .unwrap();
        let cyc = Run::new(f, vec![bcast.clone()]).unwrap();
        let pumped = pump_pseudo_cycle(&cyc, 3).unwrap();
        assert_eq!(pumped.steps, vec![bcast.clone(), bcast.clone(), bcast]);
    }

    #[test]
    fn pump_alternating_rendezvous_broadcast() {
        let t = fig_rb();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let rdz = successors(&t, &f)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Rendezvous { .. }))
            .unwrap();
        let back = successors(&t, &rdz.dst)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Broadcast))
            .unwrap();
        let cyc = Run::new(f, vec![rdz, back]).unwrap();
        assert!(is_pseudo_cycle(&cyc));
        let pumped = pump_pseudo_cycle(&cyc, 3).unwrap();
        assert_eq!(pumped.len(), 6);
        let mut cur = pumped.start.clone();
        for step in &pumped.steps {
            assert!(successors(&t, &cur).contains(step));
            cur = step.dst.clone();
        }
    }

    #[test]
    fn pump_rejects_non_pseudo_cycle() {
        let t = fig_rb();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let rdz = successors(&t, &f)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Rendezvous { .. }))
            .unwrap();
        let path = Run::new(f, vec![rdz]).unwrap();
        assert!(matches!(
            pump_pseudo_cycle(&path, 2),
            Err(ModelError::NotAPseudoCycle)
        ));
    }

    #[test]
    fn broadcast_cap_is_enforced() {
        // both states of a two-state template have two broadcast edges, so a
        // 4-process configuration has 16 broadcast resolutions
        let t = corpus::two_phase();
        let u = t.state_id("u").unwrap();
        let f = Configuration::from_states(&[u, u, u, u], t.dim());
        let err = successors_capped(&t, &f, Some(3));
        assert!(matches!(
            err,
            Err(ModelError::BroadcastCombinationCap { limit: 3 })
        ));
        assert!(successors_capped(&t, &f, Some(1000)).is_ok());
    }
}
