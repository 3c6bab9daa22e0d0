//! Discrete timed-network templates and their reduction to rendezvous/
//! broadcast templates: clock valuations are abstracted at each clock's max
//! constant, time ticks become broadcasts, guards are pushed into the product
//! states, and actions are relabeled to restore one-edge-per-letter.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    ActionId, Edge, EdgeLabel, ProcessTemplate, RendezvousAction, StateId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClockId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    True,
    False,
    /// `c < x` for a constant `c` and clock `x`.
    Lt(u32, ClockId),
    /// `c = x`.
    Eq(u32, ClockId),
    And(Vec<Guard>),
    Or(Vec<Guard>),
    Not(Box<Guard>),
}

impl Guard {
    /// Largest constant compared against `clock`, if any.
    pub fn max_constant(&self, clock: ClockId) -> Option<u32> {
        match self {
            Guard::True | Guard::False => None,
            Guard::Lt(c, x) | Guard::Eq(c, x) => (*x == clock).then_some(*c),
            Guard::And(gs) | Guard::Or(gs) => {
                gs.iter().filter_map(|g| g.max_constant(clock)).max()
            }
            Guard::Not(g) => g.max_constant(clock),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockDecl {
    pub name: String,
    /// Explicitly declared max constant; derived from the guards when absent.
    pub declared_max: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedEdge {
    pub src: StateId,
    pub action: ActionId,
    pub index: usize,
    pub dst: StateId,
    pub guard: Guard,
    pub resets: BTreeSet<ClockId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedTemplate {
    pub k: usize,
    pub states: Vec<String>,
    pub init: BTreeSet<StateId>,
    pub actions: Vec<RendezvousAction>,
    pub clocks: Vec<ClockDecl>,
    pub edges: Vec<TimedEdge>,
}

#[derive(Debug, Error)]
pub enum TimedError {
    #[error("guard references undeclared clock index {0}")]
    UndeclaredClock(usize),
    #[error("state-space budget exceeded: {states} product states > cap {cap} ({detail})")]
    StateCapExceeded { states: usize, cap: usize, detail: String },
    #[error("relabeled-action budget exceeded: {actions} instantiations > cap {cap} for action {name}")]
    ActionCapExceeded { actions: usize, cap: usize, name: String },
    #[error("guard constant {constant} exceeds declared max {max} of clock {clock}")]
    GuardConstantExceedsMax { constant: u32, max: u32, clock: String },
}

/// Abstract clock value: an exact value up to the clock's max constant, or
/// the collapsed "beyond the max" value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClockValue {
    Val(u32),
    Top,
}

pub type ClockValuation = Vec<ClockValue>;

impl TimedTemplate {
    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn clock_id(&self, name: &str) -> Option<ClockId> {
        self.clocks.iter().position(|c| c.name == name).map(ClockId)
    }

    /// Effective max constant per clock: declared, or derived from guards.
    pub fn clock_maxes(&self, global_override: Option<u32>) -> Vec<u32> {
        self.clocks
            .iter()
            .enumerate()
            .map(|(i, decl)| {
                if let Some(g) = global_override {
                    return g;
                }
                decl.declared_max.unwrap_or_else(|| {
                    self.edges
                        .iter()
                        .filter_map(|e| e.guard.max_constant(ClockId(i)))
                        .max()
                        .unwrap_or(0)
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), TimedError> {
        for (i, decl) in self.clocks.iter().enumerate() {
            if let Some(max) = decl.declared_max {
                for e in &self.edges {
                    if let Some(c) = e.guard.max_constant(ClockId(i)) {
                        if c > max {
                            return Err(TimedError::GuardConstantExceedsMax {
                                constant: c,
                                max,
                                clock: decl.name.clone(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Evaluates a guard over an abstract valuation. `Top` means "larger than the
/// clock's max constant", so every `c < x` holds and every `c = x` fails.
pub fn eval_guard(g: &Guard, v: &ClockValuation) -> Result<bool, TimedError> {
    Ok(match g {
        Guard::True => true,
        Guard::False => false,
        Guard::Lt(c, x) => match v.get(x.0).ok_or(TimedError::UndeclaredClock(x.0))? {
            ClockValue::Val(n) => *c < *n,
            ClockValue::Top => true,
        },
        Guard::Eq(c, x) => match v.get(x.0).ok_or(TimedError::UndeclaredClock(x.0))? {
            ClockValue::Val(n) => *c == *n,
            ClockValue::Top => false,
        },
        Guard::And(gs) => {
            let mut acc = true;
            for g in gs {
                acc &= eval_guard(g, v)?;
            }
            acc
        }
        Guard::Or(gs) => {
            let mut acc = false;
            for g in gs {
                acc |= eval_guard(g, v)?;
            }
            acc
        }
        Guard::Not(g) => !eval_guard(g, v)?,
    })
}

/// Advances every clock by one unit, saturating past its max constant.
pub fn tick(v: &ClockValuation, maxes: &[u32]) -> ClockValuation {
    v.iter()
        .zip(maxes)
        .map(|(cv, max)| match cv {
            ClockValue::Val(n) if n + 1 > *max => ClockValue::Top,
            ClockValue::Val(n) => ClockValue::Val(n + 1),
            ClockValue::Top => ClockValue::Top,
        })
        .collect()
}

fn valuation_suffix(v: &ClockValuation) -> String {
    v.iter()
        .map(|cv| match cv {
            ClockValue::Val(n) => n.to_string(),
            ClockValue::Top => "w".to_string(),
        })
        .collect::<Vec<_>>()
        .join("_")
}

#[derive(Debug, Clone, Serialize)]
pub struct RelabelEntry {
    pub orig_action: String,
    /// One `src:letter:dst` edge id per letter, in letter order.
    pub letter_edges: Vec<String>,
}

/// Emitted alongside the reduced template so specifications written against
/// the original letters can be translated: a spec letter matches all of its
/// relabeled descendants.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RelabelMap {
    pub actions: BTreeMap<String, RelabelEntry>,
}

impl RelabelMap {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.actions).expect("relabel map serializes")
    }
}

#[derive(Debug, Clone)]
pub struct ReduceOptions {
    /// Cap on `|Q| * |valuations|`.
    pub state_cap: usize,
    /// Cap on instantiations per original action.
    pub action_cap: usize,
    pub global_cmax: Option<u32>,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions { state_cap: 100_000, action_cap: 100_000, global_cmax: None }
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub template: ProcessTemplate,
    pub map: RelabelMap,
    /// Base timed state of each product state.
    pub state_base: Vec<StateId>,
    /// Original timed action of each relabeled action.
    pub action_base: Vec<ActionId>,
}

/// Builds the equivalent rendezvous/broadcast template: product states are
/// (location, abstract valuation), one broadcast edge per state simulates the
/// tick, and each tuple of concretely enabled letter instantiations becomes a
/// fresh rendezvous action, keeping one edge per letter.
pub fn reduce_to_rb(t: &TimedTemplate, opts: &ReduceOptions) -> Result<Reduction, TimedError> {
    t.validate()?;
    let maxes = t.clock_maxes(opts.global_cmax);
    let n_vals: usize = maxes.iter().map(|m| *m as usize + 2).product();
    let total = t.states.len() * n_vals;
    if total > opts.state_cap {
        return Err(TimedError::StateCapExceeded {
            states: total,
            cap: opts.state_cap,
            detail: format!(
                "{} locations x {} abstract valuations",
                t.states.len(),
                n_vals
            ),
        });
    }

    // all abstract valuations, lexicographic in clock declaration order
    let mut valuations: Vec<ClockValuation> = vec![Vec::new()];
    for max in &maxes {
        let mut next = Vec::new();
        for v in &valuations {
            for value in (0..=*max).map(ClockValue::Val).chain([ClockValue::Top]) {
                let mut w = v.clone();
                w.push(value);
                next.push(w);
            }
        }
        valuations = next;
    }

    let has_clocks = !t.clocks.is_empty();
    let mut states = Vec::with_capacity(total);
    let mut state_base = Vec::with_capacity(total);
    let mut product_id: BTreeMap<(StateId, ClockValuation), StateId> = BTreeMap::new();
    for (qi, qname) in t.states.iter().enumerate() {
        for v in &valuations {
            let name = if has_clocks {
                format!("{qname}__{}", valuation_suffix(v))
            } else {
                qname.clone()
            };
            let id = StateId(states.len());
            product_id.insert((StateId(qi), v.clone()), id);
            states.push(name);
            state_base.push(StateId(qi));
        }
    }

    let zero: ClockValuation = vec![ClockValue::Val(0); t.clocks.len()];
    let init: BTreeSet<StateId> = t
        .init
        .iter()
        .map(|q| product_id[&(*q, zero.clone())])
        .collect();

    let mut edges = Vec::new();
    // tick: one broadcast edge per product state
    for ((q, v), id) in &product_id {
        let next = product_id[&(*q, tick(v, &maxes))];
        edges.push(Edge { src: *id, label: EdgeLabel::Broadcast, dst: next });
        let _ = q;
    }

    let mut actions: Vec<RendezvousAction> = Vec::new();
    let mut action_base: Vec<ActionId> = Vec::new();
    let mut map = RelabelMap::default();
    for (ai, action) in t.actions.iter().enumerate() {
        // per letter: all (edge, valuation) pairs whose guard holds
        let mut choices: Vec<Vec<(&TimedEdge, &ClockValuation)>> = Vec::with_capacity(t.k);
        for j in 1..=t.k {
            let mut opts_j = Vec::new();
            for e in t.edges.iter().filter(|e| e.action == ActionId(ai) && e.index == j) {
                for v in &valuations {
                    if eval_guard(&e.guard, v)? {
                        opts_j.push((e, v));
                    }
                }
            }
            choices.push(opts_j);
        }
        let count: usize = choices.iter().map(|c| c.len()).product();
        if choices.iter().any(|c| c.is_empty()) {
            continue; // some letter can never fire; the action is dropped
        }
        if count > opts.action_cap {
            return Err(TimedError::ActionCapExceeded {
                actions: count,
                cap: opts.action_cap,
                name: action.name.clone(),
            });
        }
        let mut idx = vec![0usize; t.k];
        let mut serial = 0usize;
        loop {
            let name = format!("{}__{}", action.name, serial);
            serial += 1;
            let new_action = ActionId(actions.len());
            actions.push(RendezvousAction { name: name.clone() });
            action_base.push(ActionId(ai));
            let mut letter_edges = Vec::with_capacity(t.k);
            for (j0, c) in choices.iter().enumerate() {
                let (e, v) = c[idx[j0]];
                let src = product_id[&(e.src, v.clone())];
                let mut reset_val = v.clone();
                for r in &e.resets {
                    reset_val[r.0] = ClockValue::Val(0);
                }
                let dst = product_id[&(e.dst, reset_val)];
                edges.push(Edge {
                    src,
                    label: EdgeLabel::Rendezvous { action: new_action, index: j0 + 1 },
                    dst,
                });
                letter_edges.push(format!(
                    "{}:{}.{}:{}",
                    states[src.0],
                    name,
                    j0 + 1,
                    states[dst.0]
                ));
            }
            map.actions.insert(
                name,
                RelabelEntry { orig_action: action.name.clone(), letter_edges },
            );
            // odometer over the instantiation tuple
            let mut pos = t.k;
            let mut done = false;
            loop {
                if pos == 0 {
                    done = true;
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < choices[pos].len() {
                    break;
                }
                idx[pos] = 0;
                if pos == 0 {
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
        }
    }

    let template = ProcessTemplate {
        k: t.k,
        states,
        init,
        actions,
        edges,
        r_only: false,
    };
    debug_assert!(template.is_strict());
    Ok(Reduction { template, map, state_base, action_base })
}

/// An execution symbol of the concrete timed semantics, used to compare the
/// reduction against ground truth at bounded depth.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TimedSymbol {
    Tick { at: StateId },
    Rdz { src: StateId, action: ActionId, index: usize, dst: StateId },
}

type ConcreteLocal = (StateId, Vec<u32>);

fn concrete_guard(g: &Guard, vals: &[u32]) -> bool {
    match g {
        Guard::True => true,
        Guard::False => false,
        Guard::Lt(c, x) => *c < vals[x.0],
        Guard::Eq(c, x) => *c == vals[x.0],
        Guard::And(gs) => gs.iter().all(|g| concrete_guard(g, vals)),
        Guard::Or(gs) => gs.iter().any(|g| concrete_guard(g, vals)),
        Guard::Not(g) => !concrete_guard(g, vals),
    }
}

/// All process-1 projections of runs of the concrete (unabstracted) timed
/// network of size `n`, up to `maxlen` steps. Exponential; test scale only.
pub fn concrete_exec_fin(
    t: &TimedTemplate,
    n: usize,
    maxlen: usize,
) -> BTreeSet<Vec<TimedSymbol>> {
    let zero = vec![0u32; t.clocks.len()];
    let mut initials: Vec<Vec<ConcreteLocal>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for cfg in &initials {
            for q in &t.init {
                let mut c = cfg.clone();
                c.push((*q, zero.clone()));
                next.push(c);
            }
        }
        initials = next;
    }

    let mut memo: BTreeMap<(Vec<ConcreteLocal>, usize), BTreeSet<Vec<TimedSymbol>>> =
        BTreeMap::new();
    let mut out = BTreeSet::new();
    for cfg in initials {
        out.extend(suffixes(t, &cfg, maxlen, &mut memo));
    }
    out
}

fn suffixes(
    t: &TimedTemplate,
    cfg: &[ConcreteLocal],
    depth: usize,
    memo: &mut BTreeMap<(Vec<ConcreteLocal>, usize), BTreeSet<Vec<TimedSymbol>>>,
) -> BTreeSet<Vec<TimedSymbol>> {
    // canonical: process 1 distinguished, the rest sorted
    let mut canon = cfg.to_vec();
    canon[1..].sort();
    if let Some(hit) = memo.get(&(canon.clone(), depth)) {
        return hit.clone();
    }
    let mut words: BTreeSet<Vec<TimedSymbol>> = BTreeSet::new();
    words.insert(Vec::new());
    if depth > 0 {
        // tick: every clock of every process advances
        {
            let next: Vec<ConcreteLocal> = cfg
                .iter()
                .map(|(q, vals)| (*q, vals.iter().map(|v| v + 1).collect()))
                .collect();
            let sym = TimedSymbol::Tick { at: cfg[0].0 };
            for w in suffixes(t, &next, depth - 1, memo) {
                let mut word = vec![sym.clone()];
                word.extend(w);
                words.insert(word);
            }
        }
        // rendezvous: ordered tuples of k distinct processes
        for (ai, _) in t.actions.iter().enumerate() {
            let mut chosen: Vec<(usize, &TimedEdge)> = Vec::new();
            rdz_rec(t, cfg, ActionId(ai), &mut chosen, depth, memo, &mut words);
        }
    }
    memo.insert((canon, depth), words.clone());
    words
}

fn rdz_rec<'a>(
    t: &'a TimedTemplate,
    cfg: &[ConcreteLocal],
    action: ActionId,
    chosen: &mut Vec<(usize, &'a TimedEdge)>,
    depth: usize,
    memo: &mut BTreeMap<(Vec<ConcreteLocal>, usize), BTreeSet<Vec<TimedSymbol>>>,
    words: &mut BTreeSet<Vec<TimedSymbol>>,
) {
    if chosen.len() == t.k {
        let mut next = cfg.to_vec();
        for (pi, e) in chosen.iter() {
            let (_, vals) = &mut next[*pi];
            for r in &e.resets {
                vals[r.0] = 0;
            }
            next[*pi].0 = e.dst;
        }
        let sym = chosen
            .iter()
            .find(|(pi, _)| *pi == 0)
            .map(|(_, e)| TimedSymbol::Rdz {
                src: e.src,
                action: e.action,
                index: e.index,
                dst: e.dst,
            });
        for w in suffixes(t, &next, depth - 1, memo) {
            match &sym {
                Some(s) => {
                    let mut word = vec![s.clone()];
                    word.extend(w);
                    words.insert(word);
                }
                None => {
                    words.insert(w);
                }
            }
        }
        return;
    }
    let j = chosen.len() + 1;
    for pi in 0..cfg.len() {
        if chosen.iter().any(|(q, _)| *q == pi) {
            continue;
        }
        let (q, vals) = &cfg[pi];
        for e in &t.edges {
            if e.action == action && e.index == j && e.src == *q && concrete_guard(&e.guard, vals)
            {
                chosen.push((pi, e));
                rdz_rec(t, cfg, action, chosen, depth, memo, words);
                chosen.pop();
            }
        }
    }
}

/// Maps a word over the reduced template's edges back into concrete timed
/// symbols, through the reduction metadata.
pub fn reduced_word_to_symbols(red: &Reduction, word: &[crate::model::EdgeId]) -> Vec<TimedSymbol> {
    word.iter()
        .map(|e| {
            let edge = &red.template.edges[e.0];
            match edge.label {
                EdgeLabel::Broadcast => TimedSymbol::Tick { at: red.state_base[edge.src.0] },
                EdgeLabel::Rendezvous { action, index } => TimedSymbol::Rdz {
                    src: red.state_base[edge.src.0],
                    action: red.action_base[action.0],
                    index,
                    dst: red.state_base[edge.dst.0],
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_timed;

    fn fixture() -> TimedTemplate {
        parse_timed(crate::corpus::timed_single_clock()).unwrap()
    }

    #[test]
    fn guard_evaluation_on_abstract_values() {
        let x = ClockId(0);
        assert!(eval_guard(&Guard::Eq(1, x), &vec![ClockValue::Val(1)]).unwrap());
        assert!(eval_guard(&Guard::Lt(1, x), &vec![ClockValue::Top]).unwrap());
        // with c_max = 2, Top encodes values >= 3, so 2 = x is false there
        assert!(!eval_guard(&Guard::Eq(2, x), &vec![ClockValue::Top]).unwrap());
        assert!(matches!(
            eval_guard(&Guard::Eq(0, ClockId(3)), &vec![ClockValue::Val(0)]),
            Err(TimedError::UndeclaredClock(3))
        ));
    }

    #[test]
    fn tick_saturates_at_the_max() {
        let maxes = [2u32];
        assert_eq!(tick(&vec![ClockValue::Val(0)], &maxes), vec![ClockValue::Val(1)]);
        assert_eq!(tick(&vec![ClockValue::Val(2)], &maxes), vec![ClockValue::Top]);
        assert_eq!(tick(&vec![ClockValue::Top], &maxes), vec![ClockValue::Top]);
        // idempotent on Top, monotone below
        let top = vec![ClockValue::Top];
        assert_eq!(tick(&top, &maxes), tick(&tick(&top, &maxes), &maxes));
    }

    #[test]
    fn single_clock_fixture_reduces_to_three_valuations() {
        let t = fixture();
        let red = reduce_to_rb(&t, &ReduceOptions::default()).unwrap();
        assert_eq!(red.template.states.len(), 3); // q0 x {0, 1, top}
        assert!(red.template.validate(true).is_empty());
        // exactly one relabeled action: both letters enabled only at value 1
        assert_eq!(red.template.actions.len(), 1);
        let entry = red.map.actions.values().next().unwrap();
        assert_eq!(entry.orig_action, "a");
        assert_eq!(
            entry.letter_edges,
            vec!["q0__1:a__0.1:q0__0", "q0__1:a__0.2:q0__0"]
        );
    }

    #[test]
    fn no_clocks_means_identity_plus_self_loop_broadcasts() {
        let t = parse_timed(
            "system timed\nk 2\nstate q0 init\nstate q1\n\
             edge q0 a.1 q1 guard true reset -\n\
             edge q0 a.2 q0 guard true reset -\n",
        )
        .unwrap();
        let red = reduce_to_rb(&t, &ReduceOptions::default()).unwrap();
        assert_eq!(red.template.states, vec!["q0", "q1"]);
        assert_eq!(red.template.actions.len(), 1);
        let bcast: Vec<_> = red
            .template
            .edges
            .iter()
            .filter(|e| e.label.is_broadcast())
            .collect();
        assert_eq!(bcast.len(), 2);
        assert!(bcast.iter().all(|e| e.src == e.dst));
    }

    #[test]
    fn unsatisfiable_guards_leave_only_broadcast_edges() {
        let t = parse_timed(
            "system timed\nk 2\nclock x max 1\nstate q0 init\n\
             edge q0 a.1 q0 guard false reset -\n\
             edge q0 a.2 q0 guard true reset -\n",
        )
        .unwrap();
        let red = reduce_to_rb(&t, &ReduceOptions::default()).unwrap();
        assert!(red.template.actions.is_empty());
        assert!(red.template.edges.iter().all(|e| e.label.is_broadcast()));
    }

    #[test]
    fn state_cap_is_reported() {
        let t = parse_timed(
            "system timed\nk 2\nclock x max 9\nclock y max 9\nstate q0 init\n\
             edge q0 a.1 q0 guard true reset -\n\
             edge q0 a.2 q0 guard true reset -\n",
        )
        .unwrap();
        let err = reduce_to_rb(&t, &ReduceOptions { state_cap: 50, ..Default::default() });
        assert!(matches!(err, Err(TimedError::StateCapExceeded { states: 121, .. })));
    }

    #[test]
    fn declared_max_must_cover_guard_constants() {
        let t = parse_timed(
            "system timed\nk 2\nclock x max 1\nstate q0 init\n\
             edge q0 a.1 q0 guard (eq 5 x) reset -\n\
             edge q0 a.2 q0 guard true reset -\n",
        )
        .unwrap();
        assert!(matches!(
            reduce_to_rb(&t, &ReduceOptions::default()),
            Err(TimedError::GuardConstantExceedsMax { constant: 5, max: 1, .. })
        ));
    }
}
