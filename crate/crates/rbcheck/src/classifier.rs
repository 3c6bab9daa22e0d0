//! Edge classification by LP-based pseudo-cycle detection. Every unwinding
//! edge gets one of four colors from two witness queries: a broadcast-free
//! pseudo-cycle inside the edge's component (T1), and a canonical cycle with
//! exactly `r` broadcasts starting in the first loop component (T2). Support
//! pruning with an activation fixpoint replaces geometric legality reasoning;
//! integer scaling turns rational witnesses into explicit paths.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;
use rayon::prelude::*;
use serde_json::json;
use thiserror::Error;

use crate::model::{
    is_pseudo_cycle, ActionId, Configuration, Diagnostic, EdgeLabel, GlobalTransition, Pid, Run,
    StateId, TransitionLabel,
};
use crate::ratvas::{
    action_effect, integer_scale_u64, lp_feasible, max_support_solution, rat, ActionEffect,
    LinearSystem, Rat, VarId,
};
use crate::unwinding::{UEdgeId, Unwinding, UnwindingTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeColor {
    Red,
    Blue,
    Green,
    Orange,
}

impl EdgeColor {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeColor::Red => "red",
            EdgeColor::Blue => "blue",
            EdgeColor::Green => "green",
            EdgeColor::Orange => "orange",
        }
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("template is not strict (one edge per rendezvous letter required): {0:?}")]
    NotStrict(Vec<Diagnostic>),
    #[error("T1 is undefined for broadcast edges")]
    BroadcastEdge,
    #[error("action effect unavailable: {0}")]
    Effect(#[from] crate::ratvas::EffectError),
}

/// Multiplicities of a broadcast-free pseudo-cycle inside one component.
#[derive(Debug, Clone)]
pub struct T1Witness {
    pub target: UEdgeId,
    pub comp: usize,
    pub multiplicities: Vec<(ActionId, Rat)>,
}

/// One inter-broadcast segment of a canonical cycle: start counts, action
/// multiplicities, and the process flow over the broadcast edges out of the
/// segment's component.
#[derive(Debug, Clone)]
pub struct SegmentWitness {
    pub comp: usize,
    pub start: Vec<(StateId, Rat)>,
    pub actions: Vec<(ActionId, Rat)>,
    pub broadcast_flows: Vec<(UEdgeId, Rat)>,
}

/// A canonical pseudo-cycle with exactly `r` broadcasts through the loop
/// components, as exact rational aggregates.
#[derive(Debug, Clone)]
pub struct T2Witness {
    pub target: UEdgeId,
    pub segments: Vec<SegmentWitness>,
}

fn effects_for_comp(
    u: &Unwinding,
    comp: usize,
) -> Result<BTreeMap<ActionId, ActionEffect>, ClassifyError> {
    let mut out = BTreeMap::new();
    for a in u.available_actions(comp) {
        out.insert(a, action_effect(&u.template, a, &u.components[comp].edges)?);
    }
    Ok(out)
}

/// Feasibility of a broadcast-free pseudo-cycle through `e` inside its
/// component: nonnegative action multiplicities with zero net displacement
/// and the target action used at least once. Soundness rests on loading (the
/// component can hold arbitrarily many processes in every state, so any
/// zero-sum action multiset executes from a loaded configuration); a real
/// broadcast-free cycle conversely satisfies the system with its own counts.
pub fn t1_witness(u: &Unwinding, e: UEdgeId) -> Result<Option<T1Witness>, ClassifyError> {
    let ue = &u.edges[e.0];
    let edge = &u.template.edges[ue.base.0];
    let EdgeLabel::Rendezvous { action, .. } = edge.label else {
        return Err(ClassifyError::BroadcastEdge);
    };
    let comp = ue.comp;
    let effects = effects_for_comp(u, comp)?;
    if !effects.contains_key(&action) {
        return Ok(None);
    }
    let mut sys = LinearSystem::new();
    let vars: BTreeMap<ActionId, VarId> = effects
        .keys()
        .map(|a| (*a, sys.var(format!("y_{}", u.template.actions[a.0].name))))
        .collect();
    for s in 0..u.template.dim() {
        let coeffs: Vec<(VarId, Rat)> = effects
            .iter()
            .map(|(a, eff)| (vars[a], rat(eff.vector[s])))
            .collect();
        sys.add_eq(coeffs, rat(0));
    }
    sys.require_at_least_one(vars[&action]);
    let Some(sol) = lp_feasible(&sys) else { return Ok(None) };
    let multiplicities: Vec<(ActionId, Rat)> = effects
        .keys()
        .map(|a| (*a, sol[vars[a].0].clone()))
        .collect();
    let w = T1Witness { target: e, comp, multiplicities };
    assert!(t1_residuals_ok(u, &w), "T1 witness must re-substitute to zero");
    Ok(Some(w))
}

/// Re-checks a T1 witness: zero net displacement, target used, all values
/// nonnegative.
pub fn t1_residuals_ok(u: &Unwinding, w: &T1Witness) -> bool {
    let Ok(effects) = effects_for_comp(u, w.comp) else { return false };
    let mut net = vec![Rat::from_integer(0.into()); u.template.dim()];
    for (a, y) in &w.multiplicities {
        if y.is_negative() {
            return false;
        }
        let Some(eff) = effects.get(a) else { return false };
        for (s, d) in eff.vector.iter().enumerate() {
            net[s] += y * rat(*d);
        }
    }
    let target_action = match u.template.edges[u.edges[w.target.0].base.0].label {
        EdgeLabel::Rendezvous { action, .. } => action,
        EdgeLabel::Broadcast => return false,
    };
    let used = w
        .multiplicities
        .iter()
        .any(|(a, y)| *a == target_action && *y >= rat(1));
    net.iter().all(|x| x == &rat(0)) && used
}

/// The segmented linear system behind T2, with handles to its variables.
struct T2System {
    sys: LinearSystem,
    v: Vec<BTreeMap<StateId, VarId>>,
    y: Vec<BTreeMap<ActionId, VarId>>,
    z: Vec<BTreeMap<UEdgeId, VarId>>,
}

fn build_t2_system(u: &Unwinding, target: UEdgeId) -> Result<Option<T2System>, ClassifyError> {
    let t = &u.template;
    let r = u.period;
    let n = u.prefix;
    let mut sys = LinearSystem::new();
    let mut v: Vec<BTreeMap<StateId, VarId>> = Vec::with_capacity(r);
    let mut w: Vec<BTreeMap<StateId, VarId>> = Vec::with_capacity(r);
    let mut y: Vec<BTreeMap<ActionId, VarId>> = Vec::with_capacity(r);
    let mut z: Vec<BTreeMap<UEdgeId, VarId>> = Vec::with_capacity(r);
    let mut effects = Vec::with_capacity(r);

    for j in 0..r {
        let comp = &u.components[n + j];
        let mut vj = BTreeMap::new();
        let mut wj = BTreeMap::new();
        for s in &comp.states {
            vj.insert(*s, sys.var(format!("v{}_{}", j, t.state_name(*s))));
            wj.insert(*s, sys.var(format!("w{}_{}", j, t.state_name(*s))));
        }
        let effs = effects_for_comp(u, n + j)?;
        let mut yj = BTreeMap::new();
        for a in effs.keys() {
            yj.insert(*a, sys.var(format!("y{}_{}", j, t.actions[a.0].name)));
        }
        let mut zj = BTreeMap::new();
        for ue in u.broadcast_edges_from_comp(n + j) {
            zj.insert(ue, sys.var(format!("z{}_{}", j, u.edge_display(ue))));
        }
        v.push(vj);
        w.push(wj);
        y.push(yj);
        z.push(zj);
        effects.push(effs);
    }


    for j in 0..r {
        let comp = &u.components[n + j];
        // (1) post-rendezvous counts: w = v + sum of action effects
        for s in &comp.states {
            let mut coeffs = vec![(w[j][s], rat(1)), (v[j][s], rat(-1))];
            for (a, eff) in &effects[j] {
                let c = eff.vector[s.0];
                if c != 0 {
                    coeffs.push((y[j][a], rat(-c)));
                }
            }
            sys.add_eq(coeffs, rat(0));
        }
        // (2) every process broadcasts: outflow per state equals w
        for s in &comp.states {
            let mut coeffs = vec![(w[j][s], rat(-1))];
            for (ue, var) in &z[j] {
                if t.edges[u.edges[ue.0].base.0].src == *s {
                    coeffs.push((*var, rat(1)));
                }
            }
            sys.add_eq(coeffs, rat(0));
        }
        // (3) the next segment starts on the broadcast targets
        let jn = (j + 1) % r;
        let next_comp = &u.components[n + jn];
        for s in &next_comp.states {
            let mut coeffs = vec![(v[jn][s], rat(1))];
            for (ue, var) in &z[j] {
                if t.edges[u.edges[ue.0].base.0].dst == *s {
                    coeffs.push((*var, rat(-1)));
                }
            }
            sys.add_eq(coeffs, rat(0));
        }
    }

    // (4) the target edge is used in its own segment
    let ue = &u.edges[target.0];
    let j = ue.comp - n;
    match t.edges[ue.base.0].label {
        EdgeLabel::Rendezvous { action, .. } => {
            let Some(var) = y[j].get(&action) else { return Ok(None) };
            sys.require_at_least_one(*var);
        }
        EdgeLabel::Broadcast => {
            let Some(var) = z[j].get(&target) else { return Ok(None) };
            sys.require_at_least_one(*var);
        }
    }
    Ok(Some(T2System { sys, v, y, z }))
}

/// The support-pruning loop: repeatedly take the maximal support, compute the
/// per-segment activation fixpoint (states with start mass activate actions
/// whose letter sources are all active, which activate their destinations),
/// and pin to zero every supported action that stays unfireable. Terminates
/// because the support strictly shrinks.
fn prune_support(u: &Unwinding, t2: &mut T2System) -> Option<Vec<Rat>> {
    let t = &u.template;
    loop {
        let (sol, support) = max_support_solution(&t2.sys)?;
        let mut pinned = false;
        for j in 0..t2.v.len() {
            let mut active: BTreeSet<StateId> = t2.v[j]
                .iter()
                .filter(|(_, var)| support.contains(var))
                .map(|(s, _)| *s)
                .collect();
            let supported: Vec<ActionId> = t2.y[j]
                .iter()
                .filter(|(_, var)| support.contains(var))
                .map(|(a, _)| *a)
                .collect();
            let mut fireable: BTreeSet<ActionId> = BTreeSet::new();
            loop {
                let mut grew = false;
                for a in &supported {
                    if fireable.contains(a) {
                        continue;
                    }
                    let srcs_active = (1..=t.k).all(|l| {
                        t.edges_with_letter(*a, l)
                            .find(|e| u.components[u.prefix + j].edges.contains(e))
                            .map(|e| active.contains(&t.edges[e.0].src))
                            .unwrap_or(false)
                    });
                    if srcs_active {
                        fireable.insert(*a);
                        for l in 1..=t.k {
                            for e in t.edges_with_letter(*a, l) {
                                if u.components[u.prefix + j].edges.contains(&e) {
                                    active.insert(t.edges[e.0].dst);
                                }
                            }
                        }
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
            }
            for a in &supported {
                if !fireable.contains(a) {
                    t2.sys.pin_zero(t2.y[j][a]);
                    pinned = true;
                }
            }
        }
        if !pinned {
            return Some(sol);
        }
    }
}

/// Feasibility of a canonical pseudo-cycle with exactly `r` broadcasts,
/// starting in the first loop component, through the given edge. Prefix
/// edges never qualify.
pub fn t2_witness(u: &Unwinding, e: UEdgeId) -> Result<Option<T2Witness>, ClassifyError> {
    let ue = &u.edges[e.0];
    if u.is_prefix_comp(ue.comp) {
        return Ok(None);
    }
    let Some(mut t2) = build_t2_system(u, e)? else {
        return Ok(None);
    };
    let Some(sol) = prune_support(u, &mut t2) else {
        return Ok(None);
    };
    let segments = (0..t2.v.len())
        .map(|j| SegmentWitness {
            comp: u.prefix + j,
            start: t2.v[j].iter().map(|(s, var)| (*s, sol[var.0].clone())).collect(),
            actions: t2.y[j].iter().map(|(a, var)| (*a, sol[var.0].clone())).collect(),
            broadcast_flows: t2.z[j]
                .iter()
                .map(|(ue, var)| (*ue, sol[var.0].clone()))
                .collect(),
        })
        .collect();
    let w = T2Witness { target: e, segments };
    assert!(t2_residuals_ok(u, &w), "T2 witness must re-substitute to zero");
    Ok(Some(w))
}

/// Re-checks a T2 witness against all segment constraints.
pub fn t2_residuals_ok(u: &Unwinding, w: &T2Witness) -> bool {
    let t = &u.template;
    let r = u.period;
    if w.segments.len() != r {
        return false;
    }
    for j in 0..r {
        let seg = &w.segments[j];
        let next = &w.segments[(j + 1) % r];
        let Ok(effects) = effects_for_comp(u, seg.comp) else { return false };
        if seg.start.iter().any(|(_, x)| x.is_negative())
            || seg.actions.iter().any(|(_, x)| x.is_negative())
            || seg.broadcast_flows.iter().any(|(_, x)| x.is_negative())
        {
            return false;
        }
        // post-rendezvous counts and broadcast outflow per state
        for (s, v_s) in &seg.start {
            let mut w_s = v_s.clone();
            for (a, y_a) in &seg.actions {
                if let Some(eff) = effects.get(a) {
                    w_s += y_a * rat(eff.vector[s.0]);
                }
            }
            if w_s.is_negative() {
                return false;
            }
            let outflow: Rat = seg
                .broadcast_flows
                .iter()
                .filter(|(ue, _)| t.edges[u.edges[ue.0].base.0].src == *s)
                .map(|(_, z)| z.clone())
                .sum();
            if outflow != w_s {
                return false;
            }
        }
        // the next segment starts exactly on the broadcast targets
        for (s, v_s) in &next.start {
            let inflow: Rat = seg
                .broadcast_flows
                .iter()
                .filter(|(ue, _)| t.edges[u.edges[ue.0].base.0].dst == *s)
                .map(|(_, z)| z.clone())
                .sum();
            if inflow != *v_s {
                return false;
            }
        }
    }
    // target multiplicity
    let ue = &u.edges[w.target.0];
    let j = ue.comp - u.prefix;
    match t.edges[ue.base.0].label {
        EdgeLabel::Rendezvous { action, .. } => w.segments[j]
            .actions
            .iter()
            .any(|(a, y)| *a == action && *y >= rat(1)),
        EdgeLabel::Broadcast => w.segments[j]
            .broadcast_flows
            .iter()
            .any(|(ue2, z)| *ue2 == w.target && *z >= rat(1)),
    }
}

/// Per-edge classification results, indexed by unwinding edge.
#[derive(Debug, Clone)]
pub struct Classification {
    pub entries: Vec<ClassEntry>,
}

#[derive(Debug, Clone)]
pub struct ClassEntry {
    pub color: EdgeColor,
    pub t1: Option<T1Witness>,
    pub t2: Option<T2Witness>,
}

impl Classification {
    pub fn color_of(&self, e: UEdgeId) -> EdgeColor {
        self.entries[e.0].color
    }

    pub fn to_json(&self, u: &Unwinding) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (i, entry) in self.entries.iter().enumerate() {
            let id = u.edge_display(UEdgeId(i));
            let witness = if entry.t1.is_none() && entry.t2.is_none() {
                serde_json::Value::Null
            } else {
                json!({
                    "t1": entry.t1.as_ref().map(|w| t1_witness_json(u, w)),
                    "t2": entry.t2.as_ref().map(|w| t2_witness_json(u, w)),
                })
            };
            map.insert(
                id,
                json!({
                    "color": entry.color.name(),
                    "t1": entry.t1.is_some(),
                    "t2": entry.t2.is_some(),
                    "witness": witness,
                }),
            );
        }
        serde_json::Value::Object(map)
    }

    pub fn to_dot(&self, u: &Unwinding) -> String {
        let t = &u.template;
        let mut out = String::from("digraph classified {\n  rankdir=LR;\n");
        for c in &u.components {
            out.push_str(&format!(
                "  subgraph cluster_{} {{\n    label=\"P{}\";\n",
                c.index, c.index
            ));
            for s in &c.states {
                out.push_str(&format!(
                    "    \"{}@{}\";\n",
                    t.state_name(*s),
                    c.index
                ));
            }
            out.push_str("  }\n");
        }
        for (i, ue) in u.edges.iter().enumerate() {
            let e = &t.edges[ue.base.0];
            let style = if e.label.is_broadcast() { ", style=dashed" } else { "" };
            out.push_str(&format!(
                "  \"{}@{}\" -> \"{}@{}\" [label=\"{}\", color={}{}];\n",
                t.state_name(e.src),
                ue.comp,
                t.state_name(e.dst),
                ue.to_comp,
                t.letter_display(&e.label),
                self.entries[i].color.name(),
                style
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn t1_witness_json(u: &Unwinding, w: &T1Witness) -> serde_json::Value {
    json!({
        "kind": "t1",
        "comp": w.comp,
        "multiplicities": w.multiplicities.iter()
            .map(|(a, y)| (u.template.actions[a.0].name.clone(), y.to_string()))
            .collect::<BTreeMap<_, _>>(),
    })
}

fn t2_witness_json(u: &Unwinding, w: &T2Witness) -> serde_json::Value {
    json!({
        "kind": "t2",
        "segments": w.segments.iter().map(|seg| json!({
            "comp": seg.comp,
            "start": seg.start.iter()
                .map(|(s, x)| (u.template.state_name(*s).to_string(), x.to_string()))
                .collect::<BTreeMap<_, _>>(),
            "actions": seg.actions.iter()
                .map(|(a, y)| (u.template.actions[a.0].name.clone(), y.to_string()))
                .collect::<BTreeMap<_, _>>(),
            "broadcast_flows": seg.broadcast_flows.iter()
                .map(|(ue, z)| (u.edge_display(*ue), z.to_string()))
                .collect::<BTreeMap<_, _>>(),
        })).collect::<Vec<_>>(),
    })
}

/// Classifies every unwinding edge. Green = broadcast-free and canonical
/// witnesses both exist (the zero-sum T1 multiset injects into the matching
/// T2 segment, giving the nested cycle); blue = broadcast-free only; orange =
/// canonical only; red = neither. Broadcast edges take T1 as false.
pub fn classify(u: &Unwinding) -> Result<Classification, ClassifyError> {
    let diags = u.template.validate(true);
    if diags.iter().any(|d| d.rule == "duplicate-letter-edge") {
        return Err(ClassifyError::NotStrict(diags));
    }
    let entries: Result<Vec<ClassEntry>, ClassifyError> = (0..u.edges.len())
        .into_par_iter()
        .map(|i| {
            let e = UEdgeId(i);
            let is_broadcast = u.template.edges[u.edges[i].base.0].label.is_broadcast();
            let t1 = if is_broadcast { None } else { t1_witness(u, e)? };
            let t2 = t2_witness(u, e)?;
            let color = match (&t1, &t2) {
                (Some(_), Some(_)) => EdgeColor::Green,
                (Some(_), None) => EdgeColor::Blue,
                (None, Some(_)) => EdgeColor::Orange,
                (None, None) => EdgeColor::Red,
            };
            Ok(ClassEntry { color, t1, t2 })
        })
        .collect();
    let entries = entries?;
    // structural sanity: broadcast edges are never blue or green; prefix
    // edges never green or orange
    for (i, entry) in entries.iter().enumerate() {
        let ue = &u.edges[i];
        if u.template.edges[ue.base.0].label.is_broadcast() {
            assert!(!matches!(entry.color, EdgeColor::Blue | EdgeColor::Green));
        }
        if u.is_prefix_comp(ue.comp) {
            assert!(!matches!(entry.color, EdgeColor::Green | EdgeColor::Orange));
        }
    }
    Ok(Classification { entries })
}

#[derive(Debug, Error)]
pub enum RealizeError {
    #[error("witness values do not fit the scaling range")]
    ScaleOverflow,
    #[error("greedy scheduling stalled in segment {segment} even at scale {scale}: {detail}")]
    Stalled { segment: usize, scale: u64, detail: String },
}

/// Turns a T1 witness into an explicit broadcast-free pseudo-cycle of the
/// unwinding instance: scale to integers, give every firing its own k
/// processes at the letter sources, and fire in declaration order. The
/// endpoints are twins because the multiset of displacements sums to zero.
pub fn realize_t1(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    w: &T1Witness,
) -> Result<Run, RealizeError> {
    let t = &u.template;
    let values: Vec<Rat> = w.multiplicities.iter().map(|(_, y)| y.clone()).collect();
    let counts = integer_scale_u64(&values).ok_or(RealizeError::ScaleOverflow)?;

    // dedicated processes per firing
    let mut next_pid: Pid = 1;
    let mut assignment: BTreeMap<Pid, StateId> = BTreeMap::new();
    let mut firings: Vec<(ActionId, Vec<(Pid, StateId, StateId)>)> = Vec::new();
    for (i, (a, _)) in w.multiplicities.iter().enumerate() {
        let reps = counts[&VarId(i)];
        for _ in 0..reps {
            let mut participants = Vec::with_capacity(t.k);
            for l in 1..=t.k {
                let e = t
                    .edges_with_letter(*a, l)
                    .find(|e| u.components[w.comp].edges.contains(e))
                    .expect("witness actions are available in the component");
                let src = ut.state_index[&(t.edges[e.0].src, w.comp)];
                let dst = ut.state_index[&(t.edges[e.0].dst, w.comp)];
                assignment.insert(next_pid, src);
                participants.push((next_pid, src, dst));
                next_pid += 1;
            }
            firings.push((*a, participants));
        }
    }
    let start = Configuration::new(assignment, ut.template.dim());
    let mut cur = start.clone();
    let mut steps = Vec::new();
    for (a, participants) in firings {
        let mut moves = BTreeMap::new();
        for (pid, _, dst) in &participants {
            moves.insert(*pid, *dst);
        }
        let dst_cfg = cur.with_moves(&moves);
        steps.push(GlobalTransition {
            src: cur.clone(),
            label: TransitionLabel::Rendezvous {
                action: a,
                participants: participants.iter().map(|(p, _, _)| *p).collect(),
            },
            dst: dst_cfg.clone(),
        });
        cur = dst_cfg;
    }
    let run = Run::new(start, steps).expect("firings chain by construction");
    assert!(is_pseudo_cycle(&run));
    Ok(run)
}

/// Turns a T2 witness into an explicit pseudo-cycle with exactly `r`
/// broadcasts: scale to integers, schedule each segment greedily in
/// fireability order (declaration order breaks ties), then route the
/// broadcast per the flow values. On a stall the scale doubles, up to a cap.
pub fn realize_t2(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    w: &T2Witness,
) -> Result<Run, RealizeError> {
    let t = &u.template;
    // order: per segment: v values, y values, z values
    let mut values: Vec<Rat> = Vec::new();
    for seg in &w.segments {
        values.extend(seg.start.iter().map(|(_, x)| x.clone()));
        values.extend(seg.actions.iter().map(|(_, x)| x.clone()));
        values.extend(seg.broadcast_flows.iter().map(|(_, x)| x.clone()));
    }
    let base = integer_scale_u64(&values).ok_or(RealizeError::ScaleOverflow)?;
    let base: Vec<u64> = (0..values.len()).map(|i| base[&VarId(i)]).collect();

    'scales: for scale_pow in 0..=10u32 {
        let scale = 1u64 << scale_pow;
        let scaled: Vec<u64> = base.iter().map(|v| v * scale).collect();
        let mut idx = 0usize;
        let mut segs: Vec<(Vec<(StateId, u64)>, Vec<(ActionId, u64)>, Vec<(UEdgeId, u64)>)> =
            Vec::new();
        for seg in &w.segments {
            let sv: Vec<(StateId, u64)> = seg
                .start
                .iter()
                .map(|(s, _)| {
                    let v = scaled[idx];
                    idx += 1;
                    (*s, v)
                })
                .collect();
            let sy: Vec<(ActionId, u64)> = seg
                .actions
                .iter()
                .map(|(a, _)| {
                    let v = scaled[idx];
                    idx += 1;
                    (*a, v)
                })
                .collect();
            let sz: Vec<(UEdgeId, u64)> = seg
                .broadcast_flows
                .iter()
                .map(|(e, _)| {
                    let v = scaled[idx];
                    idx += 1;
                    (*e, v)
                })
                .collect();
            segs.push((sv, sy, sz));
        }

        // initial configuration: the first segment's start counts
        let mut next_pid: Pid = 1;
        let mut assignment: BTreeMap<Pid, StateId> = BTreeMap::new();
        for (s, c) in &segs[0].0 {
            let annotated = ut.state_index[&(*s, w.segments[0].comp)];
            for _ in 0..*c {
                assignment.insert(next_pid, annotated);
                next_pid += 1;
            }
        }
        if assignment.is_empty() {
            return Err(RealizeError::Stalled {
                segment: 0,
                scale,
                detail: "witness carries no processes".into(),
            });
        }
        let start = Configuration::new(assignment, ut.template.dim());
        let mut cur = start.clone();
        let mut steps: Vec<GlobalTransition> = Vec::new();

        for (j, (sv, sy, sz)) in segs.iter().enumerate() {
            let comp = w.segments[j].comp;
            let _ = sv;
            let mut remaining: Vec<(ActionId, u64)> = sy.clone();
            loop {
                if remaining.iter().all(|(_, c)| *c == 0) {
                    break;
                }
                // first action (declaration order) whose letter sources are
                // covered by distinct processes
                let mut fired = false;
                for (a, left) in remaining.iter_mut() {
                    if *left == 0 {
                        continue;
                    }
                    let mut demand: BTreeMap<StateId, u32> = BTreeMap::new();
                    let mut letter_edges = Vec::with_capacity(t.k);
                    for l in 1..=t.k {
                        let e = t
                            .edges_with_letter(*a, l)
                            .find(|e| u.components[comp].edges.contains(e))
                            .expect("witness actions are available");
                        let src = ut.state_index[&(t.edges[e.0].src, comp)];
                        let dst = ut.state_index[&(t.edges[e.0].dst, comp)];
                        *demand.entry(src).or_insert(0) += 1;
                        letter_edges.push((src, dst));
                    }
                    let ok = demand
                        .iter()
                        .all(|(s, d)| cur.counts()[s.0] >= *d);
                    if !ok {
                        continue;
                    }
                    let mut used: BTreeSet<Pid> = BTreeSet::new();
                    let mut participants = Vec::with_capacity(t.k);
                    let mut moves = BTreeMap::new();
                    for (src, dst) in &letter_edges {
                        let pid = cur
                            .pids_at(*src)
                            .into_iter()
                            .find(|p| !used.contains(p))
                            .unwrap();
                        used.insert(pid);
                        participants.push(pid);
                        moves.insert(pid, *dst);
                    }
                    let dst_cfg = cur.with_moves(&moves);
                    steps.push(GlobalTransition {
                        src: cur.clone(),
                        label: TransitionLabel::Rendezvous { action: *a, participants },
                        dst: dst_cfg.clone(),
                    });
                    cur = dst_cfg;
                    *left -= 1;
                    fired = true;
                    break;
                }
                if !fired {
                    if scale_pow == 10 {
                        return Err(RealizeError::Stalled {
                            segment: j,
                            scale,
                            detail: format!(
                                "remaining multiplicities {:?} with counts {:?}",
                                remaining,
                                cur.counts()
                            ),
                        });
                    }
                    continue 'scales;
                }
            }
            // broadcast step routing processes along the flow values
            if !sz.is_empty() {
                let mut moves = BTreeMap::new();
                let mut cursor: BTreeMap<StateId, Vec<Pid>> = BTreeMap::new();
                for (ue, flow) in sz {
                    if *flow == 0 {
                        continue;
                    }
                    let base_edge = &t.edges[u.edges[ue.0].base.0];
                    let src = ut.state_index[&(base_edge.src, comp)];
                    let dst = ut.state_index[&(base_edge.dst, u.edges[ue.0].to_comp)];
                    let avail = cursor.entry(src).or_insert_with(|| cur.pids_at(src));
                    for _ in 0..*flow {
                        let pid = avail.remove(0);
                        moves.insert(pid, dst);
                    }
                }
                let dst_cfg = cur.with_moves(&moves);
                steps.push(GlobalTransition {
                    src: cur.clone(),
                    label: TransitionLabel::Broadcast,
                    dst: dst_cfg.clone(),
                });
                cur = dst_cfg;
            }
        }
        let run = Run::new(start, steps).expect("schedule chains by construction");
        assert!(is_pseudo_cycle(&run), "T2 realization must close on twins");
        return Ok(run);
    }
    unreachable!("loop returns or stalls at the cap")
}
