//! The reachability-unwinding of a template: alternate edge saturation and
//! unrolling on broadcast edges until a component repeats, then close the
//! lasso. Runs of any instance lift into the unwinding and project back, so
//! the finite template can stand in for the whole parameterized family.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;
use thiserror::Error;

use crate::model::{
    ActionId, Configuration, Edge, EdgeId, EdgeLabel, ProcessTemplate, Run, StateId,
    TransitionLabel,
};

/// One saturated copy of the base template: the rendezvous edges that remain
/// usable when the processes enter it through `init`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub index: usize,
    pub init: BTreeSet<StateId>,
    pub states: BTreeSet<StateId>,
    /// Base rendezvous edges kept by saturation.
    pub edges: BTreeSet<EdgeId>,
}

/// An edge of the unwinding: a base edge annotated with its source component
/// (and target component, for broadcast edges).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UEdge {
    pub comp: usize,
    pub base: EdgeId,
    pub to_comp: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UEdgeId(pub usize);

#[derive(Debug, Clone)]
pub struct Unwinding {
    pub template: ProcessTemplate,
    pub components: Vec<Component>,
    /// Prefix length `n`: components `0..n` are visited once.
    pub prefix: usize,
    /// Period `r >= 1`: components `n..n+r` repeat forever.
    pub period: usize,
    /// All unwinding edges; per component, rendezvous edges first, each group
    /// in base declaration order.
    pub edges: Vec<UEdge>,
}

#[derive(Debug, Error)]
pub enum UnwindingError {
    #[error("step {step} cannot be lifted: {detail}")]
    LiftFailed { step: usize, detail: String },
    #[error("unknown unwinding edge id `{0}`")]
    UnknownEdge(String),
}

/// Least fixed point of the edge-saturation rule: starting from `init`, an
/// edge is kept when its source is reachable and every partner letter of its
/// action has some edge sourced in the reachable set.
pub fn saturate(t: &ProcessTemplate, index: usize, init: &BTreeSet<StateId>) -> Component {
    let mut states = init.clone();
    let mut edges: BTreeSet<EdgeId> = BTreeSet::new();
    loop {
        let mut changed = false;
        for (i, e) in t.edges.iter().enumerate() {
            let id = EdgeId(i);
            let EdgeLabel::Rendezvous { action, .. } = e.label else { continue };
            if edges.contains(&id) || !states.contains(&e.src) {
                continue;
            }
            let all_letters = (1..=t.k).all(|l| {
                t.edges_with_letter(action, l)
                    .any(|f| states.contains(&t.edges[f.0].src))
            });
            if all_letters {
                edges.insert(id);
                states.insert(e.dst);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Component { index, init: init.clone(), states, edges }
}

/// States reachable from `states` by one broadcast edge.
fn broadcast_successors(t: &ProcessTemplate, states: &BTreeSet<StateId>) -> BTreeSet<StateId> {
    t.edges
        .iter()
        .filter(|e| e.label.is_broadcast() && states.contains(&e.src))
        .map(|e| e.dst)
        .collect()
}

/// Builds the full unwinding. Components are functions of their init sets, so
/// lasso detection compares init sets against every previous component;
/// termination within `2^|S|` iterations is guaranteed.
pub fn build_unwinding(t: &ProcessTemplate) -> Unwinding {
    let mut components: Vec<Component> = Vec::new();
    let mut inits: Vec<BTreeSet<StateId>> = vec![t.init.clone()];
    let (prefix, period) = loop {
        let i = components.len();
        components.push(saturate(t, i, &inits[i]));
        let next = broadcast_successors(t, &components[i].states);
        if let Some(j) = inits.iter().position(|prev| *prev == next) {
            break (j, i + 1 - j);
        }
        inits.push(next);
    };
    let m = components.len() - 1;

    let mut edges = Vec::new();
    for comp in &components {
        for base in &comp.edges {
            edges.push(UEdge { comp: comp.index, base: *base, to_comp: comp.index });
        }
        let to_comp = if comp.index < m { comp.index + 1 } else { prefix };
        for (i, e) in t.edges.iter().enumerate() {
            if e.label.is_broadcast() && comp.states.contains(&e.src) {
                edges.push(UEdge { comp: comp.index, base: EdgeId(i), to_comp });
            }
        }
    }
    Unwinding { template: t.clone(), components, prefix, period, edges }
}

impl Unwinding {
    pub fn last_component(&self) -> usize {
        self.components.len() - 1
    }

    /// The component reached after `i` broadcasts.
    pub fn comp(&self, i: usize) -> usize {
        if i < self.prefix {
            i
        } else {
            self.prefix + (i - self.prefix) % self.period
        }
    }

    pub fn is_prefix_comp(&self, c: usize) -> bool {
        c < self.prefix
    }

    /// Stable textual id of an unwinding edge: `src:letter:dst@compI`.
    pub fn edge_display(&self, e: UEdgeId) -> String {
        let ue = &self.edges[e.0];
        format!("{}@comp{}", self.template.edge_display(ue.base), ue.comp)
    }

    pub fn parse_edge_ref(&self, text: &str) -> Result<UEdgeId, UnwindingError> {
        let Some((base_part, comp_part)) = text.rsplit_once("@comp") else {
            return Err(UnwindingError::UnknownEdge(text.to_string()));
        };
        let comp: usize = comp_part
            .parse()
            .map_err(|_| UnwindingError::UnknownEdge(text.to_string()))?;
        let base = crate::parse::parse_edge_ref(&self.template, base_part)
            .ok_or_else(|| UnwindingError::UnknownEdge(text.to_string()))?;
        self.edges
            .iter()
            .position(|ue| ue.base == base && ue.comp == comp)
            .map(UEdgeId)
            .ok_or_else(|| UnwindingError::UnknownEdge(text.to_string()))
    }

    /// Actions whose letters are all present in component `c`.
    pub fn available_actions(&self, c: usize) -> Vec<ActionId> {
        let comp = &self.components[c];
        (0..self.template.actions.len())
            .map(ActionId)
            .filter(|a| {
                (1..=self.template.k).all(|l| {
                    self.template
                        .edges_with_letter(*a, l)
                        .any(|e| comp.edges.contains(&e))
                })
            })
            .collect()
    }

    /// Broadcast unwinding edges leaving component `c`.
    pub fn broadcast_edges_from_comp(&self, c: usize) -> Vec<UEdgeId> {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, ue)| {
                (ue.comp == c && self.template.edges[ue.base.0].label.is_broadcast())
                    .then_some(UEdgeId(i))
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let t = &self.template;
        json!({
            "n": self.prefix,
            "r": self.period,
            "m": self.last_component(),
            "components": self.components.iter().map(|c| json!({
                "index": c.index,
                "init": c.init.iter().map(|s| t.state_name(*s)).collect::<Vec<_>>(),
                "states": c.states.iter().map(|s| t.state_name(*s)).collect::<Vec<_>>(),
                "edges": c.edges.iter().map(|e| format!("{}@comp{}", t.edge_display(*e), c.index)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "broadcast_edges": self.edges.iter().filter(|ue| t.edges[ue.base.0].label.is_broadcast()).map(|ue| json!({
                "id": format!("{}@comp{}", t.edge_display(ue.base), ue.comp),
                "to_comp": ue.to_comp,
            })).collect::<Vec<_>>(),
        })
    }

    /// DOT rendering: one cluster per component, broadcast edges dashed.
    pub fn to_dot(&self) -> String {
        let t = &self.template;
        let mut out = String::from("digraph unwinding {\n  rankdir=LR;\n");
        for c in &self.components {
            out.push_str(&format!("  subgraph cluster_{} {{\n    label=\"P{}\";\n", c.index, c.index));
            for s in &c.states {
                let shape = if c.init.contains(s) { "doublecircle" } else { "circle" };
                out.push_str(&format!(
                    "    \"{}@{}\" [label=\"{}\", shape={}];\n",
                    t.state_name(*s),
                    c.index,
                    t.state_name(*s),
                    shape
                ));
            }
            out.push_str("  }\n");
        }
        for ue in &self.edges {
            let e = &t.edges[ue.base.0];
            let style = if e.label.is_broadcast() { ", style=dashed" } else { "" };
            out.push_str(&format!(
                "  \"{}@{}\" -> \"{}@{}\" [label=\"{}\"{}];\n",
                t.state_name(e.src),
                ue.comp,
                t.state_name(e.dst),
                ue.to_comp,
                t.letter_display(&e.label),
                style
            ));
        }
        out.push_str("}\n");
        out
    }

    /// The unwinding viewed as a process template of its own, with states
    /// annotated by component. Instances of it run the lifted semantics.
    pub fn to_template(&self) -> UnwindingTemplate {
        let t = &self.template;
        let mut states = Vec::new();
        let mut state_info = Vec::new();
        let mut state_index: BTreeMap<(StateId, usize), StateId> = BTreeMap::new();
        for c in &self.components {
            for s in &c.states {
                let id = StateId(states.len());
                states.push(format!("{}@{}", t.state_name(*s), c.index));
                state_info.push((*s, c.index));
                state_index.insert((*s, c.index), id);
            }
        }
        let init = self.components[0]
            .init
            .iter()
            .map(|s| state_index[&(*s, 0)])
            .collect();
        let mut edges = Vec::new();
        let mut edge_uidx = Vec::new();
        for (i, ue) in self.edges.iter().enumerate() {
            let e = &t.edges[ue.base.0];
            edges.push(Edge {
                src: state_index[&(e.src, ue.comp)],
                label: e.label,
                dst: state_index[&(e.dst, ue.to_comp)],
            });
            edge_uidx.push(UEdgeId(i));
        }
        let template = ProcessTemplate {
            k: t.k,
            states,
            init,
            actions: t.actions.clone(),
            edges,
            r_only: t.r_only,
        };
        UnwindingTemplate {
            template,
            state_info,
            state_index,
            edge_uidx,
        }
    }
}

/// The annotated template together with the maps back to the unwinding.
#[derive(Debug, Clone)]
pub struct UnwindingTemplate {
    pub template: ProcessTemplate,
    /// Annotated state id -> (base state, component).
    pub state_info: Vec<(StateId, usize)>,
    pub state_index: BTreeMap<(StateId, usize), StateId>,
    /// Annotated edge id -> unwinding edge id (indices align 1:1).
    pub edge_uidx: Vec<UEdgeId>,
}

impl UnwindingTemplate {
    pub fn base_state(&self, s: StateId) -> StateId {
        self.state_info[s.0].0
    }

    pub fn comp_of_state(&self, s: StateId) -> usize {
        self.state_info[s.0].1
    }

    /// Base edge of an annotated edge.
    pub fn base_edge(&self, u: &Unwinding, e: EdgeId) -> EdgeId {
        u.edges[self.edge_uidx[e.0].0].base
    }
}

/// Annotates a run of the base instance with component numbers (the count of
/// broadcasts so far). Fails when the path uses an edge that saturation
/// pruned, which can happen only for paths that are not genuine runs.
pub fn lift_run(u: &Unwinding, ut: &UnwindingTemplate, run: &Run) -> Result<Run, UnwindingError> {
    let t = &u.template;
    let lift_config = |f: &Configuration, comp: usize, step: usize| -> Result<Configuration, UnwindingError> {
        let mut assignment = BTreeMap::new();
        for (p, s) in f.assignment() {
            let Some(id) = ut.state_index.get(&(*s, comp)) else {
                return Err(UnwindingError::LiftFailed {
                    step,
                    detail: format!(
                        "state {} is not part of component {}",
                        t.state_name(*s),
                        comp
                    ),
                });
            };
            assignment.insert(*p, *id);
        }
        Ok(Configuration::new(assignment, ut.template.dim()))
    };

    let mut comp = 0usize;
    let mut broadcasts = 0usize;
    let start = lift_config(&run.start, comp, 0)?;
    let mut cur = start.clone();
    let mut steps = Vec::with_capacity(run.len());
    for (i, step) in run.steps.iter().enumerate() {
        let next_comp = match &step.label {
            TransitionLabel::Broadcast => {
                broadcasts += 1;
                u.comp(broadcasts)
            }
            TransitionLabel::Rendezvous { action, participants } => {
                // every participant's base edge must have survived saturation
                for (j, p) in participants.iter().enumerate() {
                    let src = step.src.state_of(*p).unwrap();
                    let dst = step.dst.state_of(*p).unwrap();
                    let label = EdgeLabel::Rendezvous { action: *action, index: j + 1 };
                    let base = t.edge_id(src, label, dst).ok_or_else(|| {
                        UnwindingError::LiftFailed {
                            step: i,
                            detail: "no such base edge".to_string(),
                        }
                    })?;
                    if !u.components[comp].edges.contains(&base) {
                        return Err(UnwindingError::LiftFailed {
                            step: i,
                            detail: format!(
                                "edge {} was pruned from component {}",
                                t.edge_display(base),
                                comp
                            ),
                        });
                    }
                }
                comp
            }
        };
        let dst = lift_config(&step.dst, next_comp, i)?;
        let label = step.label.clone();
        steps.push(crate::model::GlobalTransition { src: cur.clone(), label, dst: dst.clone() });
        cur = dst;
        comp = next_comp;
    }
    Run::new(start, steps).map_err(|e| UnwindingError::LiftFailed { step: 0, detail: e.to_string() })
}

/// Strips the component annotations off a run of the unwinding instance.
pub fn project_run_circ(u: &Unwinding, ut: &UnwindingTemplate, run: &Run) -> Run {
    let dim = u.template.dim();
    let strip = |f: &Configuration| -> Configuration {
        let assignment = f
            .assignment()
            .iter()
            .map(|(p, s)| (*p, ut.base_state(*s)))
            .collect();
        Configuration::new(assignment, dim)
    };
    let start = strip(&run.start);
    let steps = run
        .steps
        .iter()
        .map(|s| crate::model::GlobalTransition {
            src: strip(&s.src),
            label: s.label.clone(),
            dst: strip(&s.dst),
        })
        .collect();
    Run { start, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::model::successors;

    #[test]
    fn saturate_not_regular_from_p() {
        let t = corpus::fig_not_regular();
        let init: BTreeSet<StateId> = [t.state_id("p").unwrap()].into();
        let c = saturate(&t, 0, &init);
        let names: Vec<&str> = c.states.iter().map(|s| t.state_name(*s)).collect();
        assert_eq!(names, vec!["p", "q"]);
        let edges: Vec<String> = c.edges.iter().map(|e| t.edge_display(*e)).collect();
        assert_eq!(edges, vec!["p:a.1:p", "p:a.2:q"]);
    }

    #[test]
    fn saturate_three_state_from_p_and_r() {
        let t = corpus::fig_three_state();
        let c = saturate(&t, 0, &t.init.clone());
        assert_eq!(c.states.len(), 3);
        assert_eq!(c.edges.len(), 4);
    }

    #[test]
    fn saturate_three_state_from_q_only_is_stuck() {
        let t = corpus::fig_three_state();
        let init: BTreeSet<StateId> = [t.state_id("q").unwrap()].into();
        let c = saturate(&t, 0, &init);
        assert_eq!(c.states, init);
        assert!(c.edges.is_empty());
    }

    #[test]
    fn unwinding_of_not_regular_is_a_self_loop() {
        let t = corpus::fig_not_regular();
        let u = build_unwinding(&t);
        assert_eq!((u.prefix, u.period), (0, 1));
        assert_eq!(u.components.len(), 1);
        assert_eq!(u.components[0].states.len(), 2);
        let ids: Vec<String> = (0..u.edges.len())
            .map(|i| u.edge_display(UEdgeId(i)))
            .collect();
        assert_eq!(
            ids,
            vec![
                "p:a.1:p@comp0",
                "p:a.2:q@comp0",
                "p:b:p@comp0",
                "q:b:p@comp0",
            ]
        );
        assert!(u.edges.iter().all(|ue| ue.to_comp == 0));
    }

    #[test]
    fn unwinding_of_two_phase_strict_has_period_two() {
        let t = corpus::two_phase_strict();
        let u = build_unwinding(&t);
        assert_eq!((u.prefix, u.period), (0, 2));
        let c0: Vec<&str> = u.components[0].states.iter().map(|s| t.state_name(*s)).collect();
        let c1: Vec<&str> = u.components[1].states.iter().map(|s| t.state_name(*s)).collect();
        assert_eq!(c0, vec!["u"]);
        assert_eq!(c1, vec!["v"]);
    }

    #[test]
    fn unwinding_of_r_only_template_has_empty_loop() {
        let t = corpus::fig_three_state();
        let u = build_unwinding(&t);
        assert_eq!((u.prefix, u.period), (1, 1));
        assert!(u.components[1].states.is_empty());
        assert!(u.broadcast_edges_from_comp(0).is_empty());
    }

    #[test]
    fn comp_formula() {
        let t = corpus::fig_not_regular();
        let u = build_unwinding(&t);
        assert_eq!(u.comp(17), 0);
        let mut v = u.clone();
        v.prefix = 2;
        v.period = 3;
        assert_eq!(v.comp(1), 1);
        assert_eq!(v.comp(9), 3);
    }

    #[test]
    fn saturation_property_on_fixtures() {
        for (_, t) in corpus::fixtures() {
            let u = build_unwinding(&t);
            for c in &u.components {
                for e in &c.edges {
                    let EdgeLabel::Rendezvous { action, .. } = t.edges[e.0].label else {
                        unreachable!()
                    };
                    for l in 1..=t.k {
                        assert!(
                            t.edges_with_letter(action, l).any(|f| c.edges.contains(&f)),
                            "saturation property violated in component {}",
                            c.index
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn equal_inits_give_equal_components() {
        for (_, t) in corpus::fixtures() {
            let u = build_unwinding(&t);
            for a in &u.components {
                for b in &u.components {
                    if a.init == b.init {
                        assert_eq!(a.states, b.states);
                        assert_eq!(a.edges, b.edges);
                    }
                }
            }
        }
    }

    #[test]
    fn lift_and_project_round_trip() {
        let t = corpus::fig_not_regular();
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let p = t.state_id("p").unwrap();
        let f = Configuration::from_states(&[p, p], t.dim());
        let rdz = successors(&t, &f)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Rendezvous { .. }))
            .unwrap();
        let bc = successors(&t, &rdz.dst)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Broadcast))
            .unwrap();
        let run = Run::new(f, vec![rdz, bc]).unwrap();
        let lifted = lift_run(&u, &ut, &run).unwrap();
        // all annotations are component 0 here
        for s in lifted.start.assignment().values() {
            assert_eq!(ut.comp_of_state(*s), 0);
        }
        let back = project_run_circ(&u, &ut, &lifted);
        assert_eq!(back, run);
    }

    #[test]
    fn lift_of_empty_run_is_empty() {
        let t = corpus::fig_not_regular();
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let p = t.state_id("p").unwrap();
        let run = Run::new(Configuration::from_states(&[p], t.dim()), vec![]).unwrap();
        let lifted = lift_run(&u, &ut, &run).unwrap();
        assert!(lifted.is_empty());
    }

    #[test]
    fn lift_fails_on_pruned_edge() {
        // action e's edges live at v, which component 0 cannot reach without
        // a broadcast; a path using them from a v-configuration is not a run
        // and cannot be lifted at component 0
        let t = corpus::two_phase_strict();
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let v = t.state_id("v").unwrap();
        let f = Configuration::from_states(&[v, v], t.dim());
        let rdz = successors(&t, &f)
            .into_iter()
            .find(|s| matches!(s.label, TransitionLabel::Rendezvous { .. }))
            .unwrap();
        let path = Run::new(f, vec![rdz]).unwrap();
        assert!(matches!(
            lift_run(&u, &ut, &path),
            Err(UnwindingError::LiftFailed { .. })
        ));
    }

    #[test]
    fn edge_ref_round_trip() {
        let t = corpus::two_phase_strict();
        let u = build_unwinding(&t);
        for i in 0..u.edges.len() {
            let id = UEdgeId(i);
            let s = u.edge_display(id);
            assert_eq!(u.parse_edge_ref(&s).unwrap(), id);
        }
        assert!(u.parse_edge_ref("u:d.1:u@comp7").is_err());
        assert!(u.parse_edge_ref("nonsense").is_err());
    }

    #[test]
    fn json_export_shape() {
        let u = build_unwinding(&corpus::fig_not_regular());
        let v = u.to_json();
        assert_eq!(v["n"], 0);
        assert_eq!(v["r"], 1);
        assert_eq!(v["components"].as_array().unwrap().len(), 1);
        assert_eq!(v["broadcast_edges"].as_array().unwrap().len(), 2);
    }
}
