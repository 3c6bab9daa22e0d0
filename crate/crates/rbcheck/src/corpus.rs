//! Reference templates and seeded random generators used across the test
//! suites and the validation harnesses.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    successors, ActionId, Configuration, Edge, EdgeLabel, ProcessTemplate, RendezvousAction, Run,
    StateId, TransitionLabel,
};

/// Three-state R-template (k=2): action `a` with both letters from `p` to
/// `q`, action `c` cycling `q -> r -> p`. Initial states `p` and `r`.
pub fn fig_three_state() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb r_only\n\
         k 2\n\
         state p init\n\
         state q\n\
         state r init\n\
         edge p a.1 q\n\
         edge p a.2 q\n\
         edge q c.1 r\n\
         edge r c.2 p\n",
    )
    .expect("fixture parses")
}

/// Two-state RB-template (k=2) whose infinite-execution language is not
/// omega-regular: `a.1` loops on `p`, `a.2` moves `p` to `q`, broadcasts
/// return everything to `p`.
pub fn fig_not_regular() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state p init\n\
         state q\n\
         edge p a.1 p\n\
         edge p a.2 q\n\
         edge p b p\n\
         edge q b p\n",
    )
    .expect("fixture parses")
}

/// `fig_not_regular` with an extra rendezvous edge out of `q`, so a process
/// can leave `q` without a broadcast and take `a.2` twice in a row.
pub fn fig_not_regular_mutated() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state p init\n\
         state q\n\
         edge p a.1 p\n\
         edge q a.1 p\n\
         edge p a.2 q\n\
         edge p b p\n\
         edge q b p\n",
    )
    .expect("fixture parses")
}

/// Broadcasts alternate between two disjoint init sets, giving an unwinding
/// with prefix 0 and period 2.
pub fn two_phase() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state u init\n\
         state v\n\
         edge u d.1 u\n\
         edge u d.2 u\n\
         edge u b v\n\
         edge u b u\n\
         edge v b u\n\
         edge v b v\n",
    )
    .expect("fixture parses")
}

/// Strictly alternating two-phase fixture: `u` states only broadcast to `v`
/// and vice versa, so the unwinding genuinely cycles with period 2.
pub fn two_phase_strict() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state u init\n\
         state v\n\
         edge u d.1 u\n\
         edge u d.2 u\n\
         edge v e.1 v\n\
         edge v e.2 v\n\
         edge u b v\n\
         edge v b u\n",
    )
    .expect("fixture parses")
}

/// All rendezvous edges are self-loops and every state has a broadcast
/// self-loop: every edge sits on trivial pseudo-cycles of both kinds.
pub fn all_green() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state p init\n\
         edge p a.1 p\n\
         edge p a.2 p\n\
         edge p b p\n",
    )
    .expect("fixture parses")
}

/// A template with a rendezvous action that can fire at most once per
/// broadcast round and never again (drains its own supply), plus a state
/// only reachable through it; exercises red edges.
pub fn with_dead_end() -> ProcessTemplate {
    crate::parse::parse_template(
        "system rb\n\
         k 2\n\
         state p init\n\
         state q\n\
         state sink\n\
         edge p a.1 sink\n\
         edge p a.2 q\n\
         edge q c.1 q\n\
         edge q c.2 q\n\
         edge p b p\n\
         edge q b q\n\
         edge sink b sink\n",
    )
    .expect("fixture parses")
}

/// The single-clock timed fixture: one location, both letters of action `a`
/// loop and are guarded on the clock being exactly 1, resetting it.
pub fn timed_single_clock() -> &'static str {
    "system timed\n\
     k 2\n\
     clock x max 1\n\
     state q0 init\n\
     edge q0 a.1 q0 guard (eq 1 x) reset x\n\
     edge q0 a.2 q0 guard (eq 1 x) reset x\n"
}

/// The pseudo-cycle of the three-state fixture over four processes:
/// `(p,q,q,r) -c(3,4)-> (p,q,r,p) -c(2,3)-> (p,r,p,p) -a(3,4)-> (p,r,q,q)`.
pub fn reference_pseudo_cycle() -> Run {
    let t = fig_three_state();
    let (p, q, r) = (
        t.state_id("p").unwrap(),
        t.state_id("q").unwrap(),
        t.state_id("r").unwrap(),
    );
    let c = t.action_id("c").unwrap();
    let a = t.action_id("a").unwrap();
    let start = Configuration::from_states(&[p, q, q, r], t.dim());
    let plan: Vec<(ActionId, Vec<u64>)> =
        vec![(c, vec![3, 4]), (c, vec![2, 3]), (a, vec![3, 4])];
    let mut cur = start.clone();
    let mut steps = Vec::new();
    for (action, participants) in plan {
        let want = TransitionLabel::Rendezvous { action, participants };
        let step = successors(&t, &cur)
            .into_iter()
            .find(|s| s.label == want)
            .expect("reference step enabled");
        cur = step.dst.clone();
        steps.push(step);
    }
    Run::new(start, steps).unwrap()
}

/// Parameters for the seeded template generator.
#[derive(Debug, Clone)]
pub struct TemplateGenConfig {
    pub max_states: usize,
    pub max_actions: usize,
    pub k: usize,
    pub r_only: bool,
}

impl Default for TemplateGenConfig {
    fn default() -> Self {
        TemplateGenConfig { max_states: 5, max_actions: 3, k: 2, r_only: false }
    }
}

/// Generates a random well-formed strict template: one edge per rendezvous
/// letter, at least one broadcast edge per state (unless `r_only`).
pub fn random_template(seed: u64, cfg: &TemplateGenConfig) -> ProcessTemplate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_states = rng.gen_range(2..=cfg.max_states);
    let n_actions = rng.gen_range(1..=cfg.max_actions);
    let states: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
    let mut init = BTreeSet::new();
    init.insert(StateId(rng.gen_range(0..n_states)));
    for i in 0..n_states {
        if rng.gen_bool(0.3) {
            init.insert(StateId(i));
        }
    }
    let actions: Vec<RendezvousAction> = (0..n_actions)
        .map(|i| RendezvousAction { name: format!("m{i}") })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n_actions {
        for j in 1..=cfg.k {
            edges.push(Edge {
                src: StateId(rng.gen_range(0..n_states)),
                label: EdgeLabel::Rendezvous { action: ActionId(a), index: j },
                dst: StateId(rng.gen_range(0..n_states)),
            });
        }
    }
    if !cfg.r_only {
        for s in 0..n_states {
            let mut dsts = BTreeSet::new();
            dsts.insert(StateId(rng.gen_range(0..n_states)));
            if rng.gen_bool(0.25) {
                dsts.insert(StateId(rng.gen_range(0..n_states)));
            }
            for d in dsts {
                edges.push(Edge { src: StateId(s), label: EdgeLabel::Broadcast, dst: d });
            }
        }
    }
    let t = ProcessTemplate {
        k: cfg.k,
        states,
        init,
        actions,
        edges,
        r_only: cfg.r_only,
    };
    debug_assert!(t.validate(true).is_empty());
    t
}

/// Bad-behavior NBW: from some point on no broadcast happens yet `a.1` keeps
/// firing. Hold against `fig_not_regular`.
pub const SPEC_NO_B_INF_A1: &str = "spec nbw\n\
state s0 init\n\
state s1\n\
state s2 accepting\n\
trans s0 * s0\n\
trans s0 (_ a.1 _) s2\n\
trans s0 (_ a.2 _) s1\n\
trans s1 (_ a.1 _) s2\n\
trans s1 (_ a.2 _) s1\n\
trans s2 (_ a.1 _) s2\n\
trans s2 (_ a.2 _) s1\n";

/// Bad-behavior NBW: infinitely many `a.1` and infinitely many broadcasts.
/// Violated by `fig_not_regular`.
pub const SPEC_INF_A1_INF_B: &str = "spec nbw\n\
state s0 init\n\
state s1\n\
state s2 accepting\n\
trans s0 (_ a.2 _) s0\n\
trans s0 (_ b _) s0\n\
trans s0 (_ a.1 _) s1\n\
trans s1 (_ a.1 _) s1\n\
trans s1 (_ a.2 _) s1\n\
trans s1 (_ b _) s2\n\
trans s2 (_ a.1 _) s1\n\
trans s2 (_ a.2 _) s0\n\
trans s2 (_ b _) s0\n";

/// Bad-prefix NFW: two `a.2` edges with no broadcast in between.
pub const SPEC_TWO_A2_NO_B: &str = "spec nfw\n\
state s0 init\n\
state s1\n\
state s2 accepting\n\
trans s0 * s0\n\
trans s0 (_ a.2 _) s1\n\
trans s1 (_ a.1 _) s1\n\
trans s1 (_ a.2 _) s2\n";

/// All standard fixtures, with names, for table-driven harnesses.
pub fn fixtures() -> Vec<(&'static str, ProcessTemplate)> {
    vec![
        ("three_state", fig_three_state()),
        ("not_regular", fig_not_regular()),
        ("not_regular_mutated", fig_not_regular_mutated()),
        ("two_phase", two_phase()),
        ("two_phase_strict", two_phase_strict()),
        ("all_green", all_green()),
        ("with_dead_end", with_dead_end()),
    ]
}
