//! Acceptance suite: one test per release criterion, each ending in a
//! `[criterion N] PASS` line. Run with `cargo test --test acceptance --
//! --nocapture` to see the lines.

use std::collections::BTreeSet;
use std::time::Instant;

use rbcheck::automata::{
    accepts_lasso_word, bind_spec, build_ainf, check_liveness, check_safety, emptiness, intersect,
    CheckOptions, EdgePattern, FieldPattern, LetterPattern, SpecAutomaton, SpecTransition, Status,
};
use rbcheck::classifier::{classify, realize_t1, realize_t2, t1_witness};
use rbcheck::corpus::{self, TemplateGenConfig};
use rbcheck::model::{
    is_pseudo_cycle, successors, twins, Configuration, EdgeId, EdgeLabel, ProcessTemplate,
    TransitionLabel,
};
use rbcheck::oracle::{
    cycle_edge_sets, exec_fin_words, find_loading_run, initial_configurations, realize_lasso,
    realize_word, sample_pumped_executions, SearchBudget,
};
use rbcheck::parse::{parse_spec, parse_timed};
use rbcheck::ratvas::{lp_feasible, rat, LinearSystem};
use rbcheck::timed::{concrete_exec_fin, reduce_to_rb, reduced_word_to_symbols, ReduceOptions};
use rbcheck::unwinding::{build_unwinding, UEdgeId, Unwinding, UnwindingTemplate};

/// Criterion 1: the four-process reference path replays step by step, is a
/// pseudo-cycle, and its endpoints are twins; in under a second.
#[test]
fn criterion_1_reference_path_reproduction() {
    let started = Instant::now();
    let t = corpus::fig_three_state();
    let run = corpus::reference_pseudo_cycle();
    let mut cur = run.start.clone();
    for step in &run.steps {
        assert!(successors(&t, &cur).contains(step), "step must be enabled");
        cur = step.dst.clone();
    }
    assert!(is_pseudo_cycle(&run));
    assert!(twins(&run.start, run.end()));
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("[criterion 1] PASS: reference pseudo-cycle replayed in {elapsed:?}");
}

/// Criterion 2: the two-state fixture unwinds to a single component with the
/// expected edges, and the saturation property holds on 500 random templates.
#[test]
fn criterion_2_unwinding_fixture_and_saturation() {
    let t = corpus::fig_not_regular();
    let u = build_unwinding(&t);
    assert_eq!((u.prefix, u.period), (0, 1));
    assert_eq!(u.components.len(), 1);
    let states: Vec<&str> = u.components[0]
        .states
        .iter()
        .map(|s| t.state_name(*s))
        .collect();
    assert_eq!(states, vec!["p", "q"]);
    let rdz = u
        .edges
        .iter()
        .filter(|ue| !t.edges[ue.base.0].label.is_broadcast())
        .count();
    assert_eq!((rdz, u.edges.len() - rdz), (2, 2));

    let cfg = TemplateGenConfig { max_states: 6, max_actions: 3, k: 2, r_only: false };
    for seed in 0..500u64 {
        let t = corpus::random_template(seed, &cfg);
        let u = build_unwinding(&t);
        for c in &u.components {
            for e in &c.edges {
                let EdgeLabel::Rendezvous { action, .. } = t.edges[e.0].label else {
                    unreachable!()
                };
                for l in 1..=t.k {
                    assert!(
                        t.edges_with_letter(action, l).any(|f| c.edges.contains(&f)),
                        "saturation property violated (seed {seed}, component {})",
                        c.index
                    );
                }
            }
        }
    }
    println!("[criterion 2] PASS: unwinding fixture shape and saturation property on 500 random templates");
}

fn bounded_transition_set(
    t: &ProcessTemplate,
    n: usize,
    depth: usize,
) -> (
    BTreeSet<Configuration>,
    BTreeSet<(Configuration, TransitionLabel, Configuration)>,
) {
    let mut inits = BTreeSet::new();
    let mut frontier = Vec::new();
    for c in initial_configurations(t, n) {
        inits.insert(c.clone());
        frontier.push(c);
    }
    let mut seen: BTreeSet<Configuration> = inits.clone();
    let mut transitions = BTreeSet::new();
    for _ in 0..depth {
        let mut next = Vec::new();
        for cfg in frontier.drain(..) {
            for step in successors(t, &cfg) {
                transitions.insert((step.src.clone(), step.label.clone(), step.dst.clone()));
                if seen.insert(step.dst.clone()) {
                    next.push(step.dst);
                }
            }
        }
        frontier = next;
    }
    (inits, transitions)
}

fn project_transition_set(
    ut: &UnwindingTemplate,
    u: &Unwinding,
    set: &BTreeSet<(Configuration, TransitionLabel, Configuration)>,
) -> BTreeSet<(Configuration, TransitionLabel, Configuration)> {
    let _ = u;
    let dim = ut
        .state_info
        .iter()
        .map(|(s, _)| s.0 + 1)
        .max()
        .unwrap_or(1);
    let strip = |f: &Configuration| {
        Configuration::new(
            f.assignment()
                .iter()
                .map(|(p, s)| (*p, ut.base_state(*s)))
                .collect(),
            dim,
        )
    };
    set.iter()
        .map(|(s, l, d)| (strip(s), l.clone(), strip(d)))
        .collect()
}

fn template_run_words(
    u: &Unwinding,
    ut: &UnwindingTemplate,
    maxlen: usize,
) -> BTreeSet<Vec<EdgeId>> {
    let t = &ut.template;
    let mut out = BTreeSet::new();
    let mut stack: Vec<(usize, Vec<EdgeId>)> =
        t.init.iter().map(|s| (s.0, Vec::new())).collect();
    while let Some((state, word)) = stack.pop() {
        out.insert(word.clone());
        if word.len() == maxlen {
            continue;
        }
        for (i, e) in t.edges.iter().enumerate() {
            if e.src.0 == state {
                let mut w = word.clone();
                w.push(u.edges[ut.edge_uidx[i].0].base);
                stack.push((e.dst.0, w));
            }
        }
    }
    out
}

/// Criterion 3: lemma-level oracle equivalences. Runs of the instance equal
/// the projected runs of the unwinding instance (n <= 3, depth <= 8); the
/// finite-execution language equals the projected template runs of the
/// unwinding (word length <= 6); loading runs exist for b <= 2, target <= 2.
#[test]
fn criterion_3_lemma_level_equivalences() {
    // (a) run lifting: depth-bounded reachable transition sets coincide
    for (name, t) in corpus::fixtures() {
        let u = build_unwinding(&t);
        let ut = u.to_template();
        for n in 1..=3usize {
            let (base_inits, base_set) = bounded_transition_set(&t, n, 8);
            let (lift_inits, lift_set) = bounded_transition_set(&ut.template, n, 8);
            let projected = project_transition_set(&ut, &u, &lift_set);
            assert_eq!(base_set, projected, "{name} run sets differ at n={n}");
            let projected_inits: BTreeSet<Configuration> = lift_inits
                .iter()
                .map(|c| {
                    Configuration::new(
                        c.assignment()
                            .iter()
                            .map(|(p, s)| (*p, ut.base_state(*s)))
                            .collect(),
                        t.dim(),
                    )
                })
                .collect();
            assert_eq!(base_inits, projected_inits, "{name} initial sets differ");
        }
    }

    // (b) finite executions match the unwinding's template runs; the oracle
    // union needs size 7 for the two-state fixtures (a.1 six times in a row
    // consumes a fresh partner per firing) and less elsewhere
    let caps = [
        ("three_state", 3),
        ("not_regular", 7),
        ("not_regular_mutated", 7),
        ("two_phase", 2),
        ("two_phase_strict", 2),
        ("all_green", 2),
        ("with_dead_end", 4),
    ];
    let budget = SearchBudget { max_states: 2_000_000, max_millis: 120_000, ..Default::default() };
    for (name, cap) in caps {
        let t = corpus::fixtures()
            .into_iter()
            .find(|(n, _)| *n == name)
            .unwrap()
            .1;
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let template_words = template_run_words(&u, &ut, 6);
        let mut oracle_words: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
        for n in 1..=cap {
            let (w, truncated) = exec_fin_words(&t, n, 12, 6, &budget);
            assert!(!truncated);
            oracle_words.extend(w);
            assert!(
                oracle_words.is_subset(&template_words),
                "{name}: oracle execution outside the unwinding's runs"
            );
        }
        assert_eq!(oracle_words, template_words, "{name}: word sets differ at cap {cap}");
    }

    // (c) loading runs
    let budget = SearchBudget { max_n: 8, max_states: 500_000, max_millis: 60_000, ..Default::default() };
    for (name, t) in corpus::fixtures() {
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let max_b = if t.r_only { 0 } else { 2 };
        for b in 0..=max_b {
            for target in 0..=2u32 {
                let got = find_loading_run(&u, &ut, b, target, &budget);
                let (_, run) = got.found.unwrap_or_else(|| {
                    panic!("{name}: no loading run for b={b}, target={target}")
                });
                assert_eq!(run.broadcast_count(), b);
                let comp = u.comp(b);
                for s in &u.components[comp].states {
                    let annotated = ut.state_index[&(*s, comp)];
                    assert!(run.end().counts()[annotated.0] >= target);
                }
            }
        }
    }
    println!("[criterion 3] PASS: run lifting (n<=3, depth 8), finite-execution language (len<=6), loading runs (b<=2, target<=2)");
}

/// Criterion 4: classification ground truth. The two-state fixture is all
/// orange; the three-state fixture's T1 witness for c.1 has support {a, c}
/// with y_c = 2 y_a; and on 200 random templates the oracle never finds a
/// pseudo-cycle the LP misses, while LP-positive/oracle-unfound cases stay
/// under 10% and each realizes (or is triaged).
#[test]
fn criterion_4_classification_ground_truth() {
    use rbcheck::classifier::EdgeColor;

    let t = corpus::fig_not_regular();
    let u = build_unwinding(&t);
    let cls = classify(&u).unwrap();
    for i in 0..u.edges.len() {
        assert_eq!(cls.color_of(UEdgeId(i)), EdgeColor::Orange);
    }

    let t = corpus::fig_three_state();
    let u = build_unwinding(&t);
    let c1 = u.parse_edge_ref("q:c.1:r@comp0").unwrap();
    let w = t1_witness(&u, c1).unwrap().expect("T1 witness for c.1");
    let a = t.action_id("a").unwrap();
    let c = t.action_id("c").unwrap();
    let ya = &w.multiplicities.iter().find(|(x, _)| *x == a).unwrap().1;
    let yc = &w.multiplicities.iter().find(|(x, _)| *x == c).unwrap().1;
    assert!(ya > &rat(0) && yc > &rat(0), "support must be {{a, c}}");
    assert_eq!(yc, &(ya * rat(2)), "ratio y_c = 2 y_a");

    let cfg = TemplateGenConfig { max_states: 5, max_actions: 3, k: 2, r_only: false };
    let budget = SearchBudget { max_states: 300_000, max_millis: 10_000, ..Default::default() };
    let mut lp_positives = 0usize;
    let mut unfound = Vec::new();
    for seed in 0..200u64 {
        let t = corpus::random_template(seed, &cfg);
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let cls = classify(&u).unwrap();
        let mut no_b = BTreeSet::new();
        let mut with_b = BTreeSet::new();
        for n in 2..=4usize {
            let sets = cycle_edge_sets(&u, &ut, n, &budget);
            let (nb, wb) = sets.found.unwrap();
            no_b.extend(nb);
            with_b.extend(wb);
        }
        for (i, entry) in cls.entries.iter().enumerate() {
            let e = UEdgeId(i);
            // hard direction: an oracle cycle always has an LP witness
            assert!(
                !(no_b.contains(&e) && entry.t1.is_none()),
                "seed {seed}: oracle broadcast-free cycle through {} but no T1 witness",
                u.edge_display(e)
            );
            assert!(
                !(with_b.contains(&e) && entry.t2.is_none()),
                "seed {seed}: oracle broadcast cycle through {} but no T2 witness",
                u.edge_display(e)
            );
            if entry.t1.is_some() {
                lp_positives += 1;
                if !no_b.contains(&e) {
                    unfound.push((seed, e, true));
                }
            }
            if entry.t2.is_some() {
                lp_positives += 1;
                if !with_b.contains(&e) {
                    unfound.push((seed, e, false));
                }
            }
        }
    }
    let ratio = unfound.len() as f64 / lp_positives as f64;
    assert!(ratio < 0.10, "LP-positive/oracle-unfound ratio {ratio:.3} >= 10%");
    // every unfound LP positive must realize into an explicit pseudo-cycle
    // (or be triaged with diagnostics)
    let mut realized = 0usize;
    let mut triaged = Vec::new();
    for (seed, e, is_t1) in &unfound {
        let t = corpus::random_template(*seed, &cfg);
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let outcome = if *is_t1 {
            t1_witness(&u, *e)
                .unwrap()
                .map(|w| realize_t1(&u, &ut, &w).map(|_| ()))
        } else {
            rbcheck::classifier::t2_witness(&u, *e)
                .unwrap()
                .map(|w| realize_t2(&u, &ut, &w).map(|_| ()))
        };
        match outcome {
            Some(Ok(())) => realized += 1,
            Some(Err(err)) => triaged.push(format!(
                "seed {seed} edge {} ({}): {err}",
                u.edge_display(*e),
                if *is_t1 { "t1" } else { "t2" }
            )),
            None => unreachable!("witness existed during classification"),
        }
    }
    for line in &triaged {
        eprintln!("[criterion 4] triage: {line}");
    }
    println!(
        "[criterion 4] PASS: 0 oracle-vs-LP hard failures; {}/{} LP positives oracle-unfound ({:.1}%), {} realized, {} triaged",
        unfound.len(), lp_positives, 100.0 * ratio, realized, triaged.len()
    );
}

/// Criterion 5: liveness end to end on the two-state fixture, with the
/// violated verdict's lasso confirmed on an instance of size at most 3,
/// within ten seconds.
#[test]
fn criterion_5_liveness_end_to_end() {
    let started = Instant::now();
    let t = corpus::fig_not_regular();
    let opts = CheckOptions {
        realize: true,
        budget: SearchBudget { max_n: 3, ..Default::default() },
    };
    let holds = parse_spec(corpus::SPEC_NO_B_INF_A1).unwrap();
    let v = check_liveness(&t, &holds, None, &opts).unwrap();
    assert_eq!(v.status, Status::Holds);
    assert!(v.counterexample.is_none());

    let violated = parse_spec(corpus::SPEC_INF_A1_INF_B).unwrap();
    let v = check_liveness(&t, &violated, None, &opts).unwrap();
    assert_eq!(v.status, Status::Violated);
    let n = v.realized_at_n.expect("lasso must realize");
    assert!(n <= 3, "realized at n={n} > 3");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("[criterion 5] PASS: holds/violated verdicts with lasso realized at n={n} in {elapsed:?}");
}

fn exact_pattern(t: &ProcessTemplate, e: EdgeId) -> EdgePattern {
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
}

fn spec_infinitely_often(t: &ProcessTemplate, e: EdgeId) -> SpecAutomaton {
    SpecAutomaton {
        finite: false,
        states: vec!["w".into(), "hit".into()],
        initial: [0].into(),
        accepting: [1].into(),
        transitions: vec![
            SpecTransition { src: 0, pattern: EdgePattern::AnyEdge, dst: 0 },
            SpecTransition { src: 0, pattern: exact_pattern(t, e), dst: 1 },
            SpecTransition { src: 1, pattern: EdgePattern::AnyEdge, dst: 0 },
            SpecTransition { src: 1, pattern: exact_pattern(t, e), dst: 1 },
        ],
    }
}

fn spec_once(t: &ProcessTemplate, e: EdgeId) -> SpecAutomaton {
    SpecAutomaton {
        finite: false,
        states: vec!["w".into(), "done".into()],
        initial: [0].into(),
        accepting: [1].into(),
        transitions: vec![
            SpecTransition { src: 0, pattern: EdgePattern::AnyEdge, dst: 0 },
            SpecTransition { src: 0, pattern: exact_pattern(t, e), dst: 1 },
            SpecTransition { src: 1, pattern: EdgePattern::AnyEdge, dst: 1 },
        ],
    }
}

fn spec_inf_pair(t: &ProcessTemplate, e1: EdgeId, e2: EdgeId) -> SpecAutomaton {
    SpecAutomaton {
        finite: false,
        states: vec!["w1".into(), "w2".into(), "hit".into()],
        initial: [0].into(),
        accepting: [2].into(),
        transitions: vec![
            SpecTransition { src: 0, pattern: EdgePattern::AnyEdge, dst: 0 },
            SpecTransition { src: 0, pattern: exact_pattern(t, e1), dst: 1 },
            SpecTransition { src: 1, pattern: EdgePattern::AnyEdge, dst: 1 },
            SpecTransition { src: 1, pattern: exact_pattern(t, e2), dst: 2 },
            SpecTransition { src: 2, pattern: EdgePattern::AnyEdge, dst: 0 },
        ],
    }
}

fn spec_once_then_inf(t: &ProcessTemplate, e1: EdgeId, e2: EdgeId) -> SpecAutomaton {
    SpecAutomaton {
        finite: false,
        states: vec!["w".into(), "armed".into(), "hit".into()],
        initial: [0].into(),
        accepting: [2].into(),
        transitions: vec![
            SpecTransition { src: 0, pattern: EdgePattern::AnyEdge, dst: 0 },
            SpecTransition { src: 0, pattern: exact_pattern(t, e1), dst: 1 },
            SpecTransition { src: 1, pattern: EdgePattern::AnyEdge, dst: 1 },
            SpecTransition { src: 1, pattern: exact_pattern(t, e2), dst: 2 },
            SpecTransition { src: 2, pattern: EdgePattern::AnyEdge, dst: 1 },
            SpecTransition { src: 2, pattern: exact_pattern(t, e2), dst: 2 },
        ],
    }
}

/// Criterion 6: language sampling for the bounded-counter automaton. 100
/// pumped pseudo-cycle executions per fixture are accepted; 20 lassos from
/// emptiness checks per fixture all realize on concrete instances.
#[test]
fn criterion_6_language_sampling() {
    for (name, t) in corpus::fixtures() {
        if !t.is_strict() {
            continue; // classification (and hence the automaton) needs strictness
        }
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let cls = classify(&u).unwrap();
        let ainf = build_ainf(&u, &ut, &cls);

        // (a) pumped executions are accepted
        let budget = SearchBudget { max_n: 4, max_depth: 24, ..Default::default() };
        let samples = sample_pumped_executions(&t, 100, 0xACCE55, &budget);
        assert_eq!(samples.len(), 100, "{name}: sampler fell short");
        for (prefix, cycle) in &samples {
            assert!(
                accepts_lasso_word(&ainf, &t, prefix, cycle),
                "{name}: pumped execution rejected (prefix {prefix:?}, cycle {cycle:?})"
            );
        }

        // (b) emptiness-emitted lassos realize on concrete instances
        let mut specs: Vec<SpecAutomaton> = Vec::new();
        let base_edges: Vec<EdgeId> = (0..t.edges.len()).map(EdgeId).collect();
        for e in &base_edges {
            specs.push(spec_infinitely_often(&t, *e));
            specs.push(spec_once(&t, *e));
        }
        for e1 in &base_edges {
            for e2 in &base_edges {
                if e1 != e2 {
                    specs.push(spec_inf_pair(&t, *e1, *e2));
                }
                specs.push(spec_once_then_inf(&t, *e1, *e2));
            }
        }
        let realize_budget = SearchBudget {
            max_n: 8,
            max_states: 500_000,
            max_millis: 20_000,
            ..Default::default()
        };
        let mut checked = 0usize;
        for spec in &specs {
            if checked >= 20 {
                break;
            }
            let bound = bind_spec(spec, &t, None).unwrap();
            let product = intersect(&ainf, &bound);
            let (lasso, _) = emptiness(&product);
            let Some(l) = lasso else { continue };
            let prefix: Vec<EdgeId> =
                l.prefix.iter().map(|ti| product.transitions[*ti].edge).collect();
            let cycle: Vec<EdgeId> =
                l.cycle.iter().map(|ti| product.transitions[*ti].edge).collect();
            let got = realize_lasso(&t, &prefix, &cycle, &realize_budget);
            assert!(
                got.found.is_some(),
                "{name}: lasso not realized (prefix {:?}, cycle {:?})",
                prefix.iter().map(|e| t.edge_display(*e)).collect::<Vec<_>>(),
                cycle.iter().map(|e| t.edge_display(*e)).collect::<Vec<_>>()
            );
            checked += 1;
        }
        assert!(checked >= 20, "{name}: only {checked} nonempty products available");
    }
    println!("[criterion 6] PASS: 100 pumped executions accepted and 20 emptiness lassos realized per fixture");
}

/// Criterion 7: safety end to end. The two-state fixture never takes a.2
/// twice without a broadcast in between; the mutated template does, with a
/// finite counterexample the oracle replays.
#[test]
fn criterion_7_safety_end_to_end() {
    let bad = parse_spec(corpus::SPEC_TWO_A2_NO_B).unwrap();
    let opts = CheckOptions {
        realize: true,
        budget: SearchBudget { max_n: 4, ..Default::default() },
    };
    let t = corpus::fig_not_regular();
    let v = check_safety(&t, &bad, None, &opts).unwrap();
    assert_eq!(v.status, Status::Holds);

    let tm = corpus::fig_not_regular_mutated();
    let v = check_safety(&tm, &bad, None, &opts).unwrap();
    assert_eq!(v.status, Status::Violated);
    let (word, cycle) = v.counterexample.clone().unwrap();
    assert!(cycle.is_empty());
    let n = v.realized_at_n.expect("counterexample must replay");
    // independent replay through the oracle
    let again = realize_word(&tm, &word, &opts.budget);
    assert_eq!(again.found, Some(n));
    println!("[criterion 7] PASS: safety holds on the fixture, violated on the mutation with a counterexample replayed at n={n}");
}

/// Criterion 8: the timed frontend. The single-clock fixture reduces to
/// exactly |Q| * (c_max + 2)^|C| states, and the reduced system's finite
/// executions match the concrete timed semantics at n <= 2, depth <= 6.
#[test]
fn criterion_8_timed_frontend() {
    let tt = parse_timed(corpus::timed_single_clock()).unwrap();
    let red = reduce_to_rb(&tt, &ReduceOptions::default()).unwrap();
    let expected = tt.states.len() * (1 + 2usize); // c_max = 1, one clock
    assert_eq!(red.template.states.len(), expected);
    assert!(red.template.validate(true).is_empty());

    let budget = SearchBudget { max_states: 1_000_000, max_millis: 60_000, ..Default::default() };
    for n in 1..=2usize {
        let concrete = concrete_exec_fin(&tt, n, 6);
        let (reduced_words, truncated) = exec_fin_words(&red.template, n, 6, 6, &budget);
        assert!(!truncated);
        let mapped: BTreeSet<_> = reduced_words
            .iter()
            .map(|w| reduced_word_to_symbols(&red, w))
            .collect();
        assert_eq!(mapped, concrete, "execution sets differ at n={n}");
    }

    // a second fixture with two clocks pins the state-count formula
    let tt2 = parse_timed(
        "system timed\nk 2\nclock x max 1\nclock y max 2\nstate q0 init\nstate q1\n\
         edge q0 a.1 q1 guard (lt 0 x) reset x\n\
         edge q1 a.2 q0 guard (eq 2 y) reset y\n",
    )
    .unwrap();
    let red2 = reduce_to_rb(&tt2, &ReduceOptions::default()).unwrap();
    assert_eq!(red2.template.states.len(), 2 * 3 * 4);
    println!("[criterion 8] PASS: reduced state count exact and bounded-depth execution equality at n<=2, depth<=6");
}

/// Criterion 9: solver integrity. Every returned solution re-substitutes
/// exactly (asserted inside the solver on every call); 1000 random systems
/// with planted solutions are never declared infeasible.
#[test]
fn criterion_9_solver_integrity() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nvars = rng.gen_range(1..=6);
        let mut sys = LinearSystem::new();
        let vars: Vec<_> = (0..nvars).map(|i| sys.var(format!("x{i}"))).collect();
        // plant a nonnegative rational point
        let planted: Vec<_> = (0..nvars)
            .map(|_| rat(rng.gen_range(0..=4)) / rat(rng.gen_range(1..=3)))
            .collect();
        let mut planted = planted;
        for v in &vars {
            if planted[v.0] >= rat(1) && rng.gen_bool(0.4) {
                sys.require_at_least_one(*v);
            }
        }
        // occasionally bump a selected variable to keep the plant honest
        for v in sys.selections().clone() {
            if planted[v.0] < rat(1) {
                planted[v.0] += rat(1);
            }
        }
        let rows = rng.gen_range(0..=4);
        for _ in 0..rows {
            let coeffs: Vec<_> = vars
                .iter()
                .filter_map(|v| {
                    let c = rng.gen_range(-3i64..=3);
                    (c != 0).then(|| (*v, rat(c)))
                })
                .collect();
            let rhs: rbcheck::ratvas::Rat = coeffs
                .iter()
                .map(|(v, c)| c * &planted[v.0])
                .sum();
            sys.add_eq(coeffs, rhs);
        }
        assert!(
            lp_feasible(&sys).is_some(),
            "planted-feasible system declared infeasible (seed {seed})\n{}",
            sys.dump()
        );
    }
    println!("[criterion 9] PASS: 1000 planted systems solved; every solution re-substituted exactly");
}
