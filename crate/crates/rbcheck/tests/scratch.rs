//! Temporary probe for pinning acceptance constants. Deleted before release.

use std::collections::BTreeSet;

use rbcheck::corpus;
use rbcheck::model::EdgeId;
use rbcheck::oracle::{cycle_edge_sets, exec_fin_words, SearchBudget};
use rbcheck::unwinding::{build_unwinding, UnwindingTemplate};

fn template_run_words(ut: &UnwindingTemplate, u: &rbcheck::unwinding::Unwinding, maxlen: usize) -> BTreeSet<Vec<EdgeId>> {
    let t = &ut.template;
    let mut out = BTreeSet::new();
    let mut stack: Vec<(usize, Vec<EdgeId>)> = t
        .init
        .iter()
        .map(|s| (s.0, Vec::new()))
        .collect();
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

#[test]
#[ignore]
fn probe_exec_fin_caps() {
    for (name, t) in corpus::fixtures() {
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let template_words = template_run_words(&ut, &u, 6);
        let budget = SearchBudget { max_states: 2_000_000, max_millis: 120_000, ..Default::default() };
        let mut oracle_words: BTreeSet<Vec<EdgeId>> = BTreeSet::new();
        let mut cap_needed = None;
        for n in 1..=8usize {
            let (w, truncated) = exec_fin_words(&t, n, 12, 6, &budget);
            assert!(!truncated, "{name} truncated at n={n}");
            oracle_words.extend(w);
            assert!(
                oracle_words.is_subset(&template_words),
                "{name}: oracle words not contained in template runs at n={n}"
            );
            if oracle_words == template_words {
                cap_needed = Some(n);
                break;
            }
        }
        match cap_needed {
            Some(n) => println!("{name}: cap {n} (words {})", template_words.len()),
            None => {
                let missing: Vec<_> = template_words.difference(&oracle_words).take(3).collect();
                println!("{name}: cap > 8; missing e.g. {:?}", missing
                    .iter()
                    .map(|w| w.iter().map(|e| t.edge_display(*e)).collect::<Vec<_>>())
                    .collect::<Vec<_>>());
            }
        }
    }
}

#[test]
#[ignore]
fn probe_classification_ratio() {
    let cfg = corpus::TemplateGenConfig { max_states: 5, max_actions: 3, k: 2, r_only: false };
    let mut pos = 0usize;
    let mut unfound = 0usize;
    let mut hard_fail = 0usize;
    let started = std::time::Instant::now();
    for seed in 0..200u64 {
        let t = corpus::random_template(seed, &cfg);
        let u = build_unwinding(&t);
        let ut = u.to_template();
        let cls = rbcheck::classifier::classify(&u).unwrap();
        let budget = SearchBudget { max_states: 300_000, max_millis: 10_000, ..Default::default() };
        let mut no_b = BTreeSet::new();
        let mut with_b = BTreeSet::new();
        for n in 2..=4usize {
            let sets = cycle_edge_sets(&u, &ut, n, &budget);
            let (nb, wb) = sets.found.unwrap();
            no_b.extend(nb);
            with_b.extend(wb);
        }
        for (i, entry) in cls.entries.iter().enumerate() {
            let e = rbcheck::unwinding::UEdgeId(i);
            if no_b.contains(&e) && entry.t1.is_none() {
                hard_fail += 1;
            }
            if with_b.contains(&e) && entry.t2.is_none() {
                hard_fail += 1;
            }
            if entry.t1.is_some() {
                pos += 1;
                if !no_b.contains(&e) {
                    unfound += 1;
                }
            }
            if entry.t2.is_some() {
                pos += 1;
                if !with_b.contains(&e) {
                    unfound += 1;
                }
            }
        }
    }
    println!(
        "positives={pos} unfound={unfound} ratio={:.3} hard_fail={hard_fail} elapsed={:?}",
        unfound as f64 / pos as f64,
        started.elapsed()
    );
}
