//! Exact rational arithmetic over counter representations: per-state count
//! vectors, per-action displacement vectors, legality of rational paths, and
//! a phase-1 simplex feasibility solver for linear systems over nonnegative
//! rationals. No floating point anywhere; soundness of the whole decision
//! procedure rides on exactness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{ActionId, Configuration, EdgeId, EdgeLabel, ProcessTemplate};

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Per-state process counts of a configuration, as exact rationals in the
/// template's state ordering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterVector(pub Vec<Rat>);

pub fn counter_rep(f: &Configuration) -> CounterVector {
    CounterVector(f.counts().iter().map(|c| rat(*c as i64)).collect())
}

/// The signed per-state displacement of one firing of a rendezvous action:
/// entries sum to zero since rendezvous moves processes without creating or
/// destroying them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionEffect {
    pub action: ActionId,
    pub vector: Vec<i64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EffectError {
    #[error("letter {index} of the action has no edge in the component")]
    MissingLetter { index: usize },
    #[error("letter {index} of the action has multiple edges; effects need one edge per letter")]
    AmbiguousLetter { index: usize },
}

/// Computes the displacement vector of `action` inside a component given as
/// its set of base edges. Every letter must be present exactly once.
pub fn action_effect(
    t: &ProcessTemplate,
    action: ActionId,
    component_edges: &BTreeSet<EdgeId>,
) -> Result<ActionEffect, EffectError> {
    let mut vector = vec![0i64; t.dim()];
    for j in 1..=t.k {
        let mut found = None;
        for e in component_edges {
            if t.edges[e.0].label == (EdgeLabel::Rendezvous { action, index: j }) {
                if found.is_some() {
                    return Err(EffectError::AmbiguousLetter { index: j });
                }
                found = Some(*e);
            }
        }
        let e = found.ok_or(EffectError::MissingLetter { index: j })?;
        vector[t.edges[e.0].src.0] -= 1;
        vector[t.edges[e.0].dst.0] += 1;
    }
    debug_assert_eq!(vector.iter().sum::<i64>(), 0);
    Ok(ActionEffect { action, vector })
}

/// A rational path: an origin point and a sequence of displacement vectors.
#[derive(Debug, Clone)]
pub struct RationalPath {
    pub origin: Vec<Rat>,
    pub displacements: Vec<Vec<Rat>>,
}

/// A path is legal when no coordinate of any prefix sum goes negative.
pub fn is_legal(p: &RationalPath) -> bool {
    let mut cur = p.origin.clone();
    if cur.iter().any(|x| x.is_negative()) {
        return false;
    }
    for d in &p.displacements {
        debug_assert_eq!(d.len(), cur.len());
        for (c, delta) in cur.iter_mut().zip(d) {
            *c += delta;
        }
        if cur.iter().any(|x| x.is_negative()) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// A finite system of exact-rational linear equalities over nonnegative
/// variables, with optional `x >= 1` selections on some of them.
#[derive(Debug, Clone, Default)]
pub struct LinearSystem {
    names: Vec<String>,
    rows: Vec<(Vec<(VarId, Rat)>, Rat)>,
    at_least_one: BTreeSet<VarId>,
}

impl LinearSystem {
    pub fn new() -> Self {
        LinearSystem::default()
    }

    pub fn var(&mut self, name: impl Into<String>) -> VarId {
        self.names.push(name.into());
        VarId(self.names.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn add_eq(&mut self, coeffs: Vec<(VarId, Rat)>, rhs: Rat) {
        self.rows.push((coeffs, rhs));
    }

    pub fn require_at_least_one(&mut self, v: VarId) {
        self.at_least_one.insert(v);
    }

    pub fn selections(&self) -> &BTreeSet<VarId> {
        &self.at_least_one
    }

    /// Pins a variable to zero (an equality row `x = 0`).
    pub fn pin_zero(&mut self, v: VarId) {
        self.rows.push((vec![(v, Rat::one())], Rat::zero()));
    }

    pub fn is_homogeneous(&self) -> bool {
        self.rows.iter().all(|(_, rhs)| rhs.is_zero())
    }

    /// Human-readable dump for debugging and reports.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (coeffs, rhs) in &self.rows {
            let mut first = true;
            for (v, c) in coeffs {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    out.push_str(" + ");
                }
                let _ = write!(out, "{}*{}", c, self.names[v.0]);
                first = false;
            }
            if first {
                out.push('0');
            }
            let _ = writeln!(out, " = {rhs}");
        }
        for v in &self.at_least_one {
            let _ = writeln!(out, "{} >= 1", self.names[v.0]);
        }
        if !self.names.is_empty() {
            let _ = writeln!(out, "all vars >= 0");
        }
        out
    }

    fn check_solution(&self, x: &[Rat]) {
        for (coeffs, rhs) in &self.rows {
            let mut acc = Rat::zero();
            for (v, c) in coeffs {
                acc += c * &x[v.0];
            }
            assert_eq!(&acc, rhs, "solver returned a point violating a constraint");
        }
        for v in &self.at_least_one {
            assert!(x[v.0] >= Rat::one(), "solver violated an at-least-one selection");
        }
        assert!(x.iter().all(|v| !v.is_negative()), "solver returned a negative value");
    }
}

/// Decides feasibility by phase-1 simplex with Bland's rule over exact
/// rationals; deterministic given the declaration order. Returns a feasible
/// point, re-checked against every constraint before it is handed out.
pub fn lp_feasible(sys: &LinearSystem) -> Option<Vec<Rat>> {
    let n = sys.num_vars();

    // substitute x = x' + 1 for the >=1 selections, collect dense rows
    let mut rows: Vec<(Vec<Rat>, Rat)> = Vec::with_capacity(sys.rows.len());
    for (coeffs, rhs) in &sys.rows {
        let mut dense = vec![Rat::zero(); n];
        let mut b = rhs.clone();
        for (v, c) in coeffs {
            dense[v.0] += c;
        }
        for v in &sys.at_least_one {
            b -= &dense[v.0] * Rat::one();
        }
        rows.push((dense, b));
    }

    let m = rows.len();
    // tableau: columns 0..n real, n..n+m artificial, last = rhs
    let width = n + m + 1;
    let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m);
    for (i, (mut dense, mut b)) in rows.into_iter().enumerate() {
        if b.is_negative() {
            for c in dense.iter_mut() {
                *c = -c.clone();
            }
            b = -b;
        }
        let mut row = vec![Rat::zero(); width];
        row[..n].clone_from_slice(&dense);
        row[n + i] = Rat::one();
        row[width - 1] = b;
        tab.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase-1 objective: minimize the sum of artificials; reduced-cost row
    // starts as minus the sum of all constraint rows on the real columns
    let mut cost = vec![Rat::zero(); width];
    for row in &tab {
        for j in 0..n {
            cost[j] -= &row[j];
        }
        cost[width - 1] -= &row[width - 1];
    }

    loop {
        // Bland: entering = lowest-index column with negative reduced cost
        let entering = (0..n + m).find(|j| cost[*j].is_negative());
        let Some(e) = entering else { break };
        // leaving: min ratio, ties by smallest basic variable index
        let mut best: Option<(usize, Rat)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[e].is_positive() {
                let ratio = &row[width - 1] / &row[e];
                match &best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < *br || (ratio == *br && basis[i] < basis[*bi]) {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((pivot_row, _)) = best else {
            // phase-1 objective is bounded below by zero; no positive pivot
            // column entry means the system is malformed
            unreachable!("phase-1 simplex cannot be unbounded");
        };
        // pivot
        let pv = tab[pivot_row][e].clone();
        for x in tab[pivot_row].iter_mut() {
            *x /= &pv;
        }
        for i in 0..m {
            if i != pivot_row && !tab[i][e].is_zero() {
                let factor = tab[i][e].clone();
                for j in 0..width {
                    let delta = &factor * &tab[pivot_row][j];
                    tab[i][j] -= delta;
                }
            }
        }
        if !cost[e].is_zero() {
            let factor = cost[e].clone();
            for j in 0..width {
                let delta = &factor * &tab[pivot_row][j];
                cost[j] -= delta;
            }
        }
        basis[pivot_row] = e;
    }

    // objective value is -cost[last]; feasible iff it is zero
    if !cost[width - 1].is_zero() {
        return None;
    }
    let mut x = vec![Rat::zero(); n];
    for (i, b) in basis.iter().enumerate() {
        if *b < n {
            x[*b] = tab[i][width - 1].clone();
        }
    }
    for v in &sys.at_least_one {
        x[v.0] += Rat::one();
    }
    sys.check_solution(&x);
    Some(x)
}

/// A feasible point whose support is the union of supports over all feasible
/// points, together with that support. Requires the equality rows to be
/// homogeneous (the `>=1` selections aside): feasible points are then closed
/// under addition, so per-variable probes can be summed.
pub fn max_support_solution(sys: &LinearSystem) -> Option<(Vec<Rat>, BTreeSet<VarId>)> {
    assert!(
        sys.is_homogeneous(),
        "max-support probing needs homogeneous equality rows"
    );
    let mut total = lp_feasible(sys)?;
    for v in 0..sys.num_vars() {
        if total[v].is_positive() {
            continue;
        }
        let mut probe = sys.clone();
        probe.require_at_least_one(VarId(v));
        if let Some(x) = lp_feasible(&probe) {
            for (acc, xi) in total.iter_mut().zip(&x) {
                *acc += xi;
            }
        }
    }
    sys.check_solution(&total);
    let support = (0..sys.num_vars())
        .filter(|v| total[*v].is_positive())
        .map(VarId)
        .collect();
    Some((total, support))
}

/// Scales a rational point by the lcm of its denominators. For homogeneous
/// systems the result still satisfies every equality and only strengthens the
/// `>=1` selections.
pub fn integer_scale(sol: &[Rat]) -> Vec<BigInt> {
    let mut lcm = BigInt::one();
    for v in sol {
        lcm = lcm.lcm(v.denom());
    }
    sol.iter()
        .map(|v| {
            let scaled = v * Rat::from_integer(lcm.clone());
            debug_assert!(scaled.is_integer());
            scaled.to_integer()
        })
        .collect()
}

/// Convenience: the scaled values keyed by variable, as u64 counts.
pub fn integer_scale_u64(sol: &[Rat]) -> Option<BTreeMap<VarId, u64>> {
    let ints = integer_scale(sol);
    let mut out = BTreeMap::new();
    for (i, v) in ints.iter().enumerate() {
        let (sign, digits) = v.to_u64_digits();
        let val = match sign {
            num_bigint::Sign::Minus => return None,
            num_bigint::Sign::NoSign => 0,
            num_bigint::Sign::Plus => {
                if digits.len() > 1 {
                    return None;
                }
                digits[0]
            }
        };
        out.insert(VarId(i), val);
    }
    Some(out)
}
