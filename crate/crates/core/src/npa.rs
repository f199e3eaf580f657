//! Sequential NPA hierarchy for CHSH local randomness.
//!
//! Alice measures `A_a` on input `a`. Bob measures `B_b` on input `b`, is then
//! told `a` and measures `B'_ab` to guess Alice's output. Only outcome-0
//! projectors are generators; outcome 1 is `I − (outcome 0)`. `P1` is the CHSH
//! score and `P2` the probability that Bob's guess equals Alice's output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::{sig9, sig9_value};
use crate::qsim::{identity, tensor, CMatrix, MixedState};
use crate::sdp::{AdmmOptions, AdmmState, LinearPin, Method, MomentProblem, PinMode, SolveStatus, SolverOptions};
use crate::strategies::{chsh_mixed, chsh_optimal, tsirelson_score, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Party {
    Alice,
    BobStage1,
    BobStage2,
}

/// Outcome-`output` projector of one party. `input` is `(a, 0)` for Alice,
/// `(b, 0)` for Bob's first measurement and `(a, b)` for his second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Generator {
    pub party: Party,
    pub input: (u8, u8),
    pub output: u8,
}

impl Generator {
    pub const fn alice(a: u8) -> Self {
        Self {
            party: Party::Alice,
            input: (a, 0),
            output: 0,
        }
    }

    pub const fn bob(b: u8) -> Self {
        Self {
            party: Party::BobStage1,
            input: (b, 0),
            output: 0,
        }
    }

    pub const fn guess(a: u8, b: u8) -> Self {
        Self {
            party: Party::BobStage2,
            input: (a, b),
            output: 0,
        }
    }

    pub fn is_alice(&self) -> bool {
        self.party == Party::Alice
    }

    /// Same measurement, so the product is `δ_{out,out'}` times the projector.
    fn same_measurement(&self, other: &Generator) -> bool {
        self.party == other.party && self.input == other.input
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.party {
            Party::Alice => write!(f, "A{}{}", self.input.0, self.output),
            Party::BobStage1 => write!(f, "B{}{}", self.input.0, self.output),
            Party::BobStage2 => write!(f, "Bp{}{}{}", self.input.0, self.input.1, self.output),
        }
    }
}

/// Generator alphabet in index order.
pub const GENERATORS: [Generator; 8] = [
    Generator::alice(0),
    Generator::alice(1),
    Generator::bob(0),
    Generator::bob(1),
    Generator::guess(0, 0),
    Generator::guess(0, 1),
    Generator::guess(1, 0),
    Generator::guess(1, 1),
];

/// A product of generators. After [`canonicalize`] all Alice letters come
/// first and no letter repeats adjacently.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<Generator>);

impl Monomial {
    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adjoint of a canonical word: each party block reversed.
    pub fn adjoint(&self) -> Self {
        let split = self.0.iter().take_while(|g| g.is_alice()).count();
        let mut out: Vec<Generator> = self.0[..split].iter().rev().copied().collect();
        out.extend(self.0[split..].iter().rev().copied());
        Self(out)
    }

    pub fn concat(&self, other: &Monomial) -> Self {
        let mut w = self.0.clone();
        w.extend_from_slice(&other.0);
        Self(w)
    }

    pub fn is_canonical(&self) -> bool {
        canonicalize(self).as_ref() == Some(self)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "I" {
            return Ok(Self::identity());
        }
        s.split_whitespace()
            .map(|tok| {
                GENERATORS
                    .iter()
                    .find(|g| g.to_string() == tok)
                    .copied()
                    .ok_or_else(|| Error::OutOfRange(format!("unknown generator `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "I");
        }
        let parts: Vec<String> = self.0.iter().map(|g| g.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

fn reduce_block(block: impl Iterator<Item = Generator>) -> Option<Vec<Generator>> {
    let mut out: Vec<Generator> = Vec::new();
    for g in block {
        match out.last() {
            Some(last) if *last == g => {}
            Some(last) if last.same_measurement(&g) => return None,
            _ => out.push(g),
        }
    }
    Some(out)
}

/// Normal form of a word, or `None` when it is the zero operator.
pub fn canonicalize(word: &Monomial) -> Option<Monomial> {
    let mut out = reduce_block(word.0.iter().copied().filter(Generator::is_alice))?;
    out.extend(reduce_block(word.0.iter().copied().filter(|g| !g.is_alice()))?);
    Some(Monomial(out))
}

/// Key identifying `⟨w⟩` in a real moment matrix: the smaller of the word and
/// its adjoint.
pub fn class_key(word: &Monomial) -> Option<Monomial> {
    let c = canonicalize(word)?;
    let adj = c.adjoint();
    Some(if adj < c { adj } else { c })
}

/// Linear functional `Σ coef · ⟨word⟩` with terms keyed by [`class_key`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Functional {
    terms: BTreeMap<Monomial, f64>,
}

impl Functional {
    pub fn add(&mut self, coef: f64, word: &[Generator]) {
        if let Some(k) = class_key(&Monomial(word.to_vec())) {
            *self.terms.entry(k).or_insert(0.0) += coef;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().filter(|(_, c)| **c != 0.0).map(|(m, c)| (m, *c))
    }

    pub fn evaluate(&self, moment: impl Fn(&Monomial) -> f64) -> f64 {
        self.terms().map(|(m, c)| c * moment(m)).sum()
    }
}

/// CHSH winning probability.
pub fn p1_functional() -> Functional {
    let (a, b) = (Generator::alice, Generator::bob);
    let mut f = Functional::default();
    f.add(0.75, &[]);
    f.add(-0.5, &[a(0)]);
    f.add(-0.5, &[b(0)]);
    f.add(0.5, &[a(0), b(0)]);
    f.add(0.5, &[a(0), b(1)]);
    f.add(0.5, &[a(1), b(0)]);
    f.add(-0.5, &[a(1), b(1)]);
    f
}

/// Probability that Bob's second measurement reproduces Alice's output.
/// Per input pair, with `A = A_a0`, `B = B_b0`, `P = B'_ab0`, summing the
/// sequential probabilities `⟨A_x ⊗ B_y P_x' B_y⟩` over `y` and `x = x'`
/// gives `1 − A − Q + 2AQ` with `Q = P − BP − PB + 2BPB`.
pub fn p2_functional() -> Functional {
    let (ga, gb, gp) = (Generator::alice, Generator::bob, Generator::guess);
    let mut f = Functional::default();
    for a in 0..2u8 {
        for b in 0..2u8 {
            let (x, y, p) = (ga(a), gb(b), gp(a, b));
            let q: [(f64, Vec<Generator>); 4] = [
                (1.0, vec![p]),
                (-1.0, vec![y, p]),
                (-1.0, vec![p, y]),
                (2.0, vec![y, p, y]),
            ];
            f.add(0.25, &[]);
            f.add(-0.25, &[x]);
            for (c, w) in &q {
                f.add(-0.25 * c, w);
                let mut aw = vec![x];
                aw.extend_from_slice(w);
                f.add(0.5 * c, &aw);
            }
        }
    }
    f
}

/// One equality class of moment-matrix cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentClass {
    #[serde(serialize_with = "ser_display")]
    pub key: Monomial,
    /// Cells `(i, j)` with `i ≤ j`.
    pub cells: Vec<(usize, usize)>,
}

fn ser_display<S: serde::Serializer, T: fmt::Display>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Level-`k` moment matrix structure with the `P1` and `P2` functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct NpaInstance {
    level: usize,
    monomials: Vec<Monomial>,
    classes: Vec<MomentClass>,
    class_index: BTreeMap<Monomial, usize>,
    normalization: usize,
    p1: Functional,
    p2: Functional,
}

pub const MAX_LEVEL: usize = 3;

/// All canonical words of length at most `level`, shortest first, then in
/// generator order.
pub fn monomials(level: usize) -> Vec<Monomial> {
    let mut out = vec![Monomial::identity()];
    let mut seen: std::collections::BTreeSet<Monomial> = out.iter().cloned().collect();
    let mut frontier = vec![Monomial::identity()];
    for _ in 0..level {
        let mut next = Vec::new();
        for w in &frontier {
            for g in GENERATORS {
                let mut raw = w.0.clone();
                raw.push(g);
                if let Some(c) = canonicalize(&Monomial(raw)) {
                    if c.len() == w.len() + 1 && seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
        }
        next.sort();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn build_instance(level: usize) -> Result<NpaInstance> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::UnsupportedLevel(level));
    }
    let monomials = monomials(level);
    let n = monomials.len();
    let mut class_index: BTreeMap<Monomial, usize> = BTreeMap::new();
    let mut classes: Vec<MomentClass> = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            let key = class_key(&monomials[i].adjoint().concat(&monomials[j]))
                .ok_or_else(|| Error::Numerical("orthogonal cell in a projector-only alphabet".into()))?;
            let idx = *class_index.entry(key.clone()).or_insert_with(|| {
                classes.push(MomentClass { key, cells: Vec::new() });
                classes.len() - 1
            });
            classes[idx].cells.push((i, j));
        }
    }
    let normalization = class_index[&Monomial::identity()];
    Ok(NpaInstance {
        level,
        monomials,
        classes,
        class_index,
        normalization,
        p1: p1_functional(),
        p2: p2_functional(),
    })
}

/// Result of one bound computation.
#[derive(Debug, Clone, PartialEq)]
pub struct P2Bound {
    /// Certified bound clipped at 1.
    pub bound: f64,
    pub raw_bound: f64,
    pub objective: f64,
    pub gap: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub method: Method,
    pub warm: Option<AdmmState>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpaOptions {
    pub pin: PinMode,
    pub ipm: SolverOptions,
    pub admm: AdmmOptions,
    /// Levels above this use ADMM instead of the interior-point method.
    pub ipm_max_level: usize,
}

impl Default for NpaOptions {
    fn default() -> Self {
        Self {
            pin: PinMode::Equal,
            ipm: SolverOptions::default(),
            admm: AdmmOptions {
                tol: 5e-5,
                max_iter: 20_000,
                sigma: 0.1,
                check_every: 50,
                anderson: 5,
                ..AdmmOptions::default()
            },
            ipm_max_level: 2,
        }
    }
}

impl NpaInstance {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn classes(&self) -> &[MomentClass] {
        &self.classes
    }

    pub fn normalization_class(&self) -> usize {
        self.normalization
    }

    pub fn class_of_word(&self, word: &Monomial) -> Option<usize> {
        class_key(word).and_then(|k| self.class_index.get(&k).copied())
    }

    pub fn p1(&self) -> &Functional {
        &self.p1
    }

    pub fn p2(&self) -> &Functional {
        &self.p2
    }

    /// Class coefficients of `f`, plus the terms with no class in this instance.
    pub fn class_coefficients(&self, f: &Functional) -> (Vec<f64>, Vec<(Monomial, f64)>) {
        let mut coeffs = vec![0.0; self.classes.len()];
        let mut missing = Vec::new();
        for (m, c) in f.terms() {
            match self.class_index.get(m) {
                Some(&w) => coeffs[w] += c,
                None => missing.push((m.clone(), c)),
            }
        }
        (coeffs, missing)
    }

    fn moment_problem(&self, objective: &Functional, pin: Option<(f64, PinMode)>) -> Result<(MomentProblem, f64)> {
        let cells: Vec<Vec<(usize, usize)>> = self.classes.iter().map(|c| c.cells.clone()).collect();
        let mut fixed = vec![None; self.classes.len()];
        fixed[self.normalization] = Some(1.0);
        let (obj, missing) = self.class_coefficients(objective);
        // Every word of projectors has |⟨w⟩| ≤ 1.
        let slack: f64 = missing.iter().map(|(_, c)| c.abs()).sum();
        let pin = match pin {
            Some((rhs, mode)) => {
                let (g, miss) = self.class_coefficients(&self.p1);
                if let Some((m, _)) = miss.first() {
                    return Err(Error::MissingMoment(m.to_string()));
                }
                Some(LinearPin { coeffs: g, rhs, mode })
            }
            None => None,
        };
        Ok((MomentProblem::new(self.monomials.len(), &cells, fixed, obj, pin)?, slack))
    }

    /// Moment form of "maximize `P2` subject to `P1 = p1_target`" (or `≥`), and
    /// the bound contribution of `P2` terms absent from the matrix.
    pub fn p2_problem(&self, p1_target: f64, mode: PinMode) -> Result<(MomentProblem, f64)> {
        self.moment_problem(&self.p2, Some((p1_target, mode)))
    }

    /// Moment form of "maximize `P1`".
    pub fn p1_problem(&self) -> Result<MomentProblem> {
        let (mp, slack) = self.moment_problem(&self.p1, None)?;
        if slack != 0.0 {
            return Err(Error::MissingMoment("P1 term".into()));
        }
        Ok(mp)
    }

    /// Certified maximum of the CHSH score at this level.
    pub fn max_p1(&self, opts: &SolverOptions) -> Result<f64> {
        let sol = self.p1_problem()?.solve_ipm(opts)?;
        Ok(sol.bound)
    }

    /// Certified upper bound on `P2` given `P1`, clipped at 1.
    pub fn upper_bound_p2(&self, p1_target: f64, opts: &NpaOptions, warm: Option<&AdmmState>) -> Result<P2Bound> {
        let t = tsirelson_score();
        if !(0.75..=t + 1e-12).contains(&p1_target) {
            return Err(Error::OutOfRange(format!("P1 target {p1_target} outside [0.75, {t}]")));
        }
        let (mp, slack) = self.p2_problem(p1_target, opts.pin)?;
        let sol = if self.level <= opts.ipm_max_level && opts.pin == PinMode::Equal {
            mp.solve_ipm(&opts.ipm)?
        } else {
            mp.solve_admm(&opts.admm, warm)?
        };
        let raw = sol.bound + slack;
        if !raw.is_finite() {
            return Err(Error::Uncertified(format!(
                "non-finite bound (primal residual {:e}, dual residual {:e})",
                sol.primal_residual, sol.dual_residual
            )));
        }
        Ok(P2Bound {
            bound: raw.min(1.0),
            raw_bound: raw,
            objective: sol.objective + slack,
            gap: sol.gap,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
            status: sol.status,
            method: sol.method,
            warm: sol.state,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Term {
            word: String,
            coef: f64,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            level: usize,
            monomials: Vec<String>,
            normalization_class: usize,
            classes: &'a [MomentClass],
            p1: Vec<Term>,
            p2: Vec<Term>,
        }
        let terms = |f: &Functional| {
            f.terms()
                .map(|(m, c)| Term {
                    word: m.to_string(),
                    coef: c,
                })
                .collect()
        };
        Ok(serde_json::to_string_pretty(&Dump {
            level: self.level,
            monomials: self.monomials.iter().map(|m| m.to_string()).collect(),
            normalization_class: self.normalization,
            classes: &self.classes,
            p1: terms(&self.p1),
            p2: terms(&self.p2),
        })?)
    }
}

/// A CHSH strategy extended with Bob's second measurement `B'_ab0` on his side.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialStrategy {
    strategy: Strategy,
    guess: [[CMatrix; 2]; 2],
}

impl SequentialStrategy {
    pub fn new(strategy: Strategy, guess: [[CMatrix; 2]; 2]) -> Result<Self> {
        strategy.validate()?;
        if strategy.alice().len() != 2 || strategy.bob().len() != 2 {
            return Err(Error::InvalidStrategy("expected two inputs per party".into()));
        }
        let db = strategy.state().dim_b();
        for p in guess.iter().flatten() {
            let complement = identity(db) - p;
            Strategy::new(strategy.state().clone(), strategy.alice().to_vec(), vec![vec![p.clone(), complement]])?;
        }
        Ok(Self { strategy, guess })
    }

    /// Optimal CHSH strategy with Bob guessing `y ⊕ (a ∧ b)`.
    pub fn chsh_optimal_guess() -> Self {
        let s = chsh_optimal();
        let g = |a: usize, b: usize| s.bob()[b][a & b].clone();
        let guess = [[g(0, 0), g(0, 1)], [g(1, 0), g(1, 1)]];
        Self::new(s, guess).expect("static strategy")
    }

    pub fn with_guess(strategy: Strategy, guess: [[CMatrix; 2]; 2]) -> Result<Self> {
        Self::new(strategy, guess)
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    fn operator(&self, g: &Generator) -> CMatrix {
        let st = self.strategy.state();
        let (da, db) = (st.dim_a(), st.dim_b());
        let (local_a, local_b) = match g.party {
            Party::Alice => (self.strategy.alice()[g.input.0 as usize][g.output as usize].clone(), identity(db)),
            Party::BobStage1 => (identity(da), self.strategy.bob()[g.input.0 as usize][g.output as usize].clone()),
            Party::BobStage2 => {
                let p = &self.guess[g.input.0 as usize][g.input.1 as usize];
                (identity(da), if g.output == 0 { p.clone() } else { identity(db) - p })
            }
        };
        tensor(&local_a, &local_b).expect("small dims")
    }

    /// Real part of `⟨ψ| w |ψ⟩`.
    pub fn moment(&self, w: &Monomial) -> f64 {
        let st: &MixedState = self.strategy.state();
        let op = w.0.iter().fold(identity(st.dim()), |acc, g| acc * self.operator(g));
        st.expect(&op)
    }

    /// Moment matrix `Γ_ij = Re⟨O_i† O_j⟩` computed cell by cell.
    pub fn moment_matrix(&self, inst: &NpaInstance) -> nalgebra::DMatrix<f64> {
        let n = inst.monomials.len();
        let ops: Vec<CMatrix> = inst
            .monomials
            .iter()
            .map(|w| {
                let dim = self.strategy.state().dim();
                w.0.iter().fold(identity(dim), |acc, g| acc * self.operator(g))
            })
            .collect();
        let st = self.strategy.state();
        nalgebra::DMatrix::from_fn(n, n, |i, j| st.expect(&(ops[i].adjoint() * &ops[j])))
    }

    /// Class values of this strategy in `inst`.
    pub fn moments(&self, inst: &NpaInstance) -> Vec<f64> {
        inst.classes.iter().map(|c| self.moment(&c.key)).collect()
    }
}

/// One row of the curve table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub p1: f64,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub level: usize,
    pub gap: f64,
    pub dual_residual: f64,
    pub status: SolveStatus,
}

impl CurvePoint {
    /// True when the solver converged or the two bounds meet, which pins the
    /// value even if the solver stalled on a degenerate face.
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Optimal || self.upper_bound - self.lower_bound <= 1e-9
    }
}

/// Lower bound on `P2` achieved by the shared-coin mixture with score `p1`.
pub fn lower_bound_p2(p1: f64) -> Result<f64> {
    let t = tsirelson_score();
    let r = ((t - p1) / (t - 0.75)).clamp(0.0, 1.0);
    if !(0.75 - 1e-12..=t + 1e-12).contains(&p1) {
        return Err(Error::OutOfRange(format!("P1 {p1} outside [0.75, {t}]")));
    }
    Ok(chsh_mixed(r)?.1)
}

/// The P1 grid 0.75, 0.7625, …, 0.85.
pub fn default_grid() -> Vec<f64> {
    (0..9).map(|k| 0.75 + 0.0125 * k as f64).collect()
}

/// Upper and lower `P2` bounds along `grid`. Every point is solved from a cold
/// start so rows do not depend on the grid order.
pub fn chsh_curve(grid: &[f64], level: usize, opts: &NpaOptions) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() {
        return Err(Error::OutOfRange("empty P1 grid".into()));
    }
    let inst = build_instance(level)?;
    let mut out = Vec::with_capacity(grid.len());
    for &p1 in grid {
        let lower = lower_bound_p2(p1)?;
        let ub = inst.upper_bound_p2(p1, opts, None)?;
        out.push(CurvePoint {
            p1,
            upper_bound: ub.bound,
            lower_bound: lower,
            level,
            gap: ub.gap,
            dual_residual: ub.dual_residual,
            status: ub.status,
        });
    }
    Ok(out)
}

pub const CURVE_HEADER: &str = "p1,upper_bound,lower_bound,level,gap,dual_residual";

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut w: W) -> Result<()> {
    writeln!(w, "{CURVE_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            sig9(p.p1),
            sig9(p.upper_bound),
            sig9(p.lower_bound),
            p.level,
            sig9(p.gap),
            sig9(p.dual_residual)
        )?;
    }
    Ok(())
}

/// The curve as a JSON array of objects with the CSV column names plus the
/// solver status.
pub fn write_curve_json<W: Write>(points: &[CurvePoint], mut w: W) -> Result<()> {
    let rows: Vec<serde_json::Value> = points
        .iter()
        .map(|p| {
            serde_json::json!({
                "p1": sig9_value(p.p1),
                "upper_bound": sig9_value(p.upper_bound),
                "lower_bound": sig9_value(p.lower_bound),
                "level": p.level,
                "gap": sig9_value(p.gap),
                "dual_residual": sig9_value(p.dual_residual),
                "status": p.status,
            })
        })
        .collect();
    serde_json::to_writer_pretty(&mut w, &rows)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{pauli_x, pauli_y, plus_projector};
    use approx::assert_abs_diff_eq;

    fn w(s: &str) -> Monomial {
        Monomial::parse(s).unwrap()
    }

    #[test]
    fn canonical_examples() {
        assert_eq!(canonicalize(&w("A00 A00")).unwrap(), w("A00"));
        assert_eq!(canonicalize(&w("B00 A00")).unwrap(), w("A00 B00"));
        assert_eq!(canonicalize(&w("A00 A10")).unwrap(), w("A00 A10"));
        assert_eq!(canonicalize(&w("B00 A10 Bp010 A10 B00")).unwrap(), w("A10 B00 Bp010 B00"));
        let zero = Monomial(vec![
            Generator::alice(0),
            Generator {
                party: Party::Alice,
                input: (0, 0),
                output: 1,
            },
        ]);
        assert_eq!(canonicalize(&zero), None);
    }

    /// All words over the alphabet, brute force.
    fn all_words(max_len: usize) -> Vec<Monomial> {
        let mut out = vec![Monomial::identity()];
        let mut layer = vec![Monomial::identity()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for m in &layer {
                for g in GENERATORS {
                    let mut v = m.0.clone();
                    v.push(g);
                    next.push(Monomial(v));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    #[test]
    fn canonicalize_idempotent_exhaustive() {
        for m in all_words(6) {
            let c = canonicalize(&m).unwrap();
            assert_eq!(canonicalize(&c).unwrap(), c);
            assert!(c.is_canonical());
        }
    }

    #[test]
    fn monomial_counts_match_enumeration() {
        for level in 1..=3 {
            let mut set: std::collections::BTreeSet<Monomial> = std::collections::BTreeSet::new();
            for m in all_words(level) {
                set.insert(canonicalize(&m).unwrap());
            }
            assert_eq!(monomials(level).len(), set.len(), "level {level}");
        }
        assert_eq!(monomials(1).len(), 9);
        assert!(build_instance(0).is_err());
        assert!(build_instance(4).is_err());
    }

    #[test]
    fn normalization_class_is_identity() {
        let inst = build_instance(2).unwrap();
        let c = &inst.classes()[inst.normalization_class()];
        assert_eq!(c.key, Monomial::identity());
        for &(i, j) in &c.cells {
            let prod = canonicalize(&inst.monomials()[i].adjoint().concat(&inst.monomials()[j])).unwrap();
            assert!(prod.is_empty());
        }
        assert!(c.cells.contains(&(0, 0)));
    }

    fn guesses() -> Vec<SequentialStrategy> {
        let s = chsh_optimal();
        let plus_y = plus_projector(&pauli_y());
        let plus_x = plus_projector(&pauli_x());
        vec![
            SequentialStrategy::chsh_optimal_guess(),
            SequentialStrategy::with_guess(s.clone(), [[identity(2), identity(2)], [identity(2), identity(2)]]).unwrap(),
            SequentialStrategy::with_guess(s, [[plus_y.clone(), plus_x.clone()], [plus_x, plus_y]]).unwrap(),
        ]
    }

    #[test]
    fn p1_functional_gives_tsirelson() {
        for sq in guesses() {
            let v = p1_functional().evaluate(|m| sq.moment(m));
            assert_abs_diff_eq!(v, tsirelson_score(), epsilon = 1e-12);
        }
    }

    #[test]
    fn p2_functional_matches_direct_probability() {
        for sq in guesses() {
            let s = sq.strategy();
            let st = s.state();
            let db = st.dim_b();
            // Direct sequential probability: Σ_{a,b,x,y} ¼ ⟨A_ax ⊗ B_by P_abx B_by⟩.
            let mut direct = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    for x in 0..2 {
                        let p = if x == 0 {
                            sq.guess[a][b].clone()
                        } else {
                            identity(db) - &sq.guess[a][b]
                        };
                        for y in 0..2 {
                            let by = &s.bob()[b][y];
                            let op = tensor(&s.alice()[a][x], &(by * &p * by)).unwrap();
                            direct += 0.25 * st.expect(&op);
                        }
                    }
                }
            }
            let v = p2_functional().evaluate(|m| sq.moment(m));
            assert_abs_diff_eq!(v, direct, epsilon = 1e-12);
        }
        let v = p2_functional().evaluate(|m| SequentialStrategy::chsh_optimal_guess().moment(m));
        assert_abs_diff_eq!(v, tsirelson_score(), epsilon = 1e-9);
    }

    #[test]
    fn strategy_moments_are_feasible() {
        for level in 1..=2 {
            let inst = build_instance(level).unwrap();
            for sq in guesses() {
                let gamma = sq.moment_matrix(&inst);
                for c in inst.classes() {
                    let v0 = gamma[c.cells[0]];
                    for &(i, j) in &c.cells {
                        assert!((gamma[(i, j)] - v0).abs() < 1e-12, "class {} inconsistent", c.key);
                    }
                }
                let y = sq.moments(&inst);
                let (mp, _) = inst.p2_problem(tsirelson_score(), PinMode::Equal).unwrap();
                assert!(mp.feasibility_residual(&y) <= 1e-8);
            }
        }
    }

    #[test]
    fn level1_tsirelson() {
        let inst = build_instance(1).unwrap();
        let v = inst.max_p1(&SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(v, tsirelson_score(), epsilon = 1e-6);
        assert!(v >= tsirelson_score() - 1e-9);
    }

    #[test]
    fn curve_csv_shape() {
        let pts = chsh_curve(&[0.75, 0.8], 1, &NpaOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&pts, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CURVE_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.75,1,1,1,"));
        assert!(chsh_curve(&[], 1, &NpaOptions::default()).is_err());
        assert!(chsh_curve(&[0.9], 1, &NpaOptions::default()).is_err());
    }

    #[test]
    fn lower_line_values() {
        let r2 = 2f64.sqrt();
        assert_abs_diff_eq!(lower_bound_p2(0.85).unwrap(), 1.0 + 0.75 * r2 - r2 * 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(lower_bound_p2(0.85).unwrap(), 0.858_578_644, epsilon = 1e-9);
        assert_abs_diff_eq!(lower_bound_p2(0.75).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn instance_json_lists_classes() {
        let inst = build_instance(1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        assert_eq!(v["monomials"].as_array().unwrap().len(), 9);
        assert_eq!(v["classes"].as_array().unwrap().len(), inst.classes().len());
        assert_eq!(v["monomials"][0], "I");
    }
}
