//! Rigidity inequalities for Magic Square reflection strategies and the exact
//! guessing probability of a post-measurement adversary.
//!
//! Pure-state statements are evaluated on mixed states by linear extension:
//! `⟨ψ|M|ψ⟩` becomes `Tr[ρ M]` and `‖M|ψ⟩‖` becomes `√Tr[ρ M†M]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::games::{expected_score, magic_square, correlation_from_strategy};
use crate::qsim::{
    c, helstrom_guess, identity, minus_projector, partial_trace_a, plus_projector, tensor,
    trace_distance, CMatrix, HermOp,
};
use crate::strategies::{depolarize, magic_square_canonical, strategy_from_reflection, ReflectionStrategy, CONVERSION_TOL};

pub const SWEEP_HEADER: &str = "p,delta,max_anticomm_norm,max_prop_distance,guess_exact,guess_bound";

fn check_index(i: usize, what: &str) -> Result<()> {
    if i > 2 {
        return Err(Error::OutOfRange(format!("{what} index {i} outside 0..=2")));
    }
    Ok(())
}

fn check_pair(a: usize, b: usize, a2: usize, b2: usize) -> Result<()> {
    for (i, n) in [(a, "a"), (b, "b"), (a2, "a'"), (b2, "b'")] {
        check_index(i, n)?;
    }
    if a == a2 || b == b2 {
        return Err(Error::IndexClash(format!(
            "need a != a' and b != b', got ({a},{b}) and ({a2},{b2})"
        )));
    }
    Ok(())
}

/// Spectral projector `F^z = (I + (−1)^z F)/2` of an involution.
fn spectral(m: &CMatrix, z: u8) -> CMatrix {
    if z == 0 {
        plus_projector(m)
    } else {
        minus_projector(m)
    }
}

fn alice_op(rs: &ReflectionStrategy, m: &CMatrix) -> CMatrix {
    tensor(m, &identity(rs.state().dim_b())).expect("dimensions checked by validation")
}

/// `δ_ij` from `Tr[ρ F_ij ⊗ G_ij] = 1 − 2δ_ij`.
pub fn losing_probabilities(rs: &ReflectionStrategy) -> Result<[[f64; 3]; 3]> {
    rs.validate(CONVERSION_TOL)?;
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, d) in row.iter_mut().enumerate() {
            let fg = tensor(rs.f(i, j), rs.g(i, j))?;
            *d = ((1.0 - rs.state().expect(&fg)) / 2.0).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Mean of the losing probabilities.
pub fn losing_probability(rs: &ReflectionStrategy) -> Result<f64> {
    Ok(losing_probabilities(rs)?.iter().flatten().sum::<f64>() / 9.0)
}

/// `‖F_ab ⊗ G_ab|ψ⟩ − |ψ⟩‖`.
pub fn check_consistency(rs: &ReflectionStrategy, a: usize, b: usize) -> Result<f64> {
    check_index(a, "a")?;
    check_index(b, "b")?;
    let fg = tensor(rs.f(a, b), rs.g(a, b))?;
    let n = fg.nrows();
    Ok(rs.state().vector_norm(&(fg - identity(n))))
}

/// `‖(F_ab F_a'b' + F_a'b' F_ab) ⊗ I |ψ⟩‖`.
pub fn check_anticommutation(rs: &ReflectionStrategy, a: usize, b: usize, a2: usize, b2: usize) -> Result<f64> {
    check_pair(a, b, a2, b2)?;
    let (f, f2) = (rs.f(a, b), rs.f(a2, b2));
    let anti = f * f2 + f2 * f;
    Ok(rs.state().vector_norm(&alice_op(rs, &anti)))
}

fn conditional_bob_state(rs: &ReflectionStrategy, rho: &CMatrix, kraus: &CMatrix) -> Result<HermOp> {
    let post = HermOp::hermitize(&(kraus * rho * kraus.adjoint()));
    partial_trace_a(&post, rs.state().dim_a(), rs.state().dim_b())
}

/// Bob's subnormalized states `Tr_A[(F^w_ab ⊗ G^z_a'b') ρ (F^w_ab ⊗ G^z_a'b')]`
/// for `w = 0, 1`.
pub fn post_measurement_pair(
    rs: &ReflectionStrategy,
    a: usize,
    b: usize,
    a2: usize,
    b2: usize,
    z: u8,
) -> Result<(HermOp, HermOp)> {
    check_pair(a, b, a2, b2)?;
    if z > 1 {
        return Err(Error::OutOfRange(format!("outcome bit {z}")));
    }
    let rho = rs.state().density().into_matrix();
    let g = spectral(rs.g(a2, b2), z);
    let mut pair = [0u8, 1].iter().map(|&w| {
        let k = tensor(&spectral(rs.f(a, b), w), &g)?;
        conditional_bob_state(rs, &rho, &k)
    });
    let p0 = pair.next().expect("two outcomes")?;
    let p1 = pair.next().expect("two outcomes")?;
    Ok((p0, p1))
}

/// Optimal probability that Bob, having played column `b` and kept his output
/// `y` and post-measurement system, guesses Alice's bit `x_b'` given `b'`.
pub fn adversary_guess_exact(rs: &ReflectionStrategy, a: usize, b: usize, b2: usize) -> Result<f64> {
    for (i, n) in [(a, "a"), (b, "b"), (b2, "b'")] {
        check_index(i, n)?;
    }
    if b == b2 {
        return Err(Error::IndexClash(format!("need b != b', got {b} twice")));
    }
    let s = strategy_from_reflection(rs)?;
    let rho = rs.state().density().into_matrix();
    let pairs = s.bob()[b]
        .iter()
        .map(|proj| {
            let k0 = tensor(&spectral(rs.f(a, b2), 0), proj)?;
            let k1 = tensor(&spectral(rs.f(a, b2), 1), proj)?;
            Ok((conditional_bob_state(rs, &rho, &k0)?, conditional_bob_state(rs, &rho, &k1)?))
        })
        .collect::<Result<Vec<_>>>()?;
    helstrom_guess(&pairs)
}

/// `min(1, 1/2 + 9√δ)`.
pub fn guess_bound(delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange(format!("losing probability {delta} outside [0,1]")));
    }
    Ok((0.5 + 9.0 * delta.sqrt()).min(1.0))
}

/// One link of the chain from `F_00 F_11 ⊗ I|ψ⟩` to `−F_11 F_00 ⊗ I|ψ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    /// Distance between consecutive vectors.
    pub distance: f64,
    /// `2√δ_ij` for the substituted pair, or 0 for an algebraic identity.
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub steps: Vec<ChainStep>,
    /// `‖F_00 F_11 ⊗ I|ψ⟩ + F_11 F_00 ⊗ I|ψ⟩‖`.
    pub norm: f64,
    /// `Σ_ij 2√δ_ij`.
    pub budget: f64,
}

impl ChainReport {
    /// Largest amount by which a step exceeds its allowance.
    pub fn worst_excess(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.distance - s.allowance)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(self.norm - self.budget)
    }
}

/// Walks the thirteen substitutions that move `F_00 F_11` across to
/// `−F_11 F_00`, one row or column relation or one consistency swap at a time.
pub fn anticommutation_chain(rs: &ReflectionStrategy) -> Result<ChainReport> {
    let deltas = losing_probabilities(rs)?;
    let eps = |i: usize, j: usize| 2.0 * deltas[i][j].sqrt();
    let f = |i, j| rs.f(i, j).clone();
    let g = |i, j| rs.g(i, j).clone();
    let ia = identity(rs.state().dim_a());
    let ib = identity(rs.state().dim_b());
    let k = |x: CMatrix, y: CMatrix| tensor(&x, &y).expect("dimensions checked by validation");
    let neg = |m: CMatrix| m * c(-1.0, 0.0);

    // (vector operator, allowance of the step that produced it)
    let links: Vec<(CMatrix, f64)> = vec![
        (k(f(0, 0) * f(1, 1), ib.clone()), 0.0),
        (k(f(0, 0), g(1, 1)), eps(1, 1)),
        (neg(k(f(0, 2) * f(0, 1), g(2, 1) * g(0, 1))), 0.0),
        (neg(k(f(0, 2), g(2, 1))), eps(0, 1)),
        (neg(k(ia.clone(), g(2, 1) * g(0, 2))), eps(0, 2)),
        (k(ia.clone(), g(2, 1) * g(2, 2) * g(1, 2)), 0.0),
        (k(f(1, 2), g(2, 1) * g(2, 2)), eps(1, 2)),
        (k(f(1, 2) * f(2, 2), g(2, 1)), eps(2, 2)),
        (k(f(1, 2) * f(2, 2) * f(2, 1), ib.clone()), eps(2, 1)),
        (k(f(1, 2) * f(2, 0), ib.clone()), 0.0),
        (k(f(1, 2), g(2, 0)), eps(2, 0)),
        (neg(k(f(1, 1) * f(1, 0), g(0, 0) * g(1, 0))), 0.0),
        (neg(k(f(1, 1), g(0, 0))), eps(1, 0)),
        (neg(k(f(1, 1) * f(0, 0), ib.clone())), eps(0, 0)),
    ];
    let state = rs.state();
    let steps = links
        .windows(2)
        .map(|w| ChainStep {
            distance: state.vector_norm(&(&w[0].0 - &w[1].0)),
            allowance: w[1].1,
        })
        .collect();
    let anti = k(f(0, 0) * f(1, 1) + f(1, 1) * f(0, 0), ib);
    Ok(ChainReport {
        steps,
        norm: state.vector_norm(&anti),
        budget: deltas.iter().flatten().map(|d| 2.0 * d.sqrt()).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub delta: f64,
    pub delta_ij: [[f64; 3]; 3],
    /// Indexed `3a + b`.
    pub consistency_norms: Vec<f64>,
    /// Over ordered `(a, b, a', b')` with `a != a'`, `b != b'`, lexicographic.
    pub anticomm_norms: Vec<f64>,
    /// Over `(a, b, a', b', z)` in the same order, `z` fastest.
    pub prop_distances: Vec<f64>,
    /// Largest [`adversary_guess_exact`] over `(a, b, b')`.
    pub guess_exact: f64,
    pub guess_bound: f64,
}

fn clash_free_quads() -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..3).flat_map(|a| {
        (0..3).flat_map(move |b| {
            (0..3)
                .filter(move |&a2| a2 != a)
                .flat_map(move |a2| (0..3).filter(move |&b2| b2 != b).map(move |b2| (a, b, a2, b2)))
        })
    })
}

impl RigidityReport {
    pub fn compute(rs: &ReflectionStrategy) -> Result<Self> {
        let delta_ij = losing_probabilities(rs)?;
        let delta = delta_ij.iter().flatten().sum::<f64>() / 9.0;
        let mut consistency_norms = Vec::with_capacity(9);
        for a in 0..3 {
            for b in 0..3 {
                consistency_norms.push(check_consistency(rs, a, b)?);
            }
        }
        let mut anticomm_norms = Vec::new();
        let mut prop_distances = Vec::new();
        for (a, b, a2, b2) in clash_free_quads() {
            anticomm_norms.push(check_anticommutation(rs, a, b, a2, b2)?);
            for z in 0..2 {
                let (p0, p1) = post_measurement_pair(rs, a, b, a2, b2, z)?;
                prop_distances.push(trace_distance(&p0, &p1)?);
            }
        }
        let mut guess_exact = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                for b2 in (0..3).filter(|&b2| b2 != b) {
                    guess_exact = guess_exact.max(adversary_guess_exact(rs, a, b, b2)?);
                }
            }
        }
        Ok(Self {
            delta,
            delta_ij,
            consistency_norms,
            anticomm_norms,
            prop_distances,
            guess_exact,
            guess_bound: guess_bound(delta)?,
        })
    }

    pub fn max_anticomm_norm(&self) -> f64 {
        self.anticomm_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_prop_distance(&self) -> f64 {
        self.prop_distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Expected Magic Square score, computed from the projective form.
pub fn score(rs: &ReflectionStrategy) -> Result<f64> {
    expected_score(&magic_square(), &correlation_from_strategy(&strategy_from_reflection(rs)?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub report: RigidityReport,
}

/// Reports for the canonical strategy depolarized at each `p`.
pub fn depolarization_sweep(ps: &[f64]) -> Result<Vec<SweepRow>> {
    if ps.is_empty() {
        return Err(Error::OutOfRange("empty depolarization list".into()));
    }
    let canonical = magic_square_canonical();
    ps.iter()
        .map(|&p| {
            let rs = depolarize(&canonical, p)?;
            Ok(SweepRow { p, report: RigidityReport::compute(&rs)? })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        let rep = &r.report;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig9(r.p),
            sig9(rep.delta),
            sig9(rep.max_anticomm_norm()),
            sig9(rep.max_prop_distance()),
            sig9(rep.guess_exact),
            sig9(rep.guess_bound)
        )?;
    }
    Ok(())
}

pub fn write_sweep_json<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    let value: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            let rep = &r.report;
            serde_json::json!({
                "p": crate::fmt::sig9_value(r.p),
                "delta": crate::fmt::sig9_value(rep.delta),
                "max_anticomm_norm": crate::fmt::sig9_value(rep.max_anticomm_norm()),
                "max_prop_distance": crate::fmt::sig9_value(rep.max_prop_distance()),
                "guess_exact": crate::fmt::sig9_value(rep.guess_exact),
                "guess_bound": crate::fmt::sig9_value(rep.guess_bound),
            })
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &value)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_is_perfect() {
        let rs = magic_square_canonical();
        let d = losing_probabilities(&rs).unwrap();
        assert!(d.iter().flatten().all(|x| x.abs() < 1e-12));
        for a in 0..3 {
            for b in 0..3 {
                assert!(check_consistency(&rs, a, b).unwrap() < 1e-9);
            }
        }
        for (a, b, a2, b2) in clash_free_quads() {
            assert!(check_anticommutation(&rs, a, b, a2, b2).unwrap() < 1e-9);
        }
        assert!((adversary_guess_exact(&rs, 0, 0, 1).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn quad_count() {
        assert_eq!(clash_free_quads().count(), 36);
    }

    #[test]
    fn index_clashes() {
        let rs = magic_square_canonical();
        assert!(matches!(check_anticommutation(&rs, 0, 0, 0, 1), Err(Error::IndexClash(_))));
        assert!(matches!(check_anticommutation(&rs, 0, 1, 2, 1), Err(Error::IndexClash(_))));
        assert!(matches!(post_measurement_pair(&rs, 1, 1, 1, 2, 0), Err(Error::IndexClash(_))));
        assert!(matches!(adversary_guess_exact(&rs, 0, 2, 2), Err(Error::IndexClash(_))));
        assert!(check_consistency(&rs, 3, 0).is_err());
    }

    #[test]
    fn guess_bound_values() {
        assert_eq!(guess_bound(0.0).unwrap(), 0.5);
        assert!((guess_bound(1e-4).unwrap() - 0.59).abs() < 1e-12);
        assert_eq!(guess_bound(1.0 / 324.0).unwrap(), 1.0);
        assert_eq!(guess_bound(0.5).unwrap(), 1.0);
        assert!(guess_bound(-0.1).is_err());
        assert!(guess_bound(1.5).is_err());
    }

    #[test]
    fn chain_exact_steps_vanish() {
        let rs = depolarize(&magic_square_canonical(), 0.07).unwrap();
        let chain = anticommutation_chain(&rs).unwrap();
        assert_eq!(chain.steps.len(), 13);
        for s in &chain.steps {
            if s.allowance == 0.0 {
                assert!(s.distance < 1e-9, "{s:?}");
            }
        }
        assert!(chain.worst_excess() < 1e-9);
    }

    #[test]
    fn sweep_csv_shape() {
        let rows = depolarization_sweep(&[0.0, 0.1]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,0,0,0.5,0.5"), "{}", lines[1]);
    }
}
