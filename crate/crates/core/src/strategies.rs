//! Concrete quantum strategies: optimal CHSH, the coin-mixing strategy that
//! gives the lower-bound line, the canonical Magic Square reflection strategy,
//! and depolarizing noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{ms_bit, MS_ALICE_OUTPUTS, MS_BOB_OUTPUTS};
use crate::qsim::{
    c, identity, max_abs_diff, minus_projector, pauli_x, pauli_y, pauli_z, plus_projector, tensor,
    CMatrix, CVector, MatrixRecord, MixedState, PureState,
};

/// Tolerance for projector and completeness checks on a [`Strategy`].
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Tolerance for the algebraic relations of a [`ReflectionStrategy`].
pub const REFLECTION_TOL: f64 = 1e-10;
/// Violations above this abort conversion to projective measurements.
pub const CONVERSION_TOL: f64 = 1e-8;

/// `(2 + √2)/4`, the optimal quantum CHSH score.
pub fn tsirelson_score() -> f64 {
    (2.0 + 2f64.sqrt()) / 4.0
}

/// A bipartite strategy: a state (pure, or an ensemble of pure states) and
/// projective measurement families `alice[a][x]`, `bob[b][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    state: MixedState,
    alice: Vec<Vec<CMatrix>>,
    bob: Vec<Vec<CMatrix>>,
}

fn check_family(family: &[Vec<CMatrix>], dim: usize, who: &str, tol: f64) -> Result<()> {
    let outputs = family
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidStrategy(format!("{who} has no inputs")))?;
    for (input, povm) in family.iter().enumerate() {
        if povm.len() != outputs || outputs == 0 {
            return Err(Error::InvalidStrategy(format!(
                "{who} input {input} has {} outcomes, expected {outputs}",
                povm.len()
            )));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for (out, p) in povm.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{who} projector ({input},{out}) is {}x{}, expected {dim}x{dim}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            let herm = max_abs_diff(p, &p.adjoint());
            let idem = max_abs_diff(&(p * p), p);
            if herm > tol || idem > tol {
                return Err(Error::InvalidStrategy(format!(
                    "{who} operator ({input},{out}) is not a projector (hermiticity {herm:e}, idempotence {idem:e})"
                )));
            }
            sum += p;
        }
        let dev = max_abs_diff(&sum, &identity(dim));
        if dev > tol {
            return Err(Error::InvalidStrategy(format!(
                "{who} input {input} does not sum to identity (deviation {dev:e})"
            )));
        }
    }
    Ok(())
}

impl Strategy {
    pub fn new(state: MixedState, alice: Vec<Vec<CMatrix>>, bob: Vec<Vec<CMatrix>>) -> Result<Self> {
        let s = Self { state, alice, bob };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_family(&self.alice, self.state.dim_a(), "Alice", PROJECTOR_TOL)?;
        check_family(&self.bob, self.state.dim_b(), "Bob", PROJECTOR_TOL)
    }

    pub fn state(&self) -> &MixedState {
        &self.state
    }

    pub fn alice(&self) -> &[Vec<CMatrix>] {
        &self.alice
    }

    pub fn bob(&self) -> &[Vec<CMatrix>] {
        &self.bob
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&StrategyRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: StrategyRecord = serde_json::from_str(s)?;
        Strategy::try_from(&rec)
    }
}

/// Optimal CHSH strategy on `|Φ⁺⟩`: Alice measures `X` / `Z`, Bob
/// `(X+Z)/√2` / `(X−Z)/√2`. Outcome 0 is the `+1` eigenspace.
pub fn chsh_optimal() -> Strategy {
    let s = 1.0 / 2f64.sqrt();
    let bob0 = (pauli_x() + pauli_z()) * c(s, 0.0);
    let bob1 = (pauli_x() - pauli_z()) * c(s, 0.0);
    let family = |obs: &[CMatrix]| -> Vec<Vec<CMatrix>> {
        obs.iter()
            .map(|o| vec![plus_projector(o), minus_projector(o)])
            .collect()
    };
    Strategy::new(
        MixedState::pure(PureState::maximally_entangled(2)),
        family(&[pauli_x(), pauli_z()]),
        family(&[bob0, bob1]),
    )
    .expect("static strategy")
}

/// Shared-coin mixture: with probability `mix_r` both players output 0, otherwise
/// they play [`chsh_optimal`] and Bob guesses `y ⊕ (a ∧ b)`. Returns the CHSH
/// score and Bob's guessing probability.
pub fn chsh_mixed(mix_r: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&mix_r) {
        return Err(Error::OutOfRange(format!("mixing probability {mix_r} outside [0,1]")));
    }
    let t = tsirelson_score();
    let p1 = 0.75 * mix_r + t * (1.0 - mix_r);
    let p2 = mix_r + t * (1.0 - mix_r);
    Ok((p1, p2))
}

/// The line `P2 = 1 + 3√2/4 − √2·P1` traced by [`chsh_mixed`].
pub fn chsh_lower_line(p1: f64) -> f64 {
    let r2 = 2f64.sqrt();
    1.0 + 3.0 * r2 / 4.0 - r2 * p1
}

/// Magic Square strategy given by ±1 observables: Alice's `f[a][b]` commute
/// along rows with row products `+I`; Bob's `g[a][b]` commute along columns
/// with column products `−I`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionStrategy {
    state: MixedState,
    f: Vec<Vec<CMatrix>>,
    g: Vec<Vec<CMatrix>>,
}

fn product(ops: &[&CMatrix], dim: usize) -> CMatrix {
    ops.iter().fold(identity(dim), |acc, m| acc * *m)
}

impl ReflectionStrategy {
    pub fn new(state: MixedState, f: Vec<Vec<CMatrix>>, g: Vec<Vec<CMatrix>>) -> Result<Self> {
        let rs = Self { state, f, g };
        rs.validate(REFLECTION_TOL)?;
        Ok(rs)
    }

    /// Largest deviation from the defining relations.
    pub fn relation_violation(&self) -> Result<f64> {
        let (da, db) = (self.state.dim_a(), self.state.dim_b());
        if self.f.len() != 3 || self.g.len() != 3 || self.f.iter().chain(&self.g).any(|r| r.len() != 3) {
            return Err(Error::InvalidStrategy("observable arrays must be 3x3".into()));
        }
        for (ops, d, who) in [(&self.f, da, "F"), (&self.g, db, "G")] {
            for row in ops.iter() {
                for m in row {
                    if m.nrows() != d || m.ncols() != d {
                        return Err(Error::DimensionMismatch(format!(
                            "{who} observable is {}x{}, expected {d}x{d}",
                            m.nrows(),
                            m.ncols()
                        )));
                    }
                }
            }
        }
        let mut worst = 0.0f64;
        let (ia, ib) = (identity(da), identity(db));
        for a in 0..3 {
            for b in 0..3 {
                let (f, g) = (&self.f[a][b], &self.g[a][b]);
                worst = worst.max(max_abs_diff(f, &f.adjoint()));
                worst = worst.max(max_abs_diff(g, &g.adjoint()));
                worst = worst.max(max_abs_diff(&(f * f), &ia));
                worst = worst.max(max_abs_diff(&(g * g), &ib));
            }
        }
        for a in 0..3 {
            let row: Vec<&CMatrix> = self.f[a].iter().collect();
            worst = worst.max(max_abs_diff(&product(&row, da), &ia));
            for b in 0..3 {
                for b2 in (b + 1)..3 {
                    let (x, y) = (&self.f[a][b], &self.f[a][b2]);
                    worst = worst.max(max_abs_diff(&(x * y), &(y * x)));
                }
            }
        }
        for b in 0..3 {
            let col: Vec<&CMatrix> = (0..3).map(|a| &self.g[a][b]).collect();
            worst = worst.max(max_abs_diff(&product(&col, db), &(-ib.clone())));
            for a in 0..3 {
                for a2 in (a + 1)..3 {
                    let (x, y) = (&self.g[a][b], &self.g[a2][b]);
                    worst = worst.max(max_abs_diff(&(x * y), &(y * x)));
                }
            }
        }
        Ok(worst)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let v = self.relation_violation()?;
        if v > tol {
            return Err(Error::InvalidStrategy(format!(
                "reflection relations violated by {v:e} (tolerance {tol:e})"
            )));
        }
        Ok(())
    }

    pub fn state(&self) -> &MixedState {
        &self.state
    }

    /// Alice's observable `F_ab`.
    pub fn f(&self, a: usize, b: usize) -> &CMatrix {
        &self.f[a][b]
    }

    /// Bob's observable `G_ab`.
    pub fn g(&self, a: usize, b: usize) -> &CMatrix {
        &self.g[a][b]
    }

    pub fn with_state(&self, state: MixedState) -> Result<Self> {
        if state.dim_a() != self.state.dim_a() || state.dim_b() != self.state.dim_b() {
            return Err(Error::DimensionMismatch("replacement state has a different shape".into()));
        }
        Ok(Self {
            state,
            f: self.f.clone(),
            g: self.g.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ReflectionRecord::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: ReflectionRecord = serde_json::from_str(s)?;
        ReflectionStrategy::try_from(&rec)
    }
}

/// Mermin–Peres square of two-qubit Pauli products on two Bell pairs:
///
/// ```text
///   X⊗I    I⊗X    X⊗X
///   I⊗Z    Z⊗I    Z⊗Z
///  -X⊗Z   -Z⊗X    Y⊗Y
/// ```
///
/// Every row multiplies to `+I` and every column to `−I`. All entries are real
/// symmetric, so Bob uses the same matrices: `(F ⊗ F)|Φ⟩ = |Φ⟩` on the
/// maximally entangled state of two 4-level systems.
pub fn magic_square_canonical() -> ReflectionStrategy {
    let i2 = identity(2);
    let k = |a: &CMatrix, b: &CMatrix| tensor(a, b).expect("small dims");
    let (x, y, z) = (pauli_x(), pauli_y(), pauli_z());
    let square = vec![
        vec![k(&x, &i2), k(&i2, &x), k(&x, &x)],
        vec![k(&i2, &z), k(&z, &i2), k(&z, &z)],
        vec![-k(&x, &z), -k(&z, &x), k(&y, &y)],
    ];
    ReflectionStrategy::new(
        MixedState::pure(PureState::maximally_entangled(4)),
        square.clone(),
        square,
    )
    .expect("static strategy")
}

/// Replaces the state by `(1−p)ρ + p·I/d`, leaving the observables unchanged.
pub fn depolarize(rs: &ReflectionStrategy, p: f64) -> Result<ReflectionStrategy> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("depolarizing probability {p} outside [0,1]")));
    }
    let noise = MixedState::maximally_mixed(rs.state.dim_a(), rs.state.dim_b());
    rs.with_state(rs.state.mix(&noise, p)?)
}

/// Projective measurements of a reflection strategy: `A_ax = ∏_b F^{x_b}_ab`
/// and `B_by = ∏_a G^{y_a}_ab`, with outputs in the Magic Square alphabet order.
pub fn strategy_from_reflection(rs: &ReflectionStrategy) -> Result<Strategy> {
    rs.validate(CONVERSION_TOL)?;
    let (da, db) = (rs.state.dim_a(), rs.state.dim_b());
    let spectral = |m: &CMatrix, bit: u8| if bit == 0 { plus_projector(m) } else { minus_projector(m) };
    let alice = (0..3)
        .map(|a| {
            MS_ALICE_OUTPUTS
                .iter()
                .map(|&x| {
                    (0..3).fold(identity(da), |acc, b| acc * spectral(&rs.f[a][b], ms_bit(x, b)))
                })
                .collect()
        })
        .collect();
    let bob = (0..3)
        .map(|b| {
            MS_BOB_OUTPUTS
                .iter()
                .map(|&y| {
                    (0..3).fold(identity(db), |acc, a| acc * spectral(&rs.g[a][b], ms_bit(y, a)))
                })
                .collect()
        })
        .collect();
    Strategy::new(rs.state.clone(), alice, bob)
}

/// Inverse of [`strategy_from_reflection`]: `F_ab = Σ_{x_b=0} A_ax − Σ_{x_b=1} A_ax`.
pub fn reflection_from_strategy(s: &Strategy) -> Result<ReflectionStrategy> {
    if s.alice.len() != 3 || s.bob.len() != 3 || s.alice[0].len() != 4 || s.bob[0].len() != 4 {
        return Err(Error::InvalidStrategy("not a Magic Square strategy shape".into()));
    }
    let signed = |povm: &[CMatrix], labels: &[u8; 4], bit: usize| {
        povm.iter().zip(labels).fold(CMatrix::zeros(povm[0].nrows(), povm[0].ncols()), |acc, (p, &l)| {
            if ms_bit(l, bit) == 0 {
                acc + p
            } else {
                acc - p
            }
        })
    };
    let f = (0..3)
        .map(|a| (0..3).map(|b| signed(&s.alice[a], &MS_ALICE_OUTPUTS, b)).collect())
        .collect();
    let g = (0..3)
        .map(|a| (0..3).map(|b| signed(&s.bob[b], &MS_BOB_OUTPUTS, a)).collect())
        .collect();
    let rs = ReflectionStrategy {
        state: s.state.clone(),
        f,
        g,
    };
    rs.validate(CONVERSION_TOL)?;
    Ok(rs)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateComponentRecord {
    weight: f64,
    amplitudes: Vec<[f64; 2]>,
}

/// JSON form of a bipartite state ensemble.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateRecord {
    dim_a: usize,
    dim_b: usize,
    components: Vec<StateComponentRecord>,
}

impl From<&MixedState> for StateRecord {
    fn from(s: &MixedState) -> Self {
        Self {
            dim_a: s.dim_a(),
            dim_b: s.dim_b(),
            components: s
                .components()
                .iter()
                .map(|(w, p)| StateComponentRecord {
                    weight: *w,
                    amplitudes: p.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<&StateRecord> for MixedState {
    type Error = Error;
    fn try_from(r: &StateRecord) -> Result<Self> {
        let comps = r
            .components
            .iter()
            .map(|comp| {
                let v = CVector::from_iterator(comp.amplitudes.len(), comp.amplitudes.iter().map(|[re, im]| c(*re, *im)));
                Ok((comp.weight, PureState::new(v, r.dim_a, r.dim_b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        MixedState::new(comps)
    }
}

/// JSON form of a [`Strategy`]: the state plus `alice[a][x]`, `bob[b][y]`
/// matrices as `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyRecord {
    state: StateRecord,
    alice: Vec<Vec<MatrixRecord>>,
    bob: Vec<Vec<MatrixRecord>>,
}

fn records(ms: &[Vec<CMatrix>]) -> Vec<Vec<MatrixRecord>> {
    ms.iter().map(|r| r.iter().map(MatrixRecord::from).collect()).collect()
}

fn matrices(rs: &[Vec<MatrixRecord>]) -> Result<Vec<Vec<CMatrix>>> {
    rs.iter()
        .map(|r| r.iter().map(CMatrix::try_from).collect())
        .collect()
}

impl From<&Strategy> for StrategyRecord {
    fn from(s: &Strategy) -> Self {
        Self {
            state: StateRecord::from(&s.state),
            alice: records(&s.alice),
            bob: records(&s.bob),
        }
    }
}

impl TryFrom<&StrategyRecord> for Strategy {
    type Error = Error;
    fn try_from(r: &StrategyRecord) -> Result<Self> {
        Strategy::new(MixedState::try_from(&r.state)?, matrices(&r.alice)?, matrices(&r.bob)?)
    }
}

/// JSON form of a [`ReflectionStrategy`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionRecord {
    state: StateRecord,
    f: Vec<Vec<MatrixRecord>>,
    g: Vec<Vec<MatrixRecord>>,
}

impl From<&ReflectionStrategy> for ReflectionRecord {
    fn from(s: &ReflectionStrategy) -> Self {
        Self {
            state: StateRecord::from(&s.state),
            f: records(&s.f),
            g: records(&s.g),
        }
    }
}

impl TryFrom<&ReflectionRecord> for ReflectionStrategy {
    type Error = Error;
    fn try_from(r: &ReflectionRecord) -> Result<Self> {
        ReflectionStrategy::new(MixedState::try_from(&r.state)?, matrices(&r.f)?, matrices(&r.g)?)
    }
}
