//! Two-player nonlocal games, correlations, and scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{tensor, trace_product};
use crate::strategies::Strategy;

/// Normalization / non-signaling tolerance for correlations.
pub const CORRELATION_TOL: f64 = 1e-9;

/// Bit `i` (0 = leftmost) of a 3-bit Magic Square output string.
pub fn ms_bit(value: u8, i: usize) -> u8 {
    (value >> (2 - i)) & 1
}

/// Alice's Magic Square outputs: even-parity rows.
pub const MS_ALICE_OUTPUTS: [u8; 4] = [0b000, 0b011, 0b101, 0b110];
/// Bob's Magic Square outputs: odd-parity columns.
pub const MS_BOB_OUTPUTS: [u8; 4] = [0b100, 0b010, 0b001, 0b111];

/// A game `(q, H)` on finite alphabets. Inputs are `0..n`; outputs carry
/// integer labels and are addressed by their position in the label list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlocalGame {
    name: String,
    alice_inputs: usize,
    bob_inputs: usize,
    alice_outputs: Vec<u8>,
    bob_outputs: Vec<u8>,
    /// `q(a, b)` at `a * bob_inputs + b`.
    input_dist: Vec<f64>,
    /// `H(a, b, x, y)` in `(a, b, x, y)` row-major order.
    score: Vec<f64>,
}

impl NonlocalGame {
    pub fn new<F>(
        name: impl Into<String>,
        alice_inputs: usize,
        bob_inputs: usize,
        alice_outputs: Vec<u8>,
        bob_outputs: Vec<u8>,
        input_dist: Vec<f64>,
        predicate: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize, u8, u8) -> f64,
    {
        if input_dist.len() != alice_inputs * bob_inputs {
            return Err(Error::InvalidGame(format!(
                "input distribution has {} entries, expected {}",
                input_dist.len(),
                alice_inputs * bob_inputs
            )));
        }
        if input_dist.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidGame("negative input probability".into()));
        }
        let total: f64 = input_dist.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidGame(format!("input distribution sums to {total}")));
        }
        let mut score = Vec::with_capacity(input_dist.len() * alice_outputs.len() * bob_outputs.len());
        for a in 0..alice_inputs {
            for b in 0..bob_inputs {
                for &x in &alice_outputs {
                    for &y in &bob_outputs {
                        let h = predicate(a, b, x, y);
                        if !(0.0..=1.0).contains(&h) {
                            return Err(Error::InvalidGame(format!("score {h} outside [0,1]")));
                        }
                        score.push(h);
                    }
                }
            }
        }
        Ok(Self {
            name: name.into(),
            alice_inputs,
            bob_inputs,
            alice_outputs,
            bob_outputs,
            input_dist,
            score,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alice_inputs(&self) -> usize {
        self.alice_inputs
    }

    pub fn bob_inputs(&self) -> usize {
        self.bob_inputs
    }

    pub fn alice_outputs(&self) -> &[u8] {
        &self.alice_outputs
    }

    pub fn bob_outputs(&self) -> &[u8] {
        &self.bob_outputs
    }

    pub fn input_prob(&self, a: usize, b: usize) -> f64 {
        self.input_dist[a * self.bob_inputs + b]
    }

    /// `H(a, b, x, y)` with outputs given by alphabet position.
    pub fn score(&self, a: usize, b: usize, xi: usize, yi: usize) -> f64 {
        let nx = self.alice_outputs.len();
        let ny = self.bob_outputs.len();
        self.score[((a * self.bob_inputs + b) * nx + xi) * ny + yi]
    }

    /// `H` looked up by output labels.
    pub fn score_labels(&self, a: usize, b: usize, x: u8, y: u8) -> Option<f64> {
        let xi = self.alice_outputs.iter().position(|&v| v == x)?;
        let yi = self.bob_outputs.iter().position(|&v| v == y)?;
        Some(self.score(a, b, xi, yi))
    }

    pub fn has_complete_support(&self) -> bool {
        self.input_dist.iter().all(|&p| p > 0.0)
    }

    fn check_shape(&self, c: &Correlation) -> Result<()> {
        if c.alice_inputs != self.alice_inputs
            || c.bob_inputs != self.bob_inputs
            || c.alice_outputs != self.alice_outputs.len()
            || c.bob_outputs != self.bob_outputs.len()
        {
            return Err(Error::DimensionMismatch(format!(
                "correlation shape ({},{},{},{}) does not match game `{}`",
                c.alice_inputs, c.bob_inputs, c.alice_outputs, c.bob_outputs, self.name
            )));
        }
        Ok(())
    }
}

/// CHSH: binary alphabets, uniform inputs, `H = x ⊕ y ⊕ ¬(a ∧ b)`.
pub fn chsh() -> NonlocalGame {
    NonlocalGame::new("chsh", 2, 2, vec![0, 1], vec![0, 1], vec![0.25; 4], |a, b, x, y| {
        let not_and = u8::from(!(a == 1 && b == 1));
        f64::from(x ^ y ^ not_and)
    })
    .expect("static game data")
}

/// Magic Square: 3×3 uniform inputs, won iff `x_b = y_a`.
pub fn magic_square() -> NonlocalGame {
    NonlocalGame::new(
        "magic_square",
        3,
        3,
        MS_ALICE_OUTPUTS.to_vec(),
        MS_BOB_OUTPUTS.to_vec(),
        vec![1.0 / 9.0; 9],
        |a, b, x, y| f64::from(ms_bit(x, b) == ms_bit(y, a)),
    )
    .expect("static game data")
}

/// Conditional output distribution `P(xy|ab)`, stored densely in
/// `(a, b, x, y)` row-major order with outputs addressed by alphabet position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    /// Always `"a,b,x,y"`: the row-major order of `probs`.
    index_order: String,
    alice_inputs: usize,
    bob_inputs: usize,
    alice_outputs: usize,
    bob_outputs: usize,
    probs: Vec<f64>,
}

impl Correlation {
    pub fn new(
        alice_inputs: usize,
        bob_inputs: usize,
        alice_outputs: usize,
        bob_outputs: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let c = Self {
            index_order: "a,b,x,y".into(),
            alice_inputs,
            bob_inputs,
            alice_outputs,
            bob_outputs,
            probs,
        };
        c.validate()?;
        Ok(c)
    }

    /// Every output pair equally likely for every input pair.
    pub fn uniform(na: usize, nb: usize, nx: usize, ny: usize) -> Self {
        let p = 1.0 / (nx * ny) as f64;
        Self::new(na, nb, nx, ny, vec![p; na * nb * nx * ny]).expect("uniform is valid")
    }

    /// Alice answers `alice[a]` and Bob answers `bob[b]` (alphabet positions).
    pub fn deterministic(alice: &[usize], bob: &[usize], nx: usize, ny: usize) -> Result<Self> {
        let (na, nb) = (alice.len(), bob.len());
        if alice.iter().any(|&x| x >= nx) || bob.iter().any(|&y| y >= ny) {
            return Err(Error::OutOfRange("deterministic answer outside alphabet".into()));
        }
        let mut probs = vec![0.0; na * nb * nx * ny];
        for a in 0..na {
            for b in 0..nb {
                probs[((a * nb + b) * nx + alice[a]) * ny + bob[b]] = 1.0;
            }
        }
        Self::new(na, nb, nx, ny, probs)
    }

    /// Convex mixture `Σ w_k c_k`.
    pub fn mixture(parts: &[(f64, &Correlation)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidCorrelation("empty mixture".into()))?;
        let mut probs = vec![0.0; first.probs.len()];
        for (w, c) in parts {
            if c.shape() != first.shape() {
                return Err(Error::DimensionMismatch("mixing correlations of different shape".into()));
            }
            for (acc, p) in probs.iter_mut().zip(&c.probs) {
                *acc += w * p;
            }
        }
        Self::new(
            first.alice_inputs,
            first.bob_inputs,
            first.alice_outputs,
            first.bob_outputs,
            probs,
        )
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.alice_inputs, self.bob_inputs, self.alice_outputs, self.bob_outputs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.probs[((a * self.bob_inputs + b) * self.alice_outputs + x) * self.bob_outputs + y]
    }

    /// `P(x|a)` computed with Bob's input `b`.
    pub fn alice_marginal(&self, a: usize, b: usize, x: usize) -> f64 {
        (0..self.bob_outputs).map(|y| self.get(a, b, x, y)).sum()
    }

    /// `P(y|b)` computed with Alice's input `a`.
    pub fn bob_marginal(&self, a: usize, b: usize, y: usize) -> f64 {
        (0..self.alice_outputs).map(|x| self.get(a, b, x, y)).sum()
    }

    /// Checks nonnegativity, normalization, and the non-signaling conditions
    /// within [`CORRELATION_TOL`].
    pub fn validate(&self) -> Result<()> {
        if self.index_order != "a,b,x,y" {
            return Err(Error::InvalidCorrelation(format!(
                "unsupported index order `{}`",
                self.index_order
            )));
        }
        let expected = self.alice_inputs * self.bob_inputs * self.alice_outputs * self.bob_outputs;
        if self.probs.len() != expected {
            return Err(Error::InvalidCorrelation(format!(
                "{} entries, expected {expected}",
                self.probs.len()
            )));
        }
        if let Some(p) = self.probs.iter().find(|&&p| !(p >= -CORRELATION_TOL) || !p.is_finite()) {
            return Err(Error::InvalidCorrelation(format!("negative entry {p}")));
        }
        for a in 0..self.alice_inputs {
            for b in 0..self.bob_inputs {
                let total: f64 = (0..self.alice_outputs)
                    .map(|x| self.alice_marginal(a, b, x))
                    .sum();
                if (total - 1.0).abs() > CORRELATION_TOL {
                    return Err(Error::InvalidCorrelation(format!(
                        "inputs ({a},{b}) sum to {total}"
                    )));
                }
            }
        }
        for a in 0..self.alice_inputs {
            for x in 0..self.alice_outputs {
                let reference = self.alice_marginal(a, 0, x);
                for b in 1..self.bob_inputs {
                    let m = self.alice_marginal(a, b, x);
                    if (m - reference).abs() > CORRELATION_TOL {
                        return Err(Error::InvalidCorrelation(format!(
                            "Alice marginal P({x}|{a}) depends on Bob's input ({reference} vs {m})"
                        )));
                    }
                }
            }
        }
        for b in 0..self.bob_inputs {
            for y in 0..self.bob_outputs {
                let reference = self.bob_marginal(0, b, y);
                for a in 1..self.alice_inputs {
                    let m = self.bob_marginal(a, b, y);
                    if (m - reference).abs() > CORRELATION_TOL {
                        return Err(Error::InvalidCorrelation(format!(
                            "Bob marginal P({y}|{b}) depends on Alice's input ({reference} vs {m})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }
}

/// `Σ q(a,b) H(a,b,x,y) P(xy|ab)`.
pub fn expected_score(game: &NonlocalGame, c: &Correlation) -> Result<f64> {
    game.check_shape(c)?;
    let mut total = 0.0;
    for a in 0..game.alice_inputs {
        for b in 0..game.bob_inputs {
            total += game.input_prob(a, b) * win_probability(game, c, a, b);
        }
    }
    Ok(total)
}

/// `Σ_{xy} H(a,b,x,y) P(xy|ab)` for one input pair. Shapes must already match.
pub fn win_probability(game: &NonlocalGame, c: &Correlation, a: usize, b: usize) -> f64 {
    let mut total = 0.0;
    for x in 0..game.alice_outputs.len() {
        for y in 0..game.bob_outputs.len() {
            total += game.score(a, b, x, y) * c.get(a, b, x, y);
        }
    }
    total
}

/// `P(xy|ab) = Tr[ρ (A_ax ⊗ B_by)]`.
pub fn correlation_from_strategy(s: &Strategy) -> Result<Correlation> {
    s.validate()?;
    let rho = s.state().density();
    let (na, nb) = (s.alice().len(), s.bob().len());
    let (nx, ny) = (s.alice()[0].len(), s.bob()[0].len());
    let mut probs = Vec::with_capacity(na * nb * nx * ny);
    for a in 0..na {
        for b in 0..nb {
            for x in 0..nx {
                for y in 0..ny {
                    let op = tensor(&s.alice()[a][x], &s.bob()[b][y])?;
                    let p = trace_product(rho.matrix(), &op).re;
                    // Born-rule rounding noise only.
                    probs.push(if p.abs() < 1e-14 { 0.0 } else { p });
                }
            }
        }
    }
    Correlation::new(na, nb, nx, ny, probs)
}
