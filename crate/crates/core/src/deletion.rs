//! Certified deletion on a two-part Magic Square device: the PREP, REC and
//! DEL protocols, simulated devices and classical adversaries, and the
//! Monte-Carlo checks of the security statement.
//!
//! Monte-Carlo trial `k` of an experiment with seed `s` draws all of its
//! randomness from [`trial_rng`]`(s, k)`, so results do not depend on how
//! trials are scheduled across threads.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::fmt::round9;
use crate::games::{correlation_from_strategy, ms_bit, MS_ALICE_OUTPUTS, MS_BOB_OUTPUTS};
use crate::strategies::{depolarize, magic_square_canonical, strategy_from_reflection, ReflectionStrategy};

/// Largest acceptance slack the protocol allows.
pub const MAX_EPS: f64 = 1.0 / 9.0;

/// Generator for trial `trial` of an experiment seeded with `seed`: ChaCha8
/// keyed by `seed`, positioned on stream number `trial`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=MAX_EPS).contains(&eps) {
        return Err(Error::OutOfRange(format!("eps = {eps} outside [0, 1/9]")));
    }
    Ok(())
}

fn check_rounds(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::OutOfRange("number of rounds must be at least 1".into()));
    }
    Ok(())
}

fn bits(x: u8) -> String {
    format!("{x:03b}")
}

fn bob_index(y: u8) -> Option<usize> {
    MS_BOB_OUTPUTS.iter().position(|&v| v == y)
}

fn sample<R: Rng + ?Sized>(weights: &[f64; 4], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

/// One round of the device: `P(x, y | a, b)` with outputs addressed by their
/// position in the Magic Square alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundModel {
    joint: [[[[f64; 4]; 4]; 3]; 3],
}

impl RoundModel {
    pub fn from_strategy(rs: &ReflectionStrategy) -> Result<Self> {
        let corr = correlation_from_strategy(&strategy_from_reflection(rs)?)?;
        let mut joint = [[[[0.0; 4]; 4]; 3]; 3];
        for (a, row) in joint.iter_mut().enumerate() {
            for (b, table) in row.iter_mut().enumerate() {
                for (x, line) in table.iter_mut().enumerate() {
                    for (y, p) in line.iter_mut().enumerate() {
                        *p = corr.get(a, b, x, y).max(0.0);
                    }
                }
                let total: f64 = table.iter().flatten().sum();
                table.iter_mut().flatten().for_each(|p| *p /= total);
            }
        }
        Ok(Self { joint })
    }

    /// The canonical strategy depolarized so that every input pair is lost
    /// with probability `loss`.
    pub fn honest(loss: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&loss) {
            return Err(Error::OutOfRange(format!("device loss {loss} outside [0, 1/2]")));
        }
        // Uniform outputs lose half the time.
        Self::from_strategy(&depolarize(&magic_square_canonical(), 2.0 * loss)?)
    }

    pub fn joint(&self, a: usize, b: usize) -> &[[f64; 4]; 4] {
        &self.joint[a][b]
    }

    pub fn win_probability(&self, a: usize, b: usize) -> f64 {
        let mut w = 0.0;
        for (x, line) in self.joint[a][b].iter().enumerate() {
            for (y, p) in line.iter().enumerate() {
                if ms_bit(MS_ALICE_OUTPUTS[x], b) == ms_bit(MS_BOB_OUTPUTS[y], a) {
                    w += p;
                }
            }
        }
        w
    }

    /// Losing probability under uniform inputs.
    pub fn losing_probability(&self) -> f64 {
        let mut w = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                w += self.win_probability(a, b);
            }
        }
        1.0 - w / 9.0
    }

    fn alice_marginal(&self, a: usize) -> [f64; 4] {
        let mut m = [0.0; 4];
        for (x, line) in self.joint[a][0].iter().enumerate() {
            m[x] = line.iter().sum();
        }
        m
    }

    fn bob_given_alice(&self, a: usize, b: usize, x: usize) -> [f64; 4] {
        self.joint[a][b][x]
    }

    /// `P(x_bit = 0 | a, c, y)`: Alice played row `a`, Bob measured column `c`
    /// and saw output index `y`.
    pub fn alice_bit_zero_posterior(&self, a: usize, c: usize, y: usize, bit: usize) -> f64 {
        let (mut zero, mut total) = (0.0, 0.0);
        for (x, line) in self.joint[a][c].iter().enumerate() {
            total += line[y];
            if ms_bit(MS_ALICE_OUTPUTS[x], bit) == 0 {
                zero += line[y];
            }
        }
        if total > 0.0 {
            zero / total
        } else {
            0.5
        }
    }
}

/// Alice's half of the device.
pub trait AliceSide {
    /// Output label for the next round.
    fn play(&mut self, input: u8) -> Result<u8>;
}

/// Bob's half of the device.
pub trait BobSide {
    /// Output label for the next round.
    fn play(&mut self, input: u8) -> Result<u8>;
}

/// Alice's measurement results, written by her side and read by Bob's side to
/// sample his conditional outcome. Nothing flows the other way.
type AliceRecord = Rc<RefCell<Vec<(usize, usize)>>>;

pub struct IidAlice {
    model: Arc<RoundModel>,
    record: AliceRecord,
    rng: ChaCha8Rng,
}

#[derive(Clone)]
pub struct IidBob {
    model: Arc<RoundModel>,
    record: AliceRecord,
    rng: ChaCha8Rng,
    next: usize,
}

/// Independent copies of one round model, one consumed per round. Alice's
/// side must play a round before Bob's side does.
pub fn iid_device<R: Rng>(model: Arc<RoundModel>, rng: &mut R) -> (IidAlice, IidBob) {
    let record: AliceRecord = Rc::default();
    let alice = IidAlice {
        model: model.clone(),
        record: record.clone(),
        rng: ChaCha8Rng::from_rng(rng),
    };
    let bob = IidBob {
        model,
        record,
        rng: ChaCha8Rng::from_rng(rng),
        next: 0,
    };
    (alice, bob)
}

impl AliceSide for IidAlice {
    fn play(&mut self, input: u8) -> Result<u8> {
        let a = usize::from(input);
        if a > 2 {
            return Err(Error::OutOfRange(format!("device input {input}")));
        }
        let x = sample(&self.model.alice_marginal(a), &mut self.rng);
        self.record.borrow_mut().push((a, x));
        Ok(MS_ALICE_OUTPUTS[x])
    }
}

impl BobSide for IidBob {
    fn play(&mut self, input: u8) -> Result<u8> {
        let b = usize::from(input);
        if b > 2 {
            return Err(Error::OutOfRange(format!("device input {input}")));
        }
        let (a, x) = self.record.borrow().get(self.next).copied().ok_or_else(|| {
            Error::Simulation(format!("Bob's side reached round {} before Alice's side", self.next + 1))
        })?;
        self.next += 1;
        let y = sample(&self.model.bob_given_alice(a, b, x), &mut self.rng);
        Ok(MS_BOB_OUTPUTS[y])
    }
}

/// `k = (v^b, t, key_col, v^a_t)`, with `t` counted from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Key {
    pub v_b: Vec<u8>,
    pub t: usize,
    pub key_col: u8,
    pub v_t_a: u8,
}

impl Key {
    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.t > self.v_b.len() {
            return Err(Error::OutOfRange(format!("key round {} outside 1..={}", self.t, self.v_b.len())));
        }
        if self.v_b.iter().any(|&v| v > 2) || self.key_col > 2 || self.v_t_a > 2 {
            return Err(Error::OutOfRange("key inputs must lie in {0,1,2}".into()));
        }
        if self.key_col == self.v_b[self.t - 1] {
            return Err(Error::IndexClash(format!("key column equals Bob's input {}", self.key_col)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepResult {
    pub m: u8,
    pub key: Key,
    pub alice_inputs: Vec<u8>,
    pub alice_outputs: Vec<u8>,
}

impl PrepResult {
    /// `m` is bit `key_col` of Alice's output in round `t`.
    pub fn check(&self) -> bool {
        let t = self.key.t;
        t >= 1
            && t <= self.alice_outputs.len()
            && self.alice_inputs[t - 1] == self.key.v_t_a
            && self.m == ms_bit(self.alice_outputs[t - 1], usize::from(self.key.key_col))
    }
}

/// PREP: draw inputs, the secret round and column, and run Alice's side.
pub fn prep<R: Rng + ?Sized>(device: &mut dyn AliceSide, n: usize, rng: &mut R) -> Result<PrepResult> {
    check_rounds(n)?;
    let alice_inputs: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let v_b: Vec<u8> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let t = rng.random_range(1..=n);
    let skip = rng.random_range(0..2);
    let key_col = (0..3u8)
        .filter(|&c| c != v_b[t - 1])
        .nth(skip)
        .expect("two columns remain");
    let mut alice_outputs = Vec::with_capacity(n);
    for (i, &v) in alice_inputs.iter().enumerate() {
        let h = device.play(v)?;
        if !MS_ALICE_OUTPUTS.contains(&h) {
            return Err(Error::ProtocolAbort(format!(
                "round {}: device output {h:#b} outside Alice's alphabet",
                i + 1
            )));
        }
        alice_outputs.push(h);
    }
    let m = ms_bit(alice_outputs[t - 1], usize::from(key_col));
    let v_t_a = alice_inputs[t - 1];
    Ok(PrepResult {
        m,
        key: Key { v_b, t, key_col, v_t_a },
        alice_inputs,
        alice_outputs,
    })
}

/// REC: Bob replays `v^b` with `key_col` substituted at round `t` and reads
/// bit `v^a_t` of that round's output.
pub fn rec(device: &mut dyn BobSide, key: &Key) -> Result<u8> {
    key.validate()?;
    let mut m = 0;
    for (i, &v) in key.v_b.iter().enumerate() {
        let round = i + 1;
        let input = if round == key.t { key.key_col } else { v };
        let h = device.play(input)?;
        if bob_index(h).is_none() {
            return Err(Error::ProtocolAbort(format!(
                "round {round}: device output {h:#b} outside Bob's alphabet"
            )));
        }
        if round == key.t {
            m = ms_bit(h, usize::from(key.v_t_a));
        }
    }
    Ok(m)
}

/// Bob's end of DEL.
pub trait Responder {
    /// Output for `round` (from 1) given Bob's input; `None` means no answer.
    fn respond(&mut self, round: usize, input: u8) -> Option<u8>;
    /// Called once, after Alice has decided.
    fn receive_key(&mut self, key: &Key);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    InputSent(usize),
    OutputReceived(usize),
    Decision(bool),
    KeyReleased,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRecord {
    pub i: usize,
    pub v_a: u8,
    pub h_a: u8,
    pub v_b: u8,
    pub h_b: Option<u8>,
    pub win: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelOutcome {
    pub succ: bool,
    pub average_score: f64,
    pub transcript: Vec<RoundRecord>,
    /// Why the run stopped early, if it did. Aborted runs never succeed.
    pub abort: Option<String>,
    pub log: Vec<Event>,
}

/// DEL: one input at a time, each answered before the next is sent; accept
/// iff the average score is at least `1 − eps`; then release the key.
pub fn del(prep: &PrepResult, bob: &mut dyn Responder, eps: f64) -> Result<DelOutcome> {
    check_eps(eps)?;
    let n = prep.alice_inputs.len();
    check_rounds(n)?;
    let mut wins = 0usize;
    let mut transcript = Vec::with_capacity(n);
    let mut log = Vec::with_capacity(2 * n + 2);
    let mut abort = None;
    for i in 1..=n {
        let (v_a, h_a, v_b) = (prep.alice_inputs[i - 1], prep.alice_outputs[i - 1], prep.key.v_b[i - 1]);
        log.push(Event::InputSent(i));
        let reply = bob.respond(i, v_b);
        if reply.is_some() {
            log.push(Event::OutputReceived(i));
        }
        let win = match reply {
            Some(h) if bob_index(h).is_some() => ms_bit(h_a, usize::from(v_b)) == ms_bit(h, usize::from(v_a)),
            Some(h) => {
                abort = Some(format!("round {i}: output {h:#b} outside Bob's alphabet"));
                false
            }
            None => {
                abort = Some(format!("round {i}: no response"));
                false
            }
        };
        wins += usize::from(win);
        transcript.push(RoundRecord { i, v_a, h_a, v_b, h_b: reply, win });
        if abort.is_some() {
            break;
        }
    }
    let average_score = wins as f64 / n as f64;
    let succ = abort.is_none() && wins as f64 >= (1.0 - eps) * n as f64 - 1e-9;
    log.push(Event::Decision(succ));
    bob.receive_key(&prep.key);
    log.push(Event::KeyReleased);
    Ok(DelOutcome {
        succ,
        average_score,
        transcript,
        abort,
        log,
    })
}

#[derive(Serialize)]
struct TranscriptLine {
    i: usize,
    v_a: u8,
    h_a: String,
    v_b: u8,
    h_b: Option<String>,
    win: bool,
}

/// One JSON object per round: `{i, v_a, h_a, v_b, h_b, win}`.
pub fn write_transcript<W: Write>(records: &[RoundRecord], mut out: W) -> Result<()> {
    for r in records {
        let line = TranscriptLine {
            i: r.i,
            v_a: r.v_a,
            h_a: bits(r.h_a),
            v_b: r.v_b,
            h_b: r.h_b.map(bits),
            win: r.win,
        };
        serde_json::to_writer(&mut out, &line)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Answers every round with a uniformly random string from Bob's alphabet.
pub struct RandomResponder {
    rng: ChaCha8Rng,
}

impl RandomResponder {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Responder for RandomResponder {
    fn respond(&mut self, _round: usize, _input: u8) -> Option<u8> {
        Some(MS_BOB_OUTPUTS[self.rng.random_range(0..4)])
    }

    fn receive_key(&mut self, _key: &Key) {}
}

/// Classical strategies for Bob in DEL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attack {
    /// Plays his device as asked, then guesses from what he saw.
    Honest,
    /// Measures the next column on an evenly spaced set of rounds and answers
    /// those with a fixed string.
    Deterministic,
    /// Measures a random other column on independently chosen rounds.
    IidRandom,
    /// Measures other columns from the start and stops once the expected
    /// losses reach the budget.
    AdaptiveHalting,
    /// Random deviations like `IidRandom`, answered and decoded with the exact
    /// posterior of the device model.
    Bayesian,
}

impl Attack {
    pub const ALL: [Attack; 5] = [
        Attack::Honest,
        Attack::Deterministic,
        Attack::IidRandom,
        Attack::AdaptiveHalting,
        Attack::Bayesian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attack::Honest => "honest",
            Attack::Deterministic => "deterministic",
            Attack::IidRandom => "iid-random",
            Attack::AdaptiveHalting => "adaptive-halting",
            Attack::Bayesian => "bayesian",
        }
    }

    pub fn names() -> String {
        Self::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Attack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attack {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAttack {
                name: s.to_string(),
                available: Self::names(),
            })
    }
}

/// Bob holding his side of an honest device. He may measure a different
/// column than asked and invent the answer; each invented answer loses about
/// half the time, so deviations are rationed to keep the expected losses a
/// couple of standard deviations inside `eps·N`.
pub struct Attacker {
    attack: Attack,
    device: IidBob,
    model: Arc<RoundModel>,
    rng: ChaCha8Rng,
    n: usize,
    budget: f64,
    spent: f64,
    planned: usize,
    records: Vec<(usize, usize)>,
    key: Option<Key>,
}

impl Attacker {
    pub fn new(attack: Attack, device: IidBob, model: Arc<RoundModel>, n: usize, eps: f64, rng: ChaCha8Rng) -> Self {
        let nf = n as f64;
        let budget = (eps * nf - 2.0 * (eps * nf).sqrt() - model.losing_probability() * nf).max(0.0);
        let planned = ((2.0 * budget).floor() as usize).min(n);
        Self {
            attack,
            device,
            model,
            rng,
            n,
            budget,
            spent: 0.0,
            planned,
            records: Vec::with_capacity(n),
            key: None,
        }
    }

    fn deviates(&mut self, round: usize) -> bool {
        match self.attack {
            Attack::Honest => false,
            Attack::Deterministic => round * self.planned / self.n > (round - 1) * self.planned / self.n,
            Attack::IidRandom | Attack::Bayesian => self.rng.random::<f64>() * (self.n as f64) < self.planned as f64,
            Attack::AdaptiveHalting => self.spent + 0.5 <= self.budget,
        }
    }

    /// Probability that answering `y` for column `b` wins, after measuring
    /// column `c` with outcome `seen`; Alice's row is uniform.
    fn answer_win_probability(&self, b: usize, c: usize, seen: usize, y: u8) -> f64 {
        (0..3)
            .map(|a| {
                let p0 = self.model.alice_bit_zero_posterior(a, c, seen, b);
                if ms_bit(y, a) == 0 {
                    p0
                } else {
                    1.0 - p0
                }
            })
            .sum::<f64>()
            / 3.0
    }

    /// Bob's guess for `m`, available once the key has arrived.
    pub fn guess(&mut self) -> Option<u8> {
        let key = self.key.as_ref()?;
        let (a, r) = (usize::from(key.v_t_a), usize::from(key.key_col));
        let &(c, seen) = self.records.get(key.t - 1)?;
        Some(match self.attack {
            Attack::Honest | Attack::Bayesian => u8::from(self.model.alice_bit_zero_posterior(a, c, seen, r) < 0.5),
            _ if c == r => ms_bit(MS_BOB_OUTPUTS[seen], a),
            Attack::Deterministic => 0,
            _ => self.rng.random_range(0..2),
        })
    }
}

impl Responder for Attacker {
    fn respond(&mut self, round: usize, input: u8) -> Option<u8> {
        let b = usize::from(input);
        let deviate = self.deviates(round);
        let c = match (deviate, self.attack) {
            (false, _) => b,
            (true, Attack::Deterministic) => (b + 1) % 3,
            (true, _) => (b + 1 + self.rng.random_range(0..2)) % 3,
        };
        let seen = bob_index(self.device.play(c as u8).ok()?)?;
        self.records.push((c, seen));
        if !deviate {
            return Some(MS_BOB_OUTPUTS[seen]);
        }
        let answer = match self.attack {
            Attack::Deterministic => 0b111,
            Attack::Bayesian => *MS_BOB_OUTPUTS
                .iter()
                .max_by(|&&y1, &&y2| {
                    self.answer_win_probability(b, c, seen, y1)
                        .total_cmp(&self.answer_win_probability(b, c, seen, y2))
                })
                .expect("nonempty alphabet"),
            _ => MS_BOB_OUTPUTS[self.rng.random_range(0..4)],
        };
        self.spent += 1.0 - self.answer_win_probability(b, c, seen, answer);
        Some(answer)
    }

    fn receive_key(&mut self, key: &Key) {
        self.key = Some(key.clone());
    }
}

/// `min(1, 1/2 + 9√(ε + N^{-1/4}) + e^{-√N/2}/P(SUCC))`.
pub fn theorem_bound(eps: f64, n: u64, p_succ: f64) -> Result<f64> {
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::OutOfRange("number of rounds must be at least 1".into()));
    }
    if !(p_succ > 0.0 && p_succ <= 1.0) {
        return Err(Error::OutOfRange(format!("P(SUCC) = {p_succ}; the bound needs P(SUCC) in (0, 1]")));
    }
    let nf = n as f64;
    Ok((0.5 + 9.0 * (eps + nf.powf(-0.25)).sqrt() + (-nf.sqrt() / 2.0).exp() / p_succ).min(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    /// Per-round losing probability of the honest device Bob holds.
    pub device_loss: f64,
}

impl SimConfig {
    pub fn new(n: usize, eps: f64, trials: usize, seed: u64) -> Result<Self> {
        check_rounds(n)?;
        check_eps(eps)?;
        if trials == 0 {
            return Err(Error::OutOfRange("need at least one trial".into()));
        }
        Ok(Self { n, eps, trials, seed, device_loss: 0.0 })
    }

    pub fn with_device_loss(mut self, loss: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&loss) {
            return Err(Error::OutOfRange(format!("device loss {loss} outside [0, 1/2]")));
        }
        self.device_loss = loss;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttackStats {
    pub trials: usize,
    pub succ: usize,
    /// Correct guesses among the successful runs.
    pub correct: usize,
}

impl AttackStats {
    pub fn succ_rate(&self) -> f64 {
        self.succ as f64 / self.trials as f64
    }

    /// Guess rate conditioned on SUCC, if any run succeeded.
    pub fn guess_rate(&self) -> Option<f64> {
        (self.succ > 0).then(|| self.correct as f64 / self.succ as f64)
    }

    /// Binomial standard error of the conditional guess rate at success
    /// probability `p`.
    pub fn guess_sigma(&self, p: f64) -> f64 {
        if self.succ == 0 {
            return f64::INFINITY;
        }
        (p * (1.0 - p) / self.succ as f64).sqrt()
    }

    /// [`theorem_bound`] at the empirical success rate.
    pub fn theorem_bound(&self, eps: f64, n: usize) -> Result<Option<f64>> {
        if self.succ == 0 {
            return Ok(None);
        }
        theorem_bound(eps, n as u64, self.succ_rate()).map(Some)
    }
}

fn attack_trial(cfg: &SimConfig, model: &Arc<RoundModel>, attack: Attack, trial: u64) -> Result<(bool, bool)> {
    let mut rng = trial_rng(cfg.seed, trial);
    let (mut alice, bob) = iid_device(model.clone(), &mut rng);
    let p = prep(&mut alice, cfg.n, &mut rng)?;
    let mut bob = Attacker::new(attack, bob, model.clone(), cfg.n, cfg.eps, ChaCha8Rng::from_rng(&mut rng));
    let out = del(&p, &mut bob, cfg.eps)?;
    let guess = bob
        .guess()
        .ok_or_else(|| Error::Simulation("adversary has no guess after DEL".into()))?;
    Ok((out.succ, guess == p.m))
}

/// PREP then DEL against `attack`, `cfg.trials` times.
pub fn simulate_attack(cfg: &SimConfig, attack: Attack) -> Result<AttackStats> {
    let model = Arc::new(RoundModel::honest(cfg.device_loss)?);
    let outcomes = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|k| attack_trial(cfg, &model, attack, k))
        .collect::<Result<Vec<_>>>()?;
    let mut stats = AttackStats { trials: cfg.trials, ..Default::default() };
    for (succ, correct) in outcomes {
        if succ {
            stats.succ += 1;
            stats.correct += usize::from(correct);
        }
    }
    Ok(stats)
}

/// Fraction of PREP/REC runs on an honest device where Bob recovers `m`.
pub fn recovery_rate(n: usize, device_loss: f64, trials: usize, seed: u64) -> Result<f64> {
    check_rounds(n)?;
    if trials == 0 {
        return Err(Error::OutOfRange("need at least one trial".into()));
    }
    let model = Arc::new(RoundModel::honest(device_loss)?);
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let (mut alice, mut bob) = iid_device(model.clone(), &mut rng);
            let p = prep(&mut alice, n, &mut rng)?;
            Ok(usize::from(rec(&mut bob, &p.key)? == p.m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeletionReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub eps: f64,
    pub succ_rate: f64,
    pub guess_rate_by_attack: BTreeMap<String, Option<f64>>,
    /// Absent when no run succeeded.
    pub theorem_bound: Option<f64>,
    pub seed: u64,
    pub attack: String,
    pub trials: usize,
    pub device_loss: f64,
}

impl DeletionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Runs [`simulate_attack`] and packages the result, numbers rounded to 9
/// significant digits.
pub fn deletion_report(cfg: &SimConfig, attack: Attack) -> Result<DeletionReport> {
    let stats = simulate_attack(cfg, attack)?;
    let mut guess_rate_by_attack = BTreeMap::new();
    guess_rate_by_attack.insert(attack.name().to_string(), stats.guess_rate().map(round9));
    Ok(DeletionReport {
        n: cfg.n,
        eps: round9(cfg.eps),
        succ_rate: round9(stats.succ_rate()),
        guess_rate_by_attack,
        theorem_bound: stats.theorem_bound(cfg.eps, cfg.n)?.map(round9),
        seed: cfg.seed,
        attack: attack.name().to_string(),
        trials: cfg.trials,
        device_loss: round9(cfg.device_loss),
    })
}

/// Winning process of a classical device model: `I'_i` given the past.
pub trait WinProcess: Sync {
    /// Probability of winning round `round` (from 0) of `n`, after `wins`
    /// wins in the earlier rounds.
    fn conditional_win(&self, round: usize, n: usize, wins: usize) -> f64;
}

/// Every round won independently with probability `win`.
pub struct IidWins {
    pub win: f64,
}

impl WinProcess for IidWins {
    fn conditional_win(&self, _round: usize, _n: usize, _wins: usize) -> f64 {
        self.win
    }
}

/// Wins the first half of the rounds and loses the rest.
pub struct HaltingWins;

impl WinProcess for HaltingWins {
    fn conditional_win(&self, round: usize, n: usize, _wins: usize) -> f64 {
        if 2 * round < n {
            1.0
        } else {
            0.0
        }
    }
}

/// Coasts at `1 − 2ε` while the running score is at least `1 − ε`, and wins
/// for sure while it is behind.
pub struct ScoreTracking {
    pub eps: f64,
}

impl WinProcess for ScoreTracking {
    fn conditional_win(&self, round: usize, _n: usize, wins: usize) -> f64 {
        if wins as f64 >= (1.0 - self.eps) * round as f64 {
            1.0 - 2.0 * self.eps
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzumaResult {
    pub trials: usize,
    pub succ: usize,
    /// Runs with SUCC and mean conditional win probability below `1 − ε − μ`.
    pub violations: usize,
    pub violation_rate: f64,
    /// `e^{−Nμ²/2}`.
    pub bound: f64,
    /// `bound + 3√(bound(1 − bound)/trials) + 10/trials`.
    pub tolerance: f64,
}

pub fn azuma_bound(n: usize, mu: f64) -> f64 {
    (-(n as f64) * mu * mu / 2.0).exp()
}

/// Samples `model` and counts how often SUCC coincides with a low mean of
/// the conditional win probabilities.
pub fn azuma_check(model: &dyn WinProcess, n: usize, eps: f64, mu: f64, trials: usize, seed: u64) -> Result<AzumaResult> {
    check_rounds(n)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::OutOfRange(format!("eps = {eps} outside [0, 1]")));
    }
    if !(mu >= 0.0) {
        return Err(Error::OutOfRange(format!("mu = {mu} must be nonnegative")));
    }
    if trials == 0 {
        return Err(Error::OutOfRange("need at least one trial".into()));
    }
    let threshold = (1.0 - eps) * n as f64 - 1e-9;
    let runs: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = trial_rng(seed, k);
            let (mut wins, mut mean) = (0usize, 0.0);
            for i in 0..n {
                let p = model.conditional_win(i, n, wins);
                mean += p;
                if rng.random::<f64>() < p {
                    wins += 1;
                }
            }
            let succ = wins as f64 >= threshold;
            (succ, succ && mean / (n as f64) < 1.0 - eps - mu)
        })
        .collect();
    let succ = runs.iter().filter(|r| r.0).count();
    let violations = runs.iter().filter(|r| r.1).count();
    let bound = azuma_bound(n, mu);
    Ok(AzumaResult {
        trials,
        succ,
        violations,
        violation_rate: violations as f64 / trials as f64,
        bound,
        tolerance: bound + 3.0 * (bound * (1.0 - bound) / trials as f64).sqrt() + 10.0 / trials as f64,
    })
}

/// `P(SUCC)` for an honest device losing each round with probability
/// `device_loss`: a binomial tail.
pub fn honest_success_probability(n: usize, eps: f64, device_loss: f64) -> Result<f64> {
    check_rounds(n)?;
    check_eps(eps)?;
    let need = ((1.0 - eps) * n as f64 - 1e-9).ceil().max(0.0) as u64;
    if need == 0 {
        return Ok(1.0);
    }
    let dist = Binomial::new(1.0 - device_loss, n as u64)
        .map_err(|e| Error::OutOfRange(format!("binomial parameters: {e}")))?;
    Ok(dist.sf(need - 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub y: u8,
    /// `y ⊕ m`, published after PREP.
    pub ciphertext: u8,
    /// Whether REC, run instead of DEL, would have decrypted `y`.
    pub recovered_before_delete: bool,
    pub succ: bool,
    pub average_score: f64,
    pub p_succ: f64,
    /// [`theorem_bound`] at `p_succ`, reported only after SUCC.
    pub guess_bound: Option<f64>,
}

/// Encrypts `y` with the prepared bit, checks that REC would decrypt it, and
/// then deletes with an honest Bob.
pub fn encrypt_then_delete_demo(y: u8, device_loss: f64, n: usize, eps: f64, seed: u64) -> Result<DemoReport> {
    if y > 1 {
        return Err(Error::OutOfRange(format!("secret bit {y}")));
    }
    check_eps(eps)?;
    let model = Arc::new(RoundModel::honest(device_loss)?);
    let mut rng = trial_rng(seed, 0);
    let (mut alice, bob) = iid_device(model.clone(), &mut rng);
    let p = prep(&mut alice, n, &mut rng)?;
    let ciphertext = y ^ p.m;
    let mut counterfactual = bob.clone();
    let recovered_before_delete = ciphertext ^ rec(&mut counterfactual, &p.key)? == y;
    let mut honest = Attacker::new(Attack::Honest, bob, model, n, eps, ChaCha8Rng::from_rng(&mut rng));
    let out = del(&p, &mut honest, eps)?;
    let p_succ = honest_success_probability(n, eps, device_loss)?;
    let guess_bound = if out.succ { Some(theorem_bound(eps, n as u64, p_succ)?) } else { None };
    Ok(DemoReport {
        y,
        ciphertext,
        recovered_before_delete,
        succ: out.succ,
        average_score: out.average_score,
        p_succ,
        guess_bound,
    })
}
