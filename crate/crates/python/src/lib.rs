//! Python bindings: `import locrand`.

use locrand::deletion::{self, Attack, HaltingWins, IidWins, ScoreTracking, SimConfig, WinProcess};
use locrand::npa::{self, NpaOptions};
use locrand::rigidity;
use locrand::strategies::{self, magic_square_canonical};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: locrand::Error) -> PyErr {
    match e {
        locrand::Error::Numerical(_) | locrand::Error::Uncertified(_) | locrand::Error::Simulation(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// One row of the CHSH guessing-probability curve.
#[pyclass(frozen, get_all, module = "locrand")]
struct CurvePoint {
    p1: f64,
    upper_bound: f64,
    lower_bound: f64,
    level: usize,
    gap: f64,
    dual_residual: f64,
    status: String,
    converged: bool,
}

impl From<npa::CurvePoint> for CurvePoint {
    fn from(p: npa::CurvePoint) -> Self {
        Self {
            converged: p.converged(),
            p1: p.p1,
            upper_bound: p.upper_bound,
            lower_bound: p.lower_bound,
            level: p.level,
            gap: p.gap,
            dual_residual: p.dual_residual,
            status: format!("{:?}", p.status),
        }
    }
}

#[pymethods]
impl CurvePoint {
    fn __repr__(&self) -> String {
        format!(
            "CurvePoint(p1={}, upper_bound={}, lower_bound={}, level={}, status={})",
            self.p1, self.upper_bound, self.lower_bound, self.level, self.status
        )
    }
}

#[pyclass(frozen, module = "locrand")]
struct RigidityReport(rigidity::RigidityReport);

#[pymethods]
impl RigidityReport {
    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }

    #[getter]
    fn delta_ij(&self) -> [[f64; 3]; 3] {
        self.0.delta_ij
    }

    #[getter]
    fn consistency_norms(&self) -> Vec<f64> {
        self.0.consistency_norms.clone()
    }

    #[getter]
    fn anticomm_norms(&self) -> Vec<f64> {
        self.0.anticomm_norms.clone()
    }

    #[getter]
    fn prop_distances(&self) -> Vec<f64> {
        self.0.prop_distances.clone()
    }

    #[getter]
    fn guess_exact(&self) -> f64 {
        self.0.guess_exact
    }

    #[getter]
    fn guess_bound(&self) -> f64 {
        self.0.guess_bound
    }

    #[getter]
    fn max_anticomm_norm(&self) -> f64 {
        self.0.max_anticomm_norm()
    }

    #[getter]
    fn max_prop_distance(&self) -> f64 {
        self.0.max_prop_distance()
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(py_err)
    }
}

#[pyclass(frozen, get_all, module = "locrand")]
struct AttackStats {
    attack: String,
    rounds: usize,
    eps: f64,
    trials: usize,
    succ: usize,
    correct: usize,
    succ_rate: f64,
    /// `None` when no run succeeded.
    guess_rate: Option<f64>,
    theorem_bound: Option<f64>,
}

#[pymethods]
impl AttackStats {
    fn __repr__(&self) -> String {
        format!(
            "AttackStats(attack={:?}, succ_rate={}, guess_rate={:?}, theorem_bound={:?})",
            self.attack, self.succ_rate, self.guess_rate, self.theorem_bound
        )
    }
}

#[pyclass(frozen, get_all, module = "locrand")]
struct AzumaResult {
    trials: usize,
    succ: usize,
    violations: usize,
    violation_rate: f64,
    bound: f64,
    tolerance: f64,
}

/// Certified maximum CHSH score at the given NPA level.
#[pyfunction]
#[pyo3(signature = (level = 1))]
fn max_chsh_score(py: Python<'_>, level: usize) -> PyResult<f64> {
    py.detach(|| npa::build_instance(level)?.max_p1(&Default::default()))
        .map_err(py_err)
}

/// `(P1, P2)` of the shared-coin mixture with weight `mix_r` on the classical strategy.
#[pyfunction]
fn chsh_mixed(mix_r: f64) -> PyResult<(f64, f64)> {
    strategies::chsh_mixed(mix_r).map_err(py_err)
}

#[pyfunction]
fn lower_bound_p2(p1: f64) -> PyResult<f64> {
    npa::lower_bound_p2(p1).map_err(py_err)
}

/// Certified upper bounds on P2 along `grid` (default: the nine-point grid).
#[pyfunction]
#[pyo3(signature = (grid = None, level = 2))]
fn chsh_curve(py: Python<'_>, grid: Option<Vec<f64>>, level: usize) -> PyResult<Vec<CurvePoint>> {
    let grid = grid.unwrap_or_else(npa::default_grid);
    let points = py
        .detach(|| npa::chsh_curve(&grid, level, &NpaOptions::default()))
        .map_err(py_err)?;
    Ok(points.into_iter().map(CurvePoint::from).collect())
}

/// Rigidity report for the canonical Magic Square strategy depolarized by `p`.
#[pyfunction]
#[pyo3(signature = (p = 0.0))]
fn rigidity_report(p: f64) -> PyResult<RigidityReport> {
    let rs = strategies::depolarize(&magic_square_canonical(), p).map_err(py_err)?;
    rigidity::RigidityReport::compute(&rs).map(RigidityReport).map_err(py_err)
}

#[pyfunction]
fn guess_bound(delta: f64) -> PyResult<f64> {
    rigidity::guess_bound(delta).map_err(py_err)
}

#[pyfunction]
fn theorem_bound(eps: f64, n: u64, p_succ: f64) -> PyResult<f64> {
    deletion::theorem_bound(eps, n, p_succ).map_err(py_err)
}

#[pyfunction]
fn attacks() -> Vec<&'static str> {
    Attack::ALL.iter().map(|a| a.name()).collect()
}

/// Monte-Carlo PREP + DEL against one attack.
#[pyfunction]
#[pyo3(signature = (attack = "honest", rounds = 10_000, eps = 0.05, trials = 1000, seed = 0, device_loss = 0.0))]
fn simulate_attack(
    py: Python<'_>,
    attack: &str,
    rounds: usize,
    eps: f64,
    trials: usize,
    seed: u64,
    device_loss: f64,
) -> PyResult<AttackStats> {
    let a: Attack = attack.parse().map_err(py_err)?;
    let cfg = SimConfig::new(rounds, eps, trials, seed)
        .and_then(|c| c.with_device_loss(device_loss))
        .map_err(py_err)?;
    let stats = py.detach(|| deletion::simulate_attack(&cfg, a)).map_err(py_err)?;
    Ok(AttackStats {
        attack: a.name().to_string(),
        rounds,
        eps,
        trials,
        succ: stats.succ,
        correct: stats.correct,
        succ_rate: stats.succ_rate(),
        guess_rate: stats.guess_rate(),
        theorem_bound: stats.theorem_bound(eps, rounds).map_err(py_err)?,
    })
}

/// The JSON report written by `locrand deletion-sim`, without the Azuma section.
#[pyfunction]
#[pyo3(signature = (attack = "honest", rounds = 10_000, eps = 0.05, trials = 1000, seed = 0, device_loss = 0.0))]
fn deletion_report(
    py: Python<'_>,
    attack: &str,
    rounds: usize,
    eps: f64,
    trials: usize,
    seed: u64,
    device_loss: f64,
) -> PyResult<String> {
    let a: Attack = attack.parse().map_err(py_err)?;
    let cfg = SimConfig::new(rounds, eps, trials, seed)
        .and_then(|c| c.with_device_loss(device_loss))
        .map_err(py_err)?;
    py.detach(|| deletion::deletion_report(&cfg, a)?.to_json()).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (rounds, device_loss = 0.0, trials = 10_000, seed = 0))]
fn recovery_rate(py: Python<'_>, rounds: usize, device_loss: f64, trials: usize, seed: u64) -> PyResult<f64> {
    py.detach(|| deletion::recovery_rate(rounds, device_loss, trials, seed))
        .map_err(py_err)
}

/// Martingale tail check. `model` is "iid" (wins with probability `win`),
/// "halting" or "score-tracking".
#[pyfunction]
#[pyo3(signature = (model, rounds, eps, mu = None, trials = 10_000, seed = 0, win = None))]
#[allow(clippy::too_many_arguments)]
fn azuma_check(
    py: Python<'_>,
    model: &str,
    rounds: usize,
    eps: f64,
    mu: Option<f64>,
    trials: usize,
    seed: u64,
    win: Option<f64>,
) -> PyResult<AzumaResult> {
    let process: Box<dyn WinProcess> = match model {
        "iid" => Box::new(IidWins { win: win.unwrap_or(1.0 - eps) }),
        "halting" => Box::new(HaltingWins),
        "score-tracking" => Box::new(ScoreTracking { eps }),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown model `{other}` (available: iid, halting, score-tracking)"
            )))
        }
    };
    let mu = mu.unwrap_or_else(|| (rounds as f64).powf(-0.25));
    let r = py
        .detach(|| deletion::azuma_check(process.as_ref(), rounds, eps, mu, trials, seed))
        .map_err(py_err)?;
    Ok(AzumaResult {
        trials: r.trials,
        succ: r.succ,
        violations: r.violations,
        violation_rate: r.violation_rate,
        bound: r.bound,
        tolerance: r.tolerance,
    })
}

#[pymodule]
#[pyo3(name = "locrand")]
fn locrand_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<CurvePoint>()?;
    m.add_class::<RigidityReport>()?;
    m.add_class::<AttackStats>()?;
    m.add_class::<AzumaResult>()?;
    m.add_function(wrap_pyfunction!(max_chsh_score, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_mixed, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_p2, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_curve, m)?)?;
    m.add_function(wrap_pyfunction!(rigidity_report, m)?)?;
    m.add_function(wrap_pyfunction!(guess_bound, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_bound, m)?)?;
    m.add_function(wrap_pyfunction!(attacks, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_attack, m)?)?;
    m.add_function(wrap_pyfunction!(deletion_report, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_rate, m)?)?;
    m.add_function(wrap_pyfunction!(azuma_check, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
