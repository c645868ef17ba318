//! Scenario runner: named experiments producing check reports.

mod bhp;
mod counterexample;
mod exit_bound;
mod g1;
mod harnack;
mod kernel_bounds;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::domains::DomainShape;
use crate::error::{Error, Result};
use crate::estimators::MCEstimate;
use crate::kernels::ProcessParams;
use crate::simulator::SimConfig;

pub use counterexample::jump_intensity_into_cn;

/// Discretization margin added to every ratio check.
pub const DELTA_DISC: f64 = 0.1;

/// Largest tolerated fraction of censored paths.
pub const MAX_CENSORED: f64 = 1e-3;

/// Registered experiment names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    G1,
    KernelBounds,
    Harnack,
    ExitBound,
    BhpConvex,
    Counterexample,
    /// Registered but not implemented; running it is a configuration error.
    BhpLocal,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::G1,
        Experiment::KernelBounds,
        Experiment::Harnack,
        Experiment::ExitBound,
        Experiment::BhpConvex,
        Experiment::Counterexample,
        Experiment::BhpLocal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::G1 => "g1",
            Experiment::KernelBounds => "kernel_bounds",
            Experiment::Harnack => "harnack",
            Experiment::ExitBound => "exit_bound",
            Experiment::BhpConvex => "bhp_convex",
            Experiment::Counterexample => "counterexample",
            Experiment::BhpLocal => "bhp_local",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }

    /// Statements this experiment is allowed to emit checks for.
    pub fn statements(self) -> &'static [Statement] {
        use Statement::*;
        match self {
            Experiment::G1 => &[GreenSandwich],
            Experiment::KernelBounds => &[PoissonSandwich, ShellBounds, JumpRange],
            Experiment::Harnack => &[Harnack, HarnackCap],
            Experiment::ExitBound => &[ExitBoundScaling, InnerBallHitting],
            Experiment::BhpConvex => &[ConvexBhp, Carleson, RatioLimit],
            Experiment::Counterexample => &[BhpFailure],
            Experiment::BhpLocal => &[],
        }
    }

    /// The shipped default scenario.
    pub fn default_scenario(self) -> Result<Scenario> {
        let src = match self {
            Experiment::G1 => include_str!("../../scenarios/g1.json"),
            Experiment::KernelBounds => include_str!("../../scenarios/kernel_bounds.json"),
            Experiment::Harnack => include_str!("../../scenarios/harnack.json"),
            Experiment::ExitBound => include_str!("../../scenarios/exit_bound.json"),
            Experiment::BhpConvex => include_str!("../../scenarios/bhp_convex.json"),
            Experiment::Counterexample => include_str!("../../scenarios/counterexample.json"),
            Experiment::BhpLocal => {
                return Err(Error::Config("bhp_local is registered but has no implementation".into()))
            }
        };
        Scenario::from_json(src)
    }
}

/// What a check is evidence for. Theory statements each belong to exactly
/// one experiment; the remaining kinds are harness controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Statement {
    /// Green function of the truncated process between G and 2G on small balls.
    GreenSandwich,
    /// Truncated Poisson kernel between K and 2K away from the ball.
    PoissonSandwich,
    /// Two-sided `r^α` bounds of the kernel near distance one.
    ShellBounds,
    /// No exit mass beyond the jump range.
    JumpRange,
    /// Two-ball Harnack comparison with `M^{±(d+α)}` constants.
    Harnack,
    /// Harnack fails once the balls are too far apart.
    HarnackCap,
    /// Exit probability bounded by `r^{-α}` times the mean exit time.
    ExitBoundScaling,
    /// Hitting an inner ball of radius `κr` is at least `c κ^d r^{-α} E τ`.
    InnerBallHitting,
    /// Boundary Harnack principle on a convex polytope.
    ConvexBhp,
    /// Carleson estimate.
    Carleson,
    /// Ratio of two harmonic functions converges at the boundary.
    RatioLimit,
    /// Boundary Harnack fails on the non-convex example.
    BhpFailure,
    /// Controls with a known exact answer.
    Control,
    /// Step-size and truncation gates.
    Discretization,
    /// Censored path budget.
    Censoring,
}

impl Statement {
    pub const THEORY: [Statement; 12] = [
        Statement::GreenSandwich,
        Statement::PoissonSandwich,
        Statement::ShellBounds,
        Statement::JumpRange,
        Statement::Harnack,
        Statement::HarnackCap,
        Statement::ExitBoundScaling,
        Statement::InnerBallHitting,
        Statement::ConvexBhp,
        Statement::Carleson,
        Statement::RatioLimit,
        Statement::BhpFailure,
    ];

    pub fn is_theory(self) -> bool {
        !matches!(self, Statement::Control | Statement::Discretization | Statement::Censoring)
    }
}

/// Number of paths and other estimator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub n: u64,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: Experiment,
    pub params: ProcessParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainShape>,
    pub sim: SimConfig,
    pub estimate: EstimateConfig,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub experiment: serde_json::Value,
}

impl Scenario {
    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.sim.validate()?;
        if let Some(d) = &self.domain {
            d.validate()?;
            if d.dim() != self.params.d {
                return Err(Error::DimensionMismatch { expected: self.params.d, got: d.dim() });
            }
        }
        if self.estimate.n == 0 {
            return Err(Error::Config("estimate.n must be positive".into()));
        }
        if !(self.experiment.is_null() || self.experiment.is_object()) {
            return Err(Error::Config("experiment must be an object".into()));
        }
        Ok(())
    }

    /// Experiment knobs; missing keys take defaults, unknown keys are errors.
    pub(crate) fn knobs<T: DeserializeOwned + Default>(&self) -> Result<T> {
        if self.experiment.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.experiment.clone()).map_err(|e| Error::Config(format!("experiment: {e}")))
    }
}

/// How `lhs` is compared with `rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs <= rhs + tolerance`
    Le,
    /// `lhs >= rhs - tolerance`
    Ge,
    /// `|lhs - rhs| <= tolerance`
    Close,
    /// `lhs < rhs`
    Lt,
}

/// One verdict with the numbers behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub check_id: String,
    pub statement: Statement,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    /// Total allowance: `se_band + disc_margin`.
    pub tolerance: f64,
    pub se_band: f64,
    pub disc_margin: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(
        check_id: impl Into<String>,
        statement: Statement,
        relation: Relation,
        lhs: f64,
        rhs: f64,
        se_band: f64,
        disc_margin: f64,
    ) -> Self {
        let tolerance = se_band + disc_margin;
        let pass = match relation {
            Relation::Le => lhs <= rhs + tolerance,
            Relation::Ge => lhs >= rhs - tolerance,
            Relation::Close => (lhs - rhs).abs() <= tolerance,
            Relation::Lt => lhs < rhs,
        };
        Self { check_id: check_id.into(), statement, relation, lhs, rhs, tolerance, se_band, disc_margin, pass }
    }
}

/// Estimate with a label, as echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: Scenario,
    pub seed: u64,
    pub version: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub estimates: Vec<NamedEstimate>,
    pub notes: Vec<String>,
    pub wall_time: f64,
}

impl Report {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// JSON with the wall-time zeroed; equal for equal (scenario, seed).
    pub fn body_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time = 0.0;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("check_id,lhs,rhs,tolerance,pass\n");
        for c in &self.checks {
            s.push_str(&format!("{},{:e},{:e},{:e},{}\n", c.check_id, c.lhs, c.rhs, c.tolerance, c.pass));
        }
        s
    }

    /// Writes through a temporary file in the target directory, then renames.
    pub fn write_atomic(&self, path: &Path, csv: bool) -> Result<()> {
        let body = if csv { self.to_csv() } else { self.to_json() };
        write_atomic(path, body.as_bytes())
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Collects checks and estimates while an experiment runs.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    checks: Vec<Check>,
    estimates: Vec<NamedEstimate>,
    notes: Vec<String>,
}

impl Recorder {
    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn estimate(&mut self, name: impl Into<String>, e: MCEstimate) {
        self.estimates.push(NamedEstimate { name: name.into(), estimate: e });
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

/// Runs one scenario (optionally with its seed replaced).
pub fn run_scenario(scenario: &Scenario, seed: Option<u64>) -> Result<Report> {
    let mut sc = scenario.clone();
    if let Some(s) = seed {
        sc.sim.seed = s;
    }
    sc.validate()?;
    let start = Instant::now();
    let mut rec = Recorder::default();
    match sc.name {
        Experiment::G1 => g1::run(&sc, &mut rec)?,
        Experiment::KernelBounds => kernel_bounds::run(&sc, &mut rec)?,
        Experiment::Harnack => harnack::run(&sc, &mut rec)?,
        Experiment::ExitBound => exit_bound::run(&sc, &mut rec)?,
        Experiment::BhpConvex => bhp::run(&sc, &mut rec)?,
        Experiment::Counterexample => counterexample::run(&sc, &mut rec)?,
        Experiment::BhpLocal => {
            return Err(Error::Config("bhp_local is registered but has no implementation".into()))
        }
    }
    let allowed = sc.name.statements();
    debug_assert!(rec.checks.iter().all(|c| !c.statement.is_theory() || allowed.contains(&c.statement)));
    let worst = rec.estimates.iter().map(|e| e.estimate.censored_fraction).fold(0.0, f64::max);
    rec.checks.push(Check::new("censored_fraction", Statement::Censoring, Relation::Lt, worst, MAX_CENSORED, 0.0, 0.0));
    let passed = rec.checks.iter().all(|c| c.pass);
    Ok(Report {
        seed: sc.sim.seed,
        scenario: sc,
        version: env!("CARGO_PKG_VERSION").to_string(),
        passed,
        checks: rec.checks,
        estimates: rec.estimates,
        notes: rec.notes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Sim config for a length scale `r` given one tuned at `r_ref`: the
/// truncation scales like `r` and the time step like `r^α`.
pub(crate) fn scaled_sim(base: &SimConfig, alpha: f64, r: f64, r_ref: f64) -> SimConfig {
    let s = r / r_ref;
    SimConfig { epsilon: base.epsilon * s, time_step: base.time_step * s.powf(alpha), ..base.clone() }
}

/// Deterministic seed for the `k`-th independent sub-run.
pub(crate) fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.4}")).collect();
    format!("({})", parts.join(";"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_assigns_each_statement_to_one_experiment() {
        let mut seen = HashSet::new();
        for e in Experiment::ALL {
            for s in e.statements() {
                assert!(s.is_theory(), "{s:?}");
                assert!(seen.insert(*s), "{s:?} claimed twice");
            }
        }
        let all: HashSet<Statement> = Statement::THEORY.into_iter().collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.as_str()).unwrap(), e);
            let j = serde_json::to_string(&e).unwrap();
            assert_eq!(j, format!("\"{}\"", e.as_str()));
        }
        assert!(Experiment::parse("nope").is_err());
    }

    #[test]
    fn shipped_scenarios_parse() {
        for e in Experiment::ALL {
            match e.default_scenario() {
                Ok(sc) => {
                    assert_eq!(sc.name, e);
                    assert_eq!(sc.params.d, 2);
                }
                Err(_) => assert_eq!(e, Experiment::BhpLocal),
            }
        }
    }

    #[test]
    fn scenario_errors_name_the_key() {
        let missing = r#"{"name":"g1","params":{"d":2,"alpha":1.0},"estimate":{"n":10}}"#;
        let e = Scenario::from_json(missing).unwrap_err().to_string();
        assert!(e.contains("sim"), "{e}");
        let extra = r#"{"name":"g1","params":{"d":2,"alpha":1.0},"sim":{"epsilon":0.01,"h":0.001},
            "estimate":{"n":10},"bogus":1}"#;
        assert!(Scenario::from_json(extra).unwrap_err().to_string().contains("bogus"));
        let knob = r#"{"name":"g1","params":{"d":2,"alpha":1.0},"sim":{"epsilon":0.01,"h":0.001},
            "estimate":{"n":10},"experiment":{"upperr":1.0}}"#;
        let sc = Scenario::from_json(knob).unwrap();
        assert!(run_scenario(&sc, None).unwrap_err().to_string().contains("upperr"));
    }

    #[test]
    fn check_relations() {
        assert!(Check::new("a", Statement::Control, Relation::Le, 1.05, 1.0, 0.03, 0.02).pass);
        assert!(!Check::new("a", Statement::Control, Relation::Le, 1.06, 1.0, 0.03, 0.02).pass);
        assert!(Check::new("a", Statement::Control, Relation::Ge, 0.96, 1.0, 0.04, 0.0).pass);
        assert!(!Check::new("a", Statement::Control, Relation::Close, f64::NAN, 1.0, 1.0, 1.0).pass);
        assert!(!Check::new("a", Statement::Control, Relation::Lt, 1.0, 1.0, 1.0, 1.0).pass);
        let c = Check::new("a", Statement::Control, Relation::Close, 1.0, 1.2, 0.15, 0.1);
        assert!(c.pass && (c.tolerance - 0.25).abs() < 1e-15);
    }

    #[test]
    fn scaled_sim_scales_epsilon_and_step() {
        let base = SimConfig::new(0.01, 0.004, 3).unwrap();
        let s = scaled_sim(&base, 1.5, 0.05, 0.1);
        assert!((s.epsilon - 0.005).abs() < 1e-15);
        assert!((s.time_step - 0.004 * 0.5f64.powf(1.5)).abs() < 1e-15);
        assert_eq!(s.seed, 3);
    }

    #[test]
    fn sub_seeds_differ() {
        let s: HashSet<u64> = (0..100).map(|k| sub_seed(7, k)).collect();
        assert_eq!(s.len(), 100);
        assert_eq!(sub_seed(7, 3), sub_seed(7, 3));
    }

    #[test]
    fn csv_has_fixed_columns() {
        let sc = Experiment::Harnack.default_scenario().unwrap();
        let r = Report {
            scenario: sc,
            seed: 1,
            version: "x".into(),
            passed: true,
            checks: vec![Check::new("c", Statement::Control, Relation::Close, 1.0, 1.0, 0.0, 0.0)],
            estimates: vec![],
            notes: vec![],
            wall_time: 3.0,
        };
        let csv = r.to_csv();
        assert!(csv.starts_with("check_id,lhs,rhs,tolerance,pass\nc,1e0,1e0,0e0,true\n"));
        assert!(r.body_json().contains("\"wall_time\": 0.0"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        r.write_atomic(&path, false).unwrap();
        let back: Report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
