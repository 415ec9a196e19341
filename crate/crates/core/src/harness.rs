//! Photon-counting simulation of the three setups.
//!
//! Setup 1 is unblocked, setup 2 blocks `x=0` at `t=0`, setup 3 blocks `x=5` at
//! `t=1`. Every heralded photon is an independent three-way trial: absorbed by
//! the block, post-selected, or detected in the complement.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::circuit::DephasingPatterns;
use crate::optics::{
    compile_reference_circuit, exact_reference_circuit, ImperfectionModel, OpticalCircuit, Realization,
};
use crate::selection::{selection_outcome, BlockSpec, CanonicalState};
use crate::state::Lattice;
use crate::walk::StepOperator;

pub const DEFAULT_PHOTONS: u64 = 11000;
/// Calibration residuals above this are flagged as unreachable targets.
pub const CALIBRATION_FLAG: f64 = 1e-4;

/// Stream offset that keeps plate sampling apart from photon sampling.
const PLATE_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    /// Walk-operator probabilities.
    #[default]
    Model,
    /// Propagation through the beam-displacer circuit.
    Optics,
}

/// Which plate angles the optics engine uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSet {
    #[default]
    Exact,
    Table,
}

impl AngleSet {
    pub fn circuit(self) -> OpticalCircuit {
        match self {
            AngleSet::Exact => exact_reference_circuit(),
            AngleSet::Table => compile_reference_circuit(),
        }
    }
}

pub fn setup_block(setup: u8) -> Result<Option<BlockSpec>> {
    match setup {
        1 => Ok(None),
        2 => Ok(Some(BlockSpec::new(0, 0)?)),
        3 => Ok(Some(BlockSpec::new(5, 1)?)),
        _ => Err(Error::Config(format!("setup must be 1, 2 or 3, got {setup}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupConfig {
    pub setup: u8,
    #[serde(default = "default_photons")]
    pub photons_per_run: u64,
    #[serde(default = "one")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imperfections: Option<ImperfectionModel>,
    #[serde(default)]
    pub engine: EngineKind,
    #[serde(default)]
    pub angles: AngleSet,
    /// Fraction of detected photons replaced by accidentals split evenly between outcomes.
    #[serde(default)]
    pub accidental_rate: f64,
}

fn default_photons() -> u64 {
    DEFAULT_PHOTONS
}

fn one() -> u32 {
    1
}

impl SetupConfig {
    pub fn new(setup: u8) -> Self {
        Self {
            setup,
            photons_per_run: DEFAULT_PHOTONS,
            runs: 1,
            seed: 0,
            imperfections: None,
            engine: EngineKind::Model,
            angles: AngleSet::Exact,
            accidental_rate: 0.0,
        }
    }

    pub fn block(&self) -> Result<Option<BlockSpec>> {
        setup_block(self.setup)
    }

    pub fn validate(&self) -> Result<()> {
        self.block()?;
        if self.photons_per_run == 0 || self.runs == 0 {
            return Err(Error::Config("photons per run and runs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.accidental_rate) {
            return Err(Error::Config(format!("accidental rate {} outside [0, 1]", self.accidental_rate)));
        }
        if let Some(m) = &self.imperfections {
            m.validate()?;
            if self.engine == EngineKind::Model {
                return Err(Error::Config("imperfections need the optics engine".into()));
            }
        }
        Ok(())
    }
}

/// Outcome probabilities of a single heralded photon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonProbabilities {
    pub absorbed: f64,
    /// Post-selection probability given the photon was detected.
    pub post_given_detected: f64,
}

/// Per-setup engine state shared by all runs.
struct Prepared {
    fixed: Option<PhotonProbabilities>,
    circuit: Option<OpticalCircuit>,
    model: Option<ImperfectionModel>,
}

fn from_trace(circuit: &OpticalCircuit, t: &crate::optics::ExpectedTrace) -> Result<PhotonProbabilities> {
    let detected = 1.0 - t.lost;
    if detected < crate::state::PRUNE {
        return Err(Error::TotalAbsorption { survival: detected });
    }
    let post = (t.port(&circuit.post_port) / detected).clamp(0.0, 1.0);
    Ok(PhotonProbabilities { absorbed: t.lost.clamp(0.0, 1.0), post_given_detected: post })
}

fn optics_probabilities(
    circuit: &OpticalCircuit,
    model: Option<&ImperfectionModel>,
    offsets: Vec<f64>,
) -> Result<PhotonProbabilities> {
    let base = Realization {
        angle_offsets_deg: offsets,
        path_phases: model.map(|m| m.path_phases.clone()).unwrap_or_default(),
        ..Realization::default()
    };
    let patterns = DephasingPatterns::new(circuit, &circuit.input_state(), &base)?;
    from_trace(circuit, &patterns.mix(model.map_or(1.0, |m| m.visibility)))
}

/// Engine probabilities for the ideal or fixed-angle configuration.
pub fn engine_probabilities(cfg: &SetupConfig) -> Result<PhotonProbabilities> {
    cfg.validate()?;
    match cfg.engine {
        EngineKind::Model => {
            let lattice = Lattice::default();
            let u = StepOperator::new(lattice);
            let o = selection_outcome(&u, &CanonicalState::Pre0.vector(lattice)?, cfg.block()?)?;
            Ok(PhotonProbabilities { absorbed: 1.0 - o.survival, post_given_detected: o.post_given_survival })
        }
        EngineKind::Optics => {
            let circuit = blocked_circuit(cfg)?;
            optics_probabilities(&circuit, cfg.imperfections.as_ref(), Vec::new())
        }
    }
}

fn blocked_circuit(cfg: &SetupConfig) -> Result<OpticalCircuit> {
    let c = cfg.angles.circuit();
    match cfg.block()? {
        Some(b) => c.with_block(b),
        None => Ok(c),
    }
}

fn prepare(cfg: &SetupConfig) -> Result<Prepared> {
    cfg.validate()?;
    let resampled = cfg.imperfections.as_ref().filter(|m| m.hwp_angle_sigma_deg > 0.0);
    if let Some(m) = resampled {
        return Ok(Prepared { fixed: None, circuit: Some(blocked_circuit(cfg)?), model: Some(m.clone()) });
    }
    Ok(Prepared { fixed: Some(engine_probabilities(cfg)?), circuit: None, model: None })
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn run_probabilities(cfg: &SetupConfig, prep: &Prepared, run: u32) -> Result<PhotonProbabilities> {
    if let Some(p) = prep.fixed {
        return Ok(p);
    }
    let (circuit, model) = (prep.circuit.as_ref().expect("prepared"), prep.model.as_ref().expect("prepared"));
    // plate errors are redrawn for every run
    let mut rng = stream(cfg.seed, PLATE_STREAM | (u64::from(cfg.setup) << 32) | u64::from(run));
    let offsets =
        (0..circuit.hwp_count()).map(|_| model.hwp_angle_sigma_deg * rng.sample::<f64, _>(StandardNormal)).collect();
    optics_probabilities(circuit, Some(model), offsets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsRecord {
    pub setup: u8,
    pub run: u32,
    #[serde(rename = "C_post")]
    pub c_post: u64,
    #[serde(rename = "C_not_post")]
    pub c_not_post: u64,
    pub absorbed: u64,
    pub p_hat: Option<f64>,
    pub std_err: Option<f64>,
}

impl CountsRecord {
    pub fn detected(&self) -> u64 {
        self.c_post + self.c_not_post
    }

    fn new(setup: u8, run: u32, c_post: u64, c_not_post: u64, absorbed: u64) -> Self {
        let est = Estimate::from_counts(c_post, c_post + c_not_post);
        Self {
            setup,
            run,
            c_post,
            c_not_post,
            absorbed,
            p_hat: est.as_ref().map(|e| e.p_hat),
            std_err: est.as_ref().map(|e| e.std_err),
        }
    }
}

fn sample_run(cfg: &SetupConfig, p: PhotonProbabilities, run: u32) -> CountsRecord {
    let mut rng = stream(cfg.seed, (u64::from(cfg.setup) << 32) | u64::from(run));
    let post = (1.0 - cfg.accidental_rate) * p.post_given_detected + cfg.accidental_rate / 2.0;
    let cut_post = p.absorbed + (1.0 - p.absorbed) * post;
    let (mut c_post, mut c_not, mut absorbed) = (0u64, 0u64, 0u64);
    for _ in 0..cfg.photons_per_run {
        let u: f64 = rng.gen();
        if u < p.absorbed {
            absorbed += 1;
        } else if u < cut_post {
            c_post += 1;
        } else {
            c_not += 1;
        }
    }
    CountsRecord::new(cfg.setup, run, c_post, c_not, absorbed)
}

/// All runs of one setup, in run order. Runs execute in parallel on
/// independent random streams, so results do not depend on the thread count.
pub fn run_setup(cfg: &SetupConfig) -> Result<Vec<CountsRecord>> {
    let prep = prepare(cfg)?;
    (0..cfg.runs).into_par_iter().map(|run| Ok(sample_run(cfg, run_probabilities(cfg, &prep, run)?, run))).collect()
}

/// Binomial estimate of a post-selection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub detected: u64,
}

impl Estimate {
    /// `None` when nothing was detected.
    pub fn from_counts(c_post: u64, detected: u64) -> Option<Self> {
        if detected == 0 {
            return None;
        }
        let p = c_post as f64 / detected as f64;
        Some(Self { p_hat: p, std_err: (p * (1.0 - p) / detected as f64).sqrt(), detected })
    }

    /// The estimate a measured frequency `p` over `detected` photons would carry.
    pub fn from_probability(p: f64, detected: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityOutOfRange { value: p });
        }
        if detected == 0 {
            return Err(Error::Config("detected count must be positive".into()));
        }
        Ok(Self { p_hat: p, std_err: (p * (1.0 - p) / detected as f64).sqrt(), detected })
    }

    pub fn pooled(records: &[CountsRecord]) -> Option<Self> {
        let post = records.iter().map(|r| r.c_post).sum();
        let det = records.iter().map(|r| r.detected()).sum();
        Self::from_counts(post, det)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetupSummary {
    pub setup: u8,
    pub engine: PhotonProbabilities,
    pub estimate: Estimate,
    pub runs: Vec<CountsRecord>,
}

/// Test of `p₁ ≤ p₂ + p₃`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub setups: Vec<SetupSummary>,
    pub margin: f64,
    pub sigma: f64,
    /// `margin / sigma`; withheld when any setup has a vanishing standard error.
    pub significance: Option<f64>,
    /// Some `p̂` sits at 0 or 1 so its binomial error is exactly zero, as for the
    /// ideal engine where `p₂ = p₃ = 0`. The ratio would overstate the evidence.
    pub exact_zero_denominators: bool,
    pub violated: bool,
}

impl ViolationReport {
    pub fn from_estimates(e: [Estimate; 3]) -> Self {
        Self::build(Vec::new(), e)
    }

    fn build(setups: Vec<SetupSummary>, e: [Estimate; 3]) -> Self {
        let margin = e[0].p_hat - e[1].p_hat - e[2].p_hat;
        let sigma = e.iter().map(|x| x.std_err * x.std_err).sum::<f64>().sqrt();
        let zero = e.iter().any(|x| x.std_err == 0.0);
        Self {
            setups,
            margin,
            sigma,
            significance: (!zero).then(|| margin / sigma),
            exact_zero_denominators: zero,
            violated: margin > 0.0,
        }
    }
}

/// Runs setups 1–3 and tests the inequality on the pooled estimates.
pub fn run_experiment(configs: &[SetupConfig]) -> Result<ViolationReport> {
    let mut sorted: Vec<&SetupConfig> = configs.iter().collect();
    sorted.sort_by_key(|c| c.setup);
    if sorted.iter().map(|c| c.setup).collect::<Vec<_>>() != [1, 2, 3] {
        return Err(Error::Config("need exactly one configuration for each of setups 1, 2, 3".into()));
    }
    if sorted.iter().any(|c| c.engine != sorted[0].engine) {
        return Err(Error::Config("all setups must use the same engine".into()));
    }
    let mut setups = Vec::new();
    let mut est = Vec::new();
    for cfg in sorted {
        let runs = run_setup(cfg)?;
        let e = Estimate::pooled(&runs).ok_or(Error::UndefinedEstimate { setup: cfg.setup })?;
        est.push(e);
        setups.push(SetupSummary { setup: cfg.setup, engine: engine_probabilities_mean(cfg)?, estimate: e, runs });
    }
    Ok(ViolationReport::build(setups, [est[0], est[1], est[2]]))
}

/// Engine probabilities; with plate errors, the mean over a fixed sample.
fn engine_probabilities_mean(cfg: &SetupConfig) -> Result<PhotonProbabilities> {
    let prep = prepare(cfg)?;
    if let Some(p) = prep.fixed {
        return Ok(p);
    }
    let n = cfg.runs.min(64);
    let all: Vec<PhotonProbabilities> = (0..n).map(|r| run_probabilities(cfg, &prep, r)).collect::<Result<_>>()?;
    let k = n as f64;
    Ok(PhotonProbabilities {
        absorbed: all.iter().map(|p| p.absorbed).sum::<f64>() / k,
        post_given_detected: all.iter().map(|p| p.post_given_detected).sum::<f64>() / k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub sigma_grid: Vec<f64>,
    pub visibility_grid: Vec<f64>,
    /// Plate-error samples averaged per grid point (common to all points).
    pub samples: usize,
    pub seed: u64,
    pub angles: AngleSet,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            sigma_grid: grid(0.0, 1.0, 21),
            visibility_grid: grid(0.95, 1.0, 21),
            samples: 32,
            seed: 0,
            angles: AngleSet::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub model: ImperfectionModel,
    pub targets: [f64; 3],
    pub expected: [f64; 3],
    pub residual: f64,
    /// Residual above [`CALIBRATION_FLAG`]: targets not reachable by the grid.
    pub flagged: bool,
}

/// Grid search for the imperfection model whose expected post-selection
/// probabilities are closest (squared distance) to `targets`.
pub fn calibrate(targets: [f64; 3], opts: &CalibrationOptions) -> Result<Calibration> {
    for t in targets {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ProbabilityOutOfRange { value: t });
        }
    }
    if opts.sigma_grid.is_empty() || opts.visibility_grid.is_empty() || opts.samples == 0 {
        return Err(Error::Config("calibration grid and sample count must be non-empty".into()));
    }
    let circuits: Vec<OpticalCircuit> = (1..=3u8)
        .map(|s| {
            let mut cfg = SetupConfig::new(s);
            cfg.angles = opts.angles;
            blocked_circuit(&cfg)
        })
        .collect::<Result<_>>()?;
    let n_hwp = circuits[0].hwp_count();
    let mut rng = stream(opts.seed, PLATE_STREAM);
    let z: Vec<Vec<f64>> =
        (0..opts.samples).map(|_| (0..n_hwp).map(|_| rng.sample(StandardNormal)).collect()).collect();

    // for each sigma: expected p per (visibility, setup)
    let per_sigma: Vec<Vec<[f64; 3]>> = opts
        .sigma_grid
        .par_iter()
        .map(|&sigma| -> Result<Vec<[f64; 3]>> {
            let draws: &[Vec<f64>] = if sigma == 0.0 { &z[..1] } else { &z };
            let mut acc = vec![[0.0; 3]; opts.visibility_grid.len()];
            for zs in draws {
                let offsets: Vec<f64> = zs.iter().map(|x| sigma * x).collect();
                for (k, c) in circuits.iter().enumerate() {
                    let base = Realization { angle_offsets_deg: offsets.clone(), ..Realization::default() };
                    let pats = DephasingPatterns::new(c, &c.input_state(), &base)?;
                    for (vi, &v) in opts.visibility_grid.iter().enumerate() {
                        acc[vi][k] += from_trace(c, &pats.mix(v))?.post_given_detected;
                    }
                }
            }
            let n = draws.len() as f64;
            Ok(acc.into_iter().map(|a| a.map(|x| x / n)).collect())
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, usize, usize)> = None;
    for (si, row) in per_sigma.iter().enumerate() {
        for (vi, e) in row.iter().enumerate() {
            let r: f64 = (0..3).map(|k| (e[k] - targets[k]).powi(2)).sum();
            if best.is_none_or(|(b, _, _)| r < b) {
                best = Some((r, si, vi));
            }
        }
    }
    let (residual, si, vi) = best.expect("non-empty grid");
    Ok(Calibration {
        model: ImperfectionModel {
            hwp_angle_sigma_deg: opts.sigma_grid[si],
            visibility: opts.visibility_grid[vi],
            path_phases: Default::default(),
        },
        targets,
        expected: per_sigma[si][vi],
        residual,
        flagged: residual > CALIBRATION_FLAG,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_blocks() {
        assert_eq!(setup_block(1).unwrap(), None);
        assert_eq!(setup_block(2).unwrap(), Some(BlockSpec::new(0, 0).unwrap()));
        assert_eq!(setup_block(3).unwrap(), Some(BlockSpec::new(5, 1).unwrap()));
        assert!(setup_block(4).is_err());
    }

    #[test]
    fn conservation_holds_every_run() {
        let mut cfg = SetupConfig::new(2);
        cfg.runs = 5;
        cfg.photons_per_run = 1000;
        for r in run_setup(&cfg).unwrap() {
            assert_eq!(r.c_post + r.c_not_post + r.absorbed, 1000);
            assert_eq!(r.c_post, 0);
        }
    }

    #[test]
    fn model_and_optics_agree() {
        for s in 1..=3 {
            let mut cfg = SetupConfig::new(s);
            let m = engine_probabilities(&cfg).unwrap();
            cfg.engine = EngineKind::Optics;
            let o = engine_probabilities(&cfg).unwrap();
            assert!((m.absorbed - o.absorbed).abs() < 1e-10, "{s}");
            assert!((m.post_given_detected - o.post_given_detected).abs() < 1e-10, "{s}");
        }
    }

    #[test]
    fn imperfections_need_optics() {
        let mut cfg = SetupConfig::new(1);
        cfg.imperfections = Some(ImperfectionModel::ideal());
        assert!(matches!(run_setup(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn ideal_engine_flags_zero_denominators() {
        let cfgs: Vec<SetupConfig> = (1..=3).map(SetupConfig::new).collect();
        let rep = run_experiment(&cfgs).unwrap();
        assert!(rep.violated);
        assert!(rep.exact_zero_denominators);
        assert!(rep.significance.is_none());
        assert!(rep.sigma > 0.0);
    }

    #[test]
    fn zero_detection_is_undefined() {
        assert_eq!(Estimate::from_counts(0, 0), None);
    }

    #[test]
    fn accidentals_pull_towards_half() {
        let mut cfg = SetupConfig::new(2);
        cfg.accidental_rate = 1.0;
        cfg.photons_per_run = 20000;
        let r = &run_setup(&cfg).unwrap()[0];
        assert!((r.p_hat.unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn calibrate_ideal_targets() {
        let opts = CalibrationOptions {
            sigma_grid: grid(0.0, 1.0, 3),
            visibility_grid: grid(0.95, 1.0, 3),
            samples: 4,
            ..Default::default()
        };
        let c = calibrate([0.04, 0.0, 0.0], &opts).unwrap();
        assert_eq!(c.model.hwp_angle_sigma_deg, 0.0);
        assert_eq!(c.model.visibility, 1.0);
        assert!(c.residual < 1e-20);
        assert!(!c.flagged);
        assert!(calibrate([1.5, 0.0, 0.0], &opts).is_err());
    }
}
