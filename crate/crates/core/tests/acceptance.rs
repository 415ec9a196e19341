//! One line per acceptance criterion. Exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qwparadox::contextuality::{
    build_events, enumerate_nchv, kcbs_value, max_yes, verify_exclusivity, CheckLevel, EventLabel, ExclusivityGraph,
};
use qwparadox::harness::{
    engine_probabilities, run_setup, AngleSet, EngineKind, Estimate, SetupConfig, ViolationReport,
};
use qwparadox::optics::{compile_reference_circuit, validate_table1};
use qwparadox::selection::{counterfactual_probability, postselection_probability, BlockSpec, CanonicalState};
use qwparadox::walk::StepOperator;
use qwparadox::{BasisState, CoinState, Lattice, StateVector};

const TOL: f64 = 1e-12;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lattice() -> Lattice {
    Lattice::default()
}

fn walk() -> StepOperator {
    StepOperator::new(lattice())
}

fn pre0() -> StateVector {
    CanonicalState::Pre0.vector(lattice()).unwrap()
}

fn c1_postselection() -> Check {
    let t = Instant::now();
    let p = postselection_probability(&walk(), &pre0(), None).map_err(|e| e.to_string())?;
    let dt = t.elapsed();
    ensure(
        (p - 1.0 / 25.0).abs() < TOL && dt < Duration::from_secs(1),
        format!("p = {p:.15} (target 1/25), {:.2} ms", dt.as_secs_f64() * 1e3),
    )
}

fn c2_blocked() -> Check {
    let u = walk();
    let a = postselection_probability(&u, &pre0(), Some(BlockSpec::new(0, 0).unwrap())).map_err(|e| e.to_string())?;
    let b = postselection_probability(&u, &pre0(), Some(BlockSpec::new(5, 1).unwrap())).map_err(|e| e.to_string())?;
    ensure(a < TOL && b < TOL, format!("block (0,0): {a:.3e}, block (5,1): {b:.3e}"))
}

fn c3_paradox() -> Check {
    let u = walk();
    let a = counterfactual_probability(&u, 0, 0).map_err(|e| e.to_string())?;
    let b = counterfactual_probability(&u, 5, 1).map_err(|e| e.to_string())?;
    ensure((a - 1.0).abs() < TOL && (b - 1.0).abs() < TOL, format!("p(x=0,t=0) = {a:.15}, p(x=5,t=1) = {b:.15}"))
}

fn c4_contextuality() -> Check {
    let g = ExclusivityGraph::clifton();
    let events = build_events(lattice()).map_err(|e| e.to_string())?;
    let rep = verify_exclusivity(&events, &g).map_err(|e| e.to_string())?;
    let full: Vec<_> = rep.edges.iter().filter(|e| e.level == CheckLevel::Full).collect();
    let worst_edge = rep.edges.iter().map(|e| e.product_norm).fold(0.0, f64::max);
    let worst_triple = rep.triples.iter().map(|t| t.deviation).fold(0.0, f64::max);
    let forced = BTreeMap::from([(EventLabel::Pre, true), (EventLabel::Post, true)]);
    let scanned = 1usize << g.vertices.len();
    let found = enumerate_nchv(&g, &forced);
    ensure(
        full.len() == 11
            && worst_edge < TOL
            && rep.triples.len() == 2
            && worst_triple < TOL
            && scanned == 256
            && found.is_empty(),
        format!(
            "{} edges, max ‖ΠaΠb‖ = {worst_edge:.1e}; {} triples, max ‖ΣΠ−I‖ = {worst_triple:.1e}; {} of {scanned} assignments admissible with pre=post=YES",
            full.len(),
            rep.triples.len(),
            found.len()
        ),
    )
}

fn c5_kcbs() -> Check {
    let events = build_events(lattice()).map_err(|e| e.to_string())?;
    let k = kcbs_value(&events, &pre0()).map_err(|e| e.to_string())?;
    let bound = max_yes(&ExclusivityGraph::kcbs_cycle()).ok_or("empty enumeration")? as f64;
    let p = postselection_probability(&walk(), &pre0(), None).map_err(|e| e.to_string())?;
    ensure(
        (k.value - 51.0 / 25.0).abs() < TOL && bound == 2.0 && k.value > bound && ((k.value - bound) - p).abs() < TOL,
        format!(
            "KCBS(pre0) = {:.15}, enumerated bound {bound}, excess − p_post = {:.1e}",
            k.value,
            (k.value - bound) - p
        ),
    )
}

fn c6_optics() -> Check {
    let rep = validate_table1(&compile_reference_circuit()).map_err(|e| e.to_string())?;
    let hwp2 = rep.plates.iter().find(|p| p.name == "HWP2").ok_or("no HWP2")?;
    let fids: Vec<String> = rep.fidelities.iter().map(|f| format!("{} {:.8}", f.stage, f.fidelity)).collect();
    ensure(
        rep.fidelities.iter().all(|f| f.fidelity >= 0.999) && (hwp2.exact_deg - 13.3).abs() < 0.05,
        format!("{}; HWP2 exact {:.4}° vs 13.3°", fids.join(", "), hwp2.exact_deg),
    )
}

fn c7_monte_carlo() -> Check {
    let t = Instant::now();
    let mut p = Vec::new();
    let mut var = 0.0;
    for seed in 0..100u64 {
        let cfg = SetupConfig { seed, photons_per_run: 11000, ..SetupConfig::new(1) };
        let r = &run_setup(&cfg).map_err(|e| e.to_string())?[0];
        p.push(r.p_hat.ok_or("no detections")?);
        var += r.std_err.unwrap().powi(2);
    }
    let dt = t.elapsed();
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let pooled = (var / n).sqrt() / n.sqrt();
    ensure(
        (mean - 0.04).abs() < 3.0 * pooled && dt < Duration::from_secs(10),
        format!("mean p_hat {mean:.6}, |Δ| = {:.2} pooled SE, {:.2} s", (mean - 0.04).abs() / pooled, dt.as_secs_f64()),
    )
}

fn c8_significance() -> Check {
    let e = |p| Estimate::from_probability(p, 5000).unwrap();
    let rep = ViolationReport::from_estimates([e(0.0498), e(0.0056), e(0.0075)]);
    let s = rep.significance.ok_or("significance undefined")?;
    ensure(s >= 8.0, format!("margin {:.4} ± {:.5} → {s:.2}σ", rep.margin, rep.sigma))
}

fn random_interior_state(rng: &mut ChaCha8Rng) -> StateVector {
    let l = lattice();
    let mut s = StateVector::empty(l);
    for b in l.basis() {
        // these two would be shifted off the lattice
        if b == BasisState::new(l.lo, CoinState::Plus) || b == BasisState::new(l.hi, CoinState::Minus) {
            continue;
        }
        s.add_term(b, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).unwrap();
    }
    s.normalized().unwrap()
}

fn c9_oracles() -> Check {
    let u = walk();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let s = random_interior_state(&mut rng);
        let sparse = u.step(&s).map_err(|e| e.to_string())?;
        let dense = u.dense().apply(&s).map_err(|e| e.to_string())?;
        worst = worst.max(sparse.max_deviation(&dense).map_err(|e| e.to_string())?);
        let sparse2 = u.step(&sparse).map_err(|e| e.to_string())?;
        let dense2 = u.dense().apply(&dense).map_err(|e| e.to_string())?;
        worst = worst.max(sparse2.max_deviation(&dense2).map_err(|e| e.to_string())?);
    }
    let mut optics_gap: f64 = 0.0;
    for setup in 1..=3 {
        let model = engine_probabilities(&SetupConfig::new(setup)).map_err(|e| e.to_string())?;
        let cfg = SetupConfig { engine: EngineKind::Optics, angles: AngleSet::Exact, ..SetupConfig::new(setup) };
        let optics = engine_probabilities(&cfg).map_err(|e| e.to_string())?;
        optics_gap = optics_gap
            .max((model.post_given_detected - optics.post_given_detected).abs())
            .max((model.absorbed - optics.absorbed).abs());
    }
    ensure(
        worst < TOL && optics_gap < 1e-10,
        format!("sparse vs dense over 1000 states: {worst:.1e}; optics vs model over 3 setups: {optics_gap:.1e}"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("post-selection probability", c1_postselection),
        ("blocked probabilities", c2_blocked),
        ("paradox", c3_paradox),
        ("contextuality verification", c4_contextuality),
        ("KCBS", c5_kcbs),
        ("optics", c6_optics),
        ("Monte Carlo at desk scale", c7_monte_carlo),
        ("significance", c8_significance),
        ("oracle equivalence", c9_oracles),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
