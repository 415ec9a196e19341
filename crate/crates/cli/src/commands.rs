use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use qwparadox::contextuality::{
    build_events, enumerate_nchv, final_inequality, kcbs_value, max_yes, verify_exclusivity, EventLabel,
    ExclusivityGraph,
};
use qwparadox::harness::{
    calibrate, run_experiment, run_setup, AngleSet, CalibrationOptions, CountsRecord, EngineKind, Estimate, SetupConfig,
};
use qwparadox::optics::{
    compile_reference_circuit, exact_reference_circuit, propagate, validate_table1, ImperfectionModel, OpticalCircuit,
};
use qwparadox::selection::{counterfactual_probability, selection_outcome, BlockSpec, CanonicalState};
use qwparadox::walk::StepOperator;
use qwparadox::{Lattice, StateVector};

use crate::args::{
    AngleChoice, Cli, Command, ContextualityCmd, EngineChoice, ExperimentCmd, Format, GraphChoice, OpticsCmd, WalkCmd,
};
use crate::{require_json, Artifact, Failure, Outcome};

type Out = Result<Outcome, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn lattice(cli: &Cli) -> Result<Lattice, Failure> {
    Lattice::parse(&cli.global.lattice).map_err(|e| usage(format!("--lattice: {e}")))
}

fn block(spec: &Option<String>) -> Result<Option<BlockSpec>, Failure> {
    spec.as_deref().map(|s| BlockSpec::parse(s).map_err(|e| usage(format!("--block: {e}")))).transpose()
}

/// A canonical name or a state file.
fn state(arg: &str, lattice: Lattice) -> Result<(StateVector, String), Failure> {
    if let Ok(c) = arg.parse::<CanonicalState>() {
        return Ok((c.vector(lattice)?, c.name().to_string()));
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(usage(format!("`{arg}` is neither a canonical state nor a file")));
    }
    Ok((read_json(path)?, path.display().to_string()))
}

fn artifact(cli: &Cli, command: &impl Serialize, resolved: Value, result: impl Serialize) -> Artifact {
    Artifact::Json(json!({
        "config": { "command": command, "global": cli.global, "resolved": resolved },
        "result": result,
    }))
}

fn ok(artifact: Artifact, summary: String) -> Out {
    Ok(Outcome { artifact, summary, valid: true })
}

pub fn dispatch(cli: &Cli) -> Out {
    match &cli.command {
        Command::Walk(c) => walk(cli, c),
        Command::Contextuality(c) => contextuality(cli, c),
        Command::Optics(c) => optics(cli, c),
        Command::Experiment(c) => experiment(cli, c),
    }
}

fn walk(cli: &Cli, cmd: &WalkCmd) -> Out {
    require_json(cli.global.format, "walk")?;
    let lat = lattice(cli)?;
    match cmd {
        WalkCmd::Evolve { state: s, steps, back } => {
            let (s, name) = state(s, lat)?;
            let u = StepOperator::new(s.lattice());
            let out = if *back { u.evolve_back(&s, *steps)? } else { u.evolve(&s, *steps)? };
            let summary = format!(
                "{} {name} by {steps} step(s): {} terms, norm² {:.12}",
                if *back { "evolved back" } else { "evolved" },
                out.len(),
                out.norm_sqr()
            );
            ok(artifact(cli, cmd, json!({ "state": name, "lattice": [s.lattice().lo, s.lattice().hi] }), &out), summary)
        }
        WalkCmd::Postselect { state: s, block: b } => {
            let (s, name) = state(s, lat)?;
            let blk = block(b)?;
            let o = selection_outcome(&StepOperator::new(s.lattice()), &s, blk)?;
            let summary = format!(
                "post-selection probability {:.12} from {name}{} (survival {:.12})",
                o.post_given_survival,
                blk.map(|b| format!(" with block {b}")).unwrap_or_default(),
                o.survival
            );
            let result = json!({ "probability": o.post_given_survival, "survival": o.survival });
            ok(artifact(cli, cmd, json!({ "state": name, "block": blk.map(|b| b.to_string()) }), result), summary)
        }
        WalkCmd::Abl { x, t } => {
            let p = counterfactual_probability(&StepOperator::new(lat), *x, *t)?;
            let summary = format!("counterfactual probability of x={x} at t={t}: {p:.12}");
            ok(artifact(cli, cmd, json!({ "lattice": [lat.lo, lat.hi] }), json!({ "probability": p })), summary)
        }
    }
}

fn parse_force(items: &[String]) -> Result<BTreeMap<EventLabel, bool>, Failure> {
    let mut out = BTreeMap::new();
    for item in items {
        let (label, value) =
            item.split_once('=').ok_or_else(|| usage(format!("--force expects event=yes|no, got `{item}`")))?;
        let label: EventLabel = label.trim().parse().map_err(|e| usage(format!("--force: {e}")))?;
        let value = match value.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" | "1" => true,
            "no" | "false" | "0" => false,
            v => return Err(usage(format!("--force: `{v}` is not yes/no"))),
        };
        out.insert(label, value);
    }
    Ok(out)
}

fn contextuality(cli: &Cli, cmd: &ContextualityCmd) -> Out {
    require_json(cli.global.format, "contextuality")?;
    let lat = lattice(cli)?;
    let events = build_events(lat)?;
    let resolved = json!({ "lattice": [lat.lo, lat.hi] });
    match cmd {
        ContextualityCmd::Verify => {
            let graph = ExclusivityGraph::clifton();
            let report = verify_exclusivity(&events, &graph)?;
            let forced = BTreeMap::from([(EventLabel::Pre, true), (EventLabel::Post, true)]);
            let nchv = enumerate_nchv(&graph, &forced);
            let pre0 = CanonicalState::Pre0.vector(lat)?;
            let kcbs = kcbs_value(&events, &pre0)?;
            let u = StepOperator::new(lat);
            let p = |setup: Option<BlockSpec>| selection_outcome(&u, &pre0, setup).map(|o| o.post_given_survival);
            let ineq = final_inequality(p(None)?, p(Some(BlockSpec::new(0, 0)?))?, p(Some(BlockSpec::new(5, 1)?))?)?;
            let valid = report.all_pass && nchv.is_empty();
            let summary = format!(
                "{}: {} edge checks, {} completeness triples, {} NCHV assignments with pre=post=YES, KCBS {:.6} (bound 2)",
                if valid { "all checks pass" } else { "CHECKS FAILED" },
                report.edges.len(),
                report.triples.len(),
                nchv.len(),
                kcbs.value
            );
            let failures = report.failures();
            let result = json!({
                "all_pass": valid,
                "failures": failures,
                "exclusivity": report,
                "nchv": {
                    "forced": { "pre": "YES", "post": "YES" },
                    "assignments": nchv.iter().map(|a| a.to_yes_no()).collect::<Vec<_>>(),
                },
                "kcbs_cycle_max_yes": max_yes(&ExclusivityGraph::kcbs_cycle()),
                "kcbs": kcbs,
                "final_inequality": ineq,
            });
            Ok(Outcome { artifact: artifact(cli, cmd, resolved, result), summary, valid })
        }
        ContextualityCmd::Kcbs { state: s } => {
            let (s, name) = state(s, lat)?;
            let k = kcbs_value(&events, &s)?;
            let summary = format!(
                "KCBS value on {name}: {:.12} ({} the classical bound {})",
                k.value,
                if k.exceeds_bound { "exceeds" } else { "within" },
                k.classical_bound
            );
            ok(artifact(cli, cmd, json!({ "state": name, "lattice": [lat.lo, lat.hi] }), k), summary)
        }
        ContextualityCmd::Enumerate { force, graph } => {
            let g = match graph {
                GraphChoice::Clifton => ExclusivityGraph::clifton(),
                GraphChoice::Kcbs => ExclusivityGraph::kcbs_cycle(),
            };
            let forced = parse_force(force)?;
            if let Some(l) = forced.keys().find(|l| !g.vertices.contains(l)) {
                return Err(usage(format!("--force: {l} is not a vertex of the chosen graph")));
            }
            let found = enumerate_nchv(&g, &forced);
            let summary = format!(
                "{} admissible assignments over {} events (2^{} scanned)",
                found.len(),
                g.vertices.len(),
                g.vertices.len()
            );
            let result = json!({
                "graph": g,
                "count": found.len(),
                "max_yes": max_yes(&g),
                "assignments": found.iter().map(|a| a.to_yes_no()).collect::<Vec<_>>(),
            });
            ok(
                artifact(
                    cli,
                    cmd,
                    json!({ "forced": forced.iter().map(|(k, v)| (k.name(), v)).collect::<BTreeMap<_, _>>() }),
                    result,
                ),
                summary,
            )
        }
    }
}

fn angle_circuit(a: AngleChoice) -> OpticalCircuit {
    match a {
        AngleChoice::Exact => exact_reference_circuit(),
        AngleChoice::Table => compile_reference_circuit(),
    }
}

fn load_circuit(path: &Option<std::path::PathBuf>, angles: AngleChoice) -> Result<OpticalCircuit, Failure> {
    match path {
        Some(p) => Ok(OpticalCircuit::from_json(&read(p)?)?),
        None => Ok(angle_circuit(angles)),
    }
}

fn optics(cli: &Cli, cmd: &OpticsCmd) -> Out {
    require_json(cli.global.format, "optics")?;
    match cmd {
        OpticsCmd::Compile { angles } => {
            let c = angle_circuit(*angles);
            let summary = format!(
                "reference circuit: {} stages, {} plates, {} beam displacers",
                c.stages.len(),
                c.hwp_count(),
                c.bd_count()
            );
            ok(artifact(cli, cmd, Value::Null, &c), summary)
        }
        OpticsCmd::Validate { circuit } => {
            let c = load_circuit(circuit, AngleChoice::Table)?;
            let rep = validate_table1(&c)?;
            let worst = rep.fidelities.iter().map(|f| f.fidelity).fold(f64::INFINITY, f64::min);
            let hwp2 = rep.plates.iter().find(|p| p.name == "HWP2").map(|p| p.exact_deg).unwrap_or(f64::NAN);
            let summary = format!(
                "{}: min fidelity {worst:.6}, {:?} convention, HWP2 exact {hwp2:.4}°, post intensity {:.6}",
                if rep.all_pass { "circuit valid" } else { "CIRCUIT INVALID" },
                rep.convention,
                rep.post_intensity
            );
            let valid = rep.all_pass;
            let resolved = json!({ "circuit": circuit.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "reference".into()) });
            Ok(Outcome { artifact: artifact(cli, cmd, resolved, rep), summary, valid })
        }
        OpticsCmd::Propagate { circuit, angles, block: b, imperfections } => {
            let mut c = load_circuit(circuit, *angles)?;
            if let Some(blk) = block(b)? {
                c = c.with_block(blk)?;
            }
            let model: Option<ImperfectionModel> = imperfections.as_deref().map(read_json).transpose()?;
            let p = propagate(&c, &c.input_state(), model.as_ref(), cli.global.seed)?;
            let detected = 1.0 - p.lost;
            let summary = format!(
                "post port intensity {:.12}, lost {:.12}, post given detected {:.12}",
                p.post_intensity,
                p.lost,
                if detected > 0.0 { p.post_intensity / detected } else { f64::NAN }
            );
            let resolved = json!({ "imperfections": model, "circuit": c });
            ok(artifact(cli, cmd, resolved, &p), summary)
        }
    }
}

#[derive(Serialize)]
struct CsvRow {
    setup: u8,
    run: u32,
    #[serde(rename = "C_post")]
    c_post: u64,
    #[serde(rename = "C_not_post")]
    c_not_post: u64,
    p_hat: Option<f64>,
    std_err: Option<f64>,
}

fn counts_csv(records: &[CountsRecord]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(CsvRow {
            setup: r.setup,
            run: r.run,
            c_post: r.c_post,
            c_not_post: r.c_not_post,
            p_hat: r.p_hat,
            std_err: r.std_err,
        })
        .map_err(|e| usage(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| usage(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn parse_setups(s: &str) -> Result<Vec<u8>, Failure> {
    match s {
        "all" => Ok(vec![1, 2, 3]),
        "1" | "2" | "3" => Ok(vec![s.parse().expect("digit")]),
        _ => Err(usage(format!("--setup must be 1, 2, 3 or all, got `{s}`"))),
    }
}

fn angle_set(a: AngleChoice) -> AngleSet {
    match a {
        AngleChoice::Exact => AngleSet::Exact,
        AngleChoice::Table => AngleSet::Table,
    }
}

fn experiment(cli: &Cli, cmd: &ExperimentCmd) -> Out {
    match cmd {
        ExperimentCmd::Run { setup, photons, runs, engine, angles, imperfections, accidental_rate, csv } => {
            let model: Option<ImperfectionModel> = imperfections.as_deref().map(read_json).transpose()?;
            let configs: Vec<SetupConfig> = parse_setups(setup)?
                .into_iter()
                .map(|s| SetupConfig {
                    photons_per_run: *photons,
                    runs: *runs,
                    seed: cli.global.seed,
                    imperfections: model.clone(),
                    engine: match engine {
                        EngineChoice::Model => EngineKind::Model,
                        EngineChoice::Optics => EngineKind::Optics,
                    },
                    angles: angle_set(*angles),
                    accidental_rate: *accidental_rate,
                    ..SetupConfig::new(s)
                })
                .collect();
            let (result, records, summary) = if configs.len() == 3 {
                let rep = run_experiment(&configs)?;
                let records: Vec<CountsRecord> = rep.setups.iter().flat_map(|s| s.runs.clone()).collect();
                let p: Vec<String> = rep.setups.iter().map(|s| format!("{:.5}", s.estimate.p_hat)).collect();
                let summary = format!(
                    "p = ({}), margin {:.5} ± {:.5}, significance {}{}",
                    p.join(", "),
                    rep.margin,
                    rep.sigma,
                    rep.significance.map(|s| format!("{s:.2}σ")).unwrap_or_else(|| "n/a".into()),
                    if rep.exact_zero_denominators { " (exact-zero denominators)" } else { "" }
                );
                (serde_json::to_value(&rep).expect("report serializes"), records, summary)
            } else {
                let records = run_setup(&configs[0])?;
                let est = Estimate::pooled(&records);
                let summary = format!(
                    "setup {}: {} run(s), pooled p_hat {}",
                    configs[0].setup,
                    records.len(),
                    est.map(|e| format!("{:.5} ± {:.5}", e.p_hat, e.std_err)).unwrap_or_else(|| "undefined".into())
                );
                (json!({ "setup": configs[0].setup, "estimate": est, "runs": records }), records, summary)
            };
            let table = counts_csv(&records)?;
            if let Some(path) = csv {
                fs::write(path, &table).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let art = match cli.global.format {
                Format::Json => artifact(cli, cmd, json!({ "setups": configs }), result),
                Format::Csv => Artifact::Csv(table),
            };
            ok(art, summary)
        }
        ExperimentCmd::Calibrate { targets, samples, sigma_steps, visibility_steps, angles } => {
            require_json(cli.global.format, "experiment calibrate")?;
            let t: Vec<f64> = targets
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| usage(format!("--targets: {e}")))?;
            let t: [f64; 3] = t.try_into().map_err(|_| usage("--targets needs exactly three values"))?;
            if *sigma_steps < 2 || *visibility_steps < 2 {
                return Err(usage("grid steps must be at least 2"));
            }
            let grid =
                |lo: f64, hi: f64, n: usize| (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let opts = CalibrationOptions {
                sigma_grid: grid(0.0, 1.0, *sigma_steps),
                visibility_grid: grid(0.95, 1.0, *visibility_steps),
                samples: *samples,
                seed: cli.global.seed,
                angles: angle_set(*angles),
            };
            let c = calibrate(t, &opts)?;
            let summary = format!(
                "best sigma {:.3}°, visibility {:.4}, residual {:.3e}{}",
                c.model.hwp_angle_sigma_deg,
                c.model.visibility,
                c.residual,
                if c.flagged { " (FLAGGED: targets not reachable)" } else { "" }
            );
            ok(artifact(cli, cmd, serde_json::to_value(&opts).expect("options serialize"), c), summary)
        }
    }
}
