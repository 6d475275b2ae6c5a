//! `vsm` command-line runner.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 verification or
//! statistical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::entanglement::{
    is_monotone, n_tangle_contraction, n_tangle_spinflip, verify_strength_tangle, TangleMethod,
    TangleReport, CONTRACTION_MAX_QUBITS, STRENGTH_TANGLE_TOL,
};
use crate::error::VsmError;
use crate::meter::{kfold_meter, parse_angle, MeterSpec};
use crate::pauli::{Sign, SignVector};
use crate::protocol::{
    qudit_effects_bruteforce, qudit_vsm, rng_from_seed, MeasurementModel, ModelJson, Sampler,
    QUBIT_ORDER, RNG_ALGORITHM,
};
use crate::statevec::{expectation, Ket, KetJson, MatrixJson};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

/// Bell-demo z-scores at or above this are a statistical failure.
pub const Z_FAIL: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(
    name = "vsm",
    version,
    about = "Nonlocal variable-strength measurement simulator"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// K-fold meter state amplitudes.
    Meter {
        #[command(flatten)]
        meter: MeterArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// POVM effects (and optionally Kraus operators) of a model.
    Povm {
        #[command(flatten)]
        model: ModelArgs,
        /// Include the Kraus operators.
        #[arg(long)]
        kraus: bool,
        /// Include barycentric coordinates of each effect over the PVM.
        #[arg(long)]
        barycentric: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact sign-vector distribution for an input state.
    Distribution {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo meter readouts.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        state: StateArgs,
        #[arg(long, default_value_t = 1)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        /// Emit every drawn record (JSON only).
        #[arg(long)]
        records: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Meter tangle against squared strength over a theta grid.
    Sweep {
        #[arg(long = "K")]
        k: usize,
        #[arg(long = "N")]
        n: usize,
        /// `start:end:points`, angles in radians or with a `deg` suffix.
        #[arg(long, default_value = "0:90deg:25")]
        grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Variable-strength Bell measurement on all four Bell states.
    BellDemo {
        #[arg(long, value_parser = angle_arg)]
        theta: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// n-tangle of a meter state or of an arbitrary input state.
    Tangle {
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long, value_parser = angle_arg)]
        theta: Option<f64>,
        #[arg(long, conflicts_with_all = ["k", "n", "theta"])]
        state: Option<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Single-qudit measurement with a mod-d shift coupling.
    Qudit {
        #[arg(long)]
        d: usize,
        #[arg(long, value_parser = angle_arg)]
        theta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct MeterArgs {
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "N")]
    pub n: usize,
    #[arg(long, value_parser = angle_arg)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Comma-separated product observables, e.g. `XX,ZZ`.
    #[arg(long, conflicts_with = "model")]
    pub obs: Option<String>,
    #[arg(long, value_parser = angle_arg, conflicts_with = "model")]
    pub theta: Option<f64>,
    /// 1-based coupling order of the rounds, e.g. `2,1`.
    #[arg(long, conflicts_with = "model")]
    pub order: Option<String>,
    /// Model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// Label over `01+-`, `bell:phi+|phi-|psi+|psi-`, `eig:<signs>`, or a
    /// ket JSON file ending in `.json`.
    #[arg(long)]
    pub state: String,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Contraction,
    Spinflip,
}

fn angle_arg(s: &str) -> Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(flag: &str, err: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: format!("{flag}: {err}"),
        }
    }
}

/// Rendered output of one command.
#[derive(Debug)]
pub struct Artifact {
    pub body: String,
    pub summary: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: Option<u64>,
    rng: &'static str,
    qubit_order: &'static str,
}

fn metadata(command: &'static str, seed: Option<u64>) -> Metadata {
    Metadata {
        tool: "vsm",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        rng: RNG_ALGORITHM,
        qubit_order: QUBIT_ORDER,
    }
}

fn csv_header(meta: &Metadata) -> String {
    let seed = meta
        .seed
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "# tool={}\n# version={}\n# command={}\n# seed={}\n# rng={}\n# qubit_order={}\n",
        meta.tool, meta.version, meta.command, seed, meta.rng, meta.qubit_order
    )
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_body(meta: Metadata, mut payload: Value) -> String {
    if let Value::Object(map) = &mut payload {
        map.insert(
            "metadata".into(),
            serde_json::to_value(meta).expect("plain struct"),
        );
    }
    let mut s = serde_json::to_string_pretty(&payload).expect("finite JSON");
    s.push('\n');
    s
}

fn matrix_rows(out: &mut String, label: &str, m: &MatrixJson) {
    for (r, (re_row, im_row)) in m.re.iter().zip(&m.im).enumerate() {
        for (c, (re, im)) in re_row.iter().zip(im_row).enumerate() {
            let _ = writeln!(out, "{label},{r},{c},{},{}", f(*re), f(*im));
        }
    }
}

fn build_model(args: &ModelArgs) -> Result<MeasurementModel, CliError> {
    if let Some(path) = &args.model {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage("--model", e))?;
        let json: ModelJson =
            serde_json::from_str(&text).map_err(|e| CliError::usage("--model", e))?;
        return MeasurementModel::from_json(&json).map_err(|e| CliError::usage("--model", e));
    }
    let obs = args
        .obs
        .as_deref()
        .ok_or_else(|| CliError::usage("--obs", "required unless --model is given"))?;
    let theta = args
        .theta
        .ok_or_else(|| CliError::usage("--theta", "required unless --model is given"))?;
    let set = obs.parse().map_err(|e| CliError::usage("--obs", e))?;
    let order = match &args.order {
        None => None,
        Some(s) => Some(
            s.split(',')
                .map(|r| match r.trim().parse::<usize>() {
                    Ok(v) if v >= 1 => Ok(v - 1),
                    _ => Err(CliError::usage("--order", format!("invalid round '{r}'"))),
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    MeasurementModel::new(set, theta, order).map_err(|e| {
        let flag = match e {
            VsmError::Domain(_) | VsmError::Resource { .. } => "--theta",
            VsmError::Argument(ref m) if m.contains("order") => "--order",
            _ => "--obs",
        };
        CliError::usage(flag, e)
    })
}

fn bell_state(name: &str) -> Option<Ket> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match name {
        "phi+" => [h, 0.0, 0.0, h],
        "phi-" => [h, 0.0, 0.0, -h],
        "psi+" => [0.0, h, h, 0.0],
        "psi-" => [0.0, h, -h, 0.0],
        _ => return None,
    };
    Ket::from_real(&amps).ok()
}

/// `P_s |j>` normalized, for the smallest basis index j it does not annihilate.
fn eigenstate(model: &MeasurementModel, signs: &str) -> Result<Ket, CliError> {
    let signs: SignVector = signs.parse().map_err(|e| CliError::usage("--state", e))?;
    if signs.len() != model.k() {
        return Err(CliError::usage(
            "--state",
            format!("eig: needs {} signs, got {}", model.k(), signs.len()),
        ));
    }
    let p = model.pvm().projector(&signs);
    for j in 0..p.dim() {
        let col = Ket::unnormalized(p.matrix().column(j).iter().copied().collect())
            .map_err(|e| CliError::usage("--state", e))?;
        if col.norm_sqr() > 1e-12 {
            return col.normalized().map_err(|e| CliError::usage("--state", e));
        }
    }
    Err(CliError::usage("--state", "empty eigenspace"))
}

fn build_state(spec: &str, model: Option<&MeasurementModel>) -> Result<Ket, CliError> {
    let ket = if let Some(name) = spec.strip_prefix("bell:") {
        bell_state(name)
            .ok_or_else(|| CliError::usage("--state", format!("unknown Bell state '{name}'")))?
    } else if let Some(signs) = spec.strip_prefix("eig:") {
        let model = model.ok_or_else(|| CliError::usage("--state", "eig: needs a model"))?;
        eigenstate(model, signs)?
    } else if spec.ends_with(".json") {
        let text = fs::read_to_string(spec).map_err(|e| CliError::usage("--state", e))?;
        let json: KetJson =
            serde_json::from_str(&text).map_err(|e| CliError::usage("--state", e))?;
        Ket::from_json(&json).map_err(|e| CliError::usage("--state", e))?
    } else {
        Ket::from_label(spec).map_err(|e| CliError::usage("--state", e))?
    };
    if let Some(m) = model {
        if ket.n() != m.n() {
            return Err(CliError::usage(
                "--state",
                format!("state has {} qubits, observables act on {}", ket.n(), m.n()),
            ));
        }
    }
    Ok(ket)
}

fn meter_spec(k: usize, n: usize, theta: f64) -> Result<MeterSpec, CliError> {
    MeterSpec::new(k, n, theta).map_err(|e| {
        let flag = match e {
            VsmError::Domain(_) => "--theta",
            VsmError::Resource { .. } => "--K/--N",
            _ if k == 0 => "--K",
            _ => "--N",
        };
        CliError::usage(flag, e)
    })
}

/// `start:end:points`, evenly spaced with the endpoint hit exactly.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, end, points] = parts.as_slice() else {
        return Err(CliError::usage(
            "--grid",
            format!("'{s}' should be start:end:points"),
        ));
    };
    let start = parse_angle(start).map_err(|e| CliError::usage("--grid", e))?;
    let end = parse_angle(end).map_err(|e| CliError::usage("--grid", e))?;
    let points: usize = points
        .trim()
        .parse()
        .map_err(|_| CliError::usage("--grid", format!("invalid point count '{points}'")))?;
    if points < 2 {
        return Err(CliError::usage("--grid", "need at least 2 points"));
    }
    let step = (end - start) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            if i + 1 == points {
                end
            } else {
                start + step * i as f64
            }
        })
        .collect())
}

fn run_meter(args: &MeterArgs, format: Format) -> Result<Artifact, CliError> {
    let spec = meter_spec(args.k, args.n, args.theta)?;
    let ket = kfold_meter(&spec).map_err(|e| CliError::usage("--K/--N", e))?;
    let meta = metadata("meter", None);
    let body = match format {
        Format::Json => json_body(
            meta,
            json!({
                "k": spec.k(),
                "n": spec.n(),
                "theta": spec.theta(),
                "strength": spec.strength(),
                "vsm_compliant": spec.vsm_compliant(),
                "state": ket.to_json(),
            }),
        ),
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("index,re,im\n");
            for (i, a) in ket.amplitudes().iter().enumerate() {
                let _ = writeln!(out, "{i},{},{}", f(a.re), f(a.im));
            }
            out
        }
    };
    Ok(Artifact {
        body,
        summary: format!(
            "meter K={} N={} qubits={} strength={} vsm_compliant={}",
            spec.k(),
            spec.n(),
            spec.qubits(),
            spec.strength(),
            spec.vsm_compliant()
        ),
        passed: true,
    })
}

fn run_povm(model: &MeasurementModel, kraus: bool, barycentric: bool, format: Format) -> Artifact {
    let ks = model.kraus_closed_form();
    let povm = ks.effects();
    let meta = metadata("povm", None);
    let body = match format {
        Format::Json => {
            let mut payload = json!({
                "model": model.to_json(),
                "strength": model.strength(),
                "vsm_compliant": model.vsm_compliant(),
                "completeness_error": povm.completeness_error(),
                "effects": povm.to_json(),
            });
            if kraus {
                payload["kraus"] = serde_json::to_value(ks.to_json()).expect("plain struct");
            }
            if barycentric {
                let coords: BTreeMap<String, Vec<f64>> = povm
                    .barycentric(model.pvm())
                    .into_iter()
                    .map(|(s, c)| (s.to_string(), c))
                    .collect();
                payload["barycentric"] = serde_json::to_value(coords).expect("plain map");
            }
            json_body(meta, payload)
        }
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("kind,signs,row,col,re,im\n");
            for (s, e) in povm.effects() {
                matrix_rows(&mut out, &format!("effect,{s}"), &e.to_json());
            }
            if kraus {
                for (s, m) in ks.operators() {
                    matrix_rows(&mut out, &format!("kraus,{s}"), &m.to_json());
                }
            }
            if barycentric {
                for (s, coords) in povm.barycentric(model.pvm()) {
                    for (i, c) in coords.iter().enumerate() {
                        let _ = writeln!(out, "barycentric,{s},{i},0,{},{}", f(*c), f(0.0));
                    }
                }
            }
            out
        }
    };
    Artifact {
        body,
        summary: format!(
            "povm obs={} K={} strength={} vsm_compliant={}",
            model.observables(),
            model.k(),
            model.strength(),
            model.vsm_compliant()
        ),
        passed: true,
    }
}

fn run_distribution(
    model: &MeasurementModel,
    psi: &Ket,
    format: Format,
) -> Result<Artifact, CliError> {
    let dist = model
        .outcome_distribution(psi)
        .map_err(|e| CliError::usage("--state", e))?;
    let meta = metadata("distribution", None);
    let body = match format {
        Format::Json => {
            let map: BTreeMap<String, f64> =
                dist.iter().map(|(s, p)| (s.to_string(), *p)).collect();
            json_body(
                meta,
                json!({
                    "model": model.to_json(),
                    "strength": model.strength(),
                    "distribution": map,
                }),
            )
        }
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("signs,probability\n");
            for (s, p) in &dist {
                let _ = writeln!(out, "{s},{}", f(*p));
            }
            out
        }
    };
    let total: f64 = dist.iter().map(|(_, p)| p).sum();
    Ok(Artifact {
        body,
        summary: format!("distribution outcomes={} total={total}", dist.len()),
        passed: true,
    })
}

fn run_sample(
    model: &MeasurementModel,
    psi: &Ket,
    samples: u64,
    seed: u64,
    records: bool,
    format: Format,
) -> Result<Artifact, CliError> {
    if samples == 0 {
        return Err(CliError::usage("--samples", "must be at least 1"));
    }
    let sampler = Sampler::new(model, psi).map_err(|e| CliError::usage("--state", e))?;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; 1 << model.k()];
    let mut drawn = Vec::new();
    for _ in 0..samples {
        let rec = sampler.draw(&mut rng);
        counts[rec.signs.index()] += 1;
        if records {
            drawn.push(rec.to_json());
        }
    }
    let meta = metadata("sample", Some(seed));
    let body = match format {
        Format::Json => {
            let map: BTreeMap<String, u64> = SignVector::all(model.k())
                .map(|s| s.to_string())
                .zip(counts.iter().copied())
                .collect();
            let mut payload = json!({
                "model": model.to_json(),
                "samples": samples,
                "counts": map,
            });
            if records {
                payload["records"] = serde_json::to_value(&drawn).expect("finite records");
            }
            json_body(meta, payload)
        }
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("signs,count\n");
            for (s, c) in SignVector::all(model.k()).zip(&counts) {
                let _ = writeln!(out, "{s},{c}");
            }
            out
        }
    };
    Ok(Artifact {
        body,
        summary: format!("sample seed={seed} samples={samples} counts={counts:?}"),
        passed: true,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub strength: f64,
    pub tau: f64,
    pub residual: f64,
    pub vsm_compliant: bool,
}

/// Meter tangle rows over a theta grid, in grid order.
pub fn sweep_rows(k: usize, n: usize, grid: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let specs = grid
        .iter()
        .map(|&t| meter_spec(k, n, t))
        .collect::<Result<Vec<_>, _>>()?;
    let reports = verify_strength_tangle(&specs);
    Ok(specs
        .iter()
        .zip(reports)
        .map(|(spec, r)| SweepRow {
            theta: spec.theta(),
            strength: spec.strength(),
            tau: r.tau,
            residual: r.residual.expect("meter reports carry a residual"),
            vsm_compliant: spec.vsm_compliant(),
        })
        .collect())
}

pub fn run_sweep(k: usize, n: usize, grid: &str, format: Format) -> Result<Artifact, CliError> {
    let grid = parse_grid(grid)?;
    let rows = sweep_rows(k, n, &grid)?;
    let failures = rows
        .iter()
        .filter(|r| r.residual >= STRENGTH_TANGLE_TOL)
        .count();
    let meta = metadata("sweep", None);
    let body = match format {
        Format::Json => json_body(
            meta,
            json!({
                "k": k,
                "n": n,
                "tolerance": STRENGTH_TANGLE_TOL,
                "rows": rows,
                "failures": failures,
            }),
        ),
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("theta,strength,tau,residual,vsm_compliant\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    f(r.theta),
                    f(r.strength),
                    f(r.tau),
                    f(r.residual),
                    r.vsm_compliant
                );
            }
            out
        }
    };
    let worst = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(Artifact {
        body,
        summary: format!(
            "sweep K={k} N={n} points={} max_residual={worst:e} failures={failures}",
            rows.len()
        ),
        passed: failures == 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BellOutcome {
    pub signs: String,
    pub count: u64,
    pub frequency: f64,
    pub probability: f64,
    /// `None` when the theory probability is 0 or 1 and the frequency differs.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BellInput {
    pub state: String,
    pub expected: String,
    pub outcomes: Vec<BellOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BellReport {
    pub theta: f64,
    pub strength: f64,
    pub samples: u64,
    pub inputs: Vec<BellInput>,
    pub max_abs_z: Option<f64>,
    pub passed: bool,
}

fn z_score(count: u64, samples: u64, p: f64) -> Option<f64> {
    let freq = count as f64 / samples as f64;
    let var = p * (1.0 - p) / samples as f64;
    if var > 0.0 {
        Some((freq - p) / var.sqrt())
    } else if (freq - p).abs() < 1e-12 {
        Some(0.0)
    } else {
        None
    }
}

/// All four Bell states through the {XX, ZZ} measurement, drawing from one
/// seeded stream in the order phi+, phi-, psi+, psi-.
pub fn bell_report(theta: f64, samples: u64, seed: u64) -> Result<BellReport, CliError> {
    if samples == 0 {
        return Err(CliError::usage("--samples", "must be at least 1"));
    }
    let set = "XX,ZZ".parse().expect("fixed observables");
    let model =
        MeasurementModel::new(set, theta, None).map_err(|e| CliError::usage("--theta", e))?;
    let (s, c) = model.theta().sin_cos();
    let (p_hit, p_miss) = (c * c, s * s / 3.0);
    let mut rng = rng_from_seed(seed);
    let mut inputs = Vec::new();
    for name in ["phi+", "phi-", "psi+", "psi-"] {
        let psi = bell_state(name).expect("known name");
        let expected = SignVector::new(
            model
                .observables()
                .observables()
                .iter()
                .map(|o| {
                    let v = expectation(&o.matrix(), &psi).expect("Hermitian observable");
                    if v > 0.0 {
                        Sign::Plus
                    } else {
                        Sign::Minus
                    }
                })
                .collect(),
        );
        let sampler = Sampler::new(&model, &psi).map_err(|e| CliError {
            code: EXIT_VERIFY,
            message: e.to_string(),
        })?;
        let mut counts = [0u64; 4];
        for _ in 0..samples {
            counts[sampler.draw_signs(&mut rng)] += 1;
        }
        let outcomes = SignVector::all(2)
            .zip(counts)
            .map(|(sv, count)| {
                let p = if sv == expected { p_hit } else { p_miss };
                BellOutcome {
                    signs: sv.to_string(),
                    count,
                    frequency: count as f64 / samples as f64,
                    probability: p,
                    z: z_score(count, samples, p),
                }
            })
            .collect();
        inputs.push(BellInput {
            state: name.to_string(),
            expected: expected.to_string(),
            outcomes,
        });
    }
    let zs: Vec<Option<f64>> = inputs
        .iter()
        .flat_map(|i| i.outcomes.iter().map(|o| o.z.map(f64::abs)))
        .collect();
    let max_abs_z = zs.iter().try_fold(0.0f64, |acc, z| z.map(|z| acc.max(z)));
    Ok(BellReport {
        theta: model.theta(),
        strength: model.strength(),
        samples,
        inputs,
        passed: max_abs_z.is_some_and(|z| z < Z_FAIL),
        max_abs_z,
    })
}

pub fn run_bell_demo(
    theta: f64,
    samples: u64,
    seed: u64,
    format: Format,
) -> Result<Artifact, CliError> {
    let report = bell_report(theta, samples, seed)?;
    let meta = metadata("bell-demo", Some(seed));
    let body = match format {
        Format::Json => json_body(meta, serde_json::to_value(&report).expect("plain report")),
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("state,expected,signs,count,frequency,probability,z\n");
            for input in &report.inputs {
                for o in &input.outcomes {
                    let z = o.z.map_or_else(|| "nan".to_string(), f);
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{z}",
                        input.state,
                        input.expected,
                        o.signs,
                        o.count,
                        f(o.frequency),
                        f(o.probability)
                    );
                }
            }
            out
        }
    };
    let z = report
        .max_abs_z
        .map_or_else(|| "inf".to_string(), |z| format!("{z:.3}"));
    Ok(Artifact {
        body,
        summary: format!(
            "bell-demo theta={} strength={} samples={samples} max|z|={z}",
            report.theta, report.strength
        ),
        passed: report.passed,
    })
}

fn tangle_report(
    k: Option<usize>,
    n: Option<usize>,
    theta: Option<f64>,
    state: Option<&str>,
    method: MethodArg,
) -> Result<TangleReport, CliError> {
    let (ket, spec) = match state {
        Some(s) => (build_state(s, None)?, None),
        None => {
            let k = k.ok_or_else(|| CliError::usage("--K", "required unless --state is given"))?;
            let n = n.ok_or_else(|| CliError::usage("--N", "required unless --state is given"))?;
            let theta = theta
                .ok_or_else(|| CliError::usage("--theta", "required unless --state is given"))?;
            let spec = meter_spec(k, n, theta)?;
            (
                kfold_meter(&spec).map_err(|e| CliError::usage("--K/--N", e))?,
                Some(spec),
            )
        }
    };
    let method = match method {
        MethodArg::Auto if ket.n() <= CONTRACTION_MAX_QUBITS => TangleMethod::Contraction,
        MethodArg::Auto | MethodArg::Spinflip => TangleMethod::Spinflip,
        MethodArg::Contraction => TangleMethod::Contraction,
    };
    let tau = match method {
        TangleMethod::Contraction => {
            n_tangle_contraction(&ket).map_err(|e| CliError::usage("--method", e))?
        }
        TangleMethod::Spinflip => n_tangle_spinflip(&ket),
    };
    let strength_squared = spec.map(|s| s.strength().powi(2));
    Ok(TangleReport {
        n: ket.n(),
        tau,
        method,
        strength_squared,
        residual: strength_squared.map(|s2| (tau - s2).abs()),
        monotone: is_monotone(ket.n()),
    })
}

fn run_tangle(report: TangleReport, format: Format) -> Artifact {
    let meta = metadata("tangle", None);
    let opt = |x: Option<f64>| x.map_or_else(String::new, f);
    let body = match format {
        Format::Json => json_body(meta, serde_json::to_value(&report).expect("plain report")),
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("n,tau,method,strength_squared,residual,monotone\n");
            let method = match report.method {
                TangleMethod::Contraction => "contraction",
                TangleMethod::Spinflip => "spinflip",
            };
            let _ = writeln!(
                out,
                "{},{},{method},{},{},{}",
                report.n,
                f(report.tau),
                opt(report.strength_squared),
                opt(report.residual),
                report.monotone
            );
            out
        }
    };
    let residual = report
        .residual
        .map_or_else(String::new, |r| format!(" residual={r:e}"));
    Artifact {
        body,
        summary: format!("tangle n={} tau={}{residual}", report.n, report.tau),
        passed: report.passed(),
    }
}

fn run_qudit(d: usize, theta: f64, format: Format) -> Result<Artifact, CliError> {
    let vsm = qudit_vsm(d, theta).map_err(|e| CliError::usage("--d", e))?;
    let brute = qudit_effects_bruteforce(d, theta).map_err(|e| CliError::usage("--d", e))?;
    let deviation = vsm
        .effects
        .iter()
        .zip(&brute)
        .flat_map(|(a, b)| (a - b).iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let effects: Vec<MatrixJson> = vsm
        .effects
        .iter()
        .map(|e| MatrixJson {
            re: (0..d)
                .map(|r| (0..d).map(|c| e[(r, c)].re).collect())
                .collect(),
            im: (0..d)
                .map(|r| (0..d).map(|c| e[(r, c)].im).collect())
                .collect(),
        })
        .collect();
    let meta = metadata("qudit", None);
    let body = match format {
        Format::Json => json_body(
            meta,
            json!({
                "d": d,
                "theta": theta,
                "strength": vsm.strength,
                "bruteforce_max_deviation": deviation,
                "effects": effects,
            }),
        ),
        Format::Csv => {
            let mut out = csv_header(&meta);
            out.push_str("outcome,row,col,re,im\n");
            for (i, e) in effects.iter().enumerate() {
                matrix_rows(&mut out, &i.to_string(), e);
            }
            out
        }
    };
    Ok(Artifact {
        body,
        summary: format!(
            "qudit d={d} theta={theta} strength={} bruteforce_deviation={deviation:e}",
            vsm.strength
        ),
        passed: deviation < 1e-10,
    })
}

/// Runs any single-artifact command.
pub fn run_single(command: &Command) -> Result<Artifact, CliError> {
    match command {
        Command::Meter { meter, output } => run_meter(meter, output.format),
        Command::Povm {
            model,
            kraus,
            barycentric,
            output,
        } => Ok(run_povm(
            &build_model(model)?,
            *kraus,
            *barycentric,
            output.format,
        )),
        Command::Distribution {
            model,
            state,
            output,
        } => {
            let model = build_model(model)?;
            let psi = build_state(&state.state, Some(&model))?;
            run_distribution(&model, &psi, output.format)
        }
        Command::Sample {
            model,
            state,
            samples,
            seed,
            records,
            output,
        } => {
            let model = build_model(model)?;
            let psi = build_state(&state.state, Some(&model))?;
            run_sample(&model, &psi, *samples, *seed, *records, output.format)
        }
        Command::Tangle {
            k,
            n,
            theta,
            state,
            method,
            output,
        } => Ok(run_tangle(
            tangle_report(*k, *n, *theta, state.as_deref(), *method)?,
            output.format,
        )),
        Command::Qudit { d, theta, output } => run_qudit(*d, *theta, output.format),
        Command::Sweep { k, n, grid, output } => run_sweep(*k, *n, grid, output.format),
        Command::BellDemo {
            theta,
            samples,
            seed,
            output,
        } => run_bell_demo(*theta, *samples, *seed, output.format),
    }
}

fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Meter { output, .. }
        | Command::Povm { output, .. }
        | Command::Distribution { output, .. }
        | Command::Sample { output, .. }
        | Command::Sweep { output, .. }
        | Command::BellDemo { output, .. }
        | Command::Tangle { output, .. }
        | Command::Qudit { output, .. } => output,
    }
}

/// Parses arguments, runs the command and writes its artifact. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let artifact = match run_single(&config.command) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    match &output_args(&config.command).out {
        Some(path) => {
            if let Err(e) = fs::write(path, &artifact.body) {
                eprintln!("error: --out: {e}");
                return EXIT_USAGE;
            }
            println!("{}", artifact.summary);
        }
        None => {
            print!("{}", artifact.body);
            eprintln!("{}", artifact.summary);
        }
    }
    if artifact.passed {
        EXIT_OK
    } else {
        eprintln!("verification failed");
        EXIT_VERIFY
    }
}
