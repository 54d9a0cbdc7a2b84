mod report;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use nonsig::bounds::{
    dual_bell_with, gamma2_corr_with, gamma2_tilde_1_eps_with, gamma2_tilde_1_with, gap_check, npa_bound, nu_corr_with,
    nu_tilde_eps_with, nu_tilde_with, quantum_to_local_decomposition, BoundConfig, BoundResult, Certificate,
};
use nonsig::correlation::rank_of;
use nonsig::games::{classical_bias, quantum_bias};
use nonsig::io::{parse_distribution, parse_game, parse_simulation_config, DistributionInput, SimulationConfig};
use nonsig::simulate::{run_smp_boolean, run_smp_classical, run_smp_quantum_sim, SmpPlan, DEFAULT_REPLAYS};
use nonsig::{affine_basis, to_correlation_rep, AffineModel, BoundClass, ConditionalDistribution, Error};

use report::{digest, fmt_matrix, fmt_num, render_json, render_table, Report};

const EXIT_INVALID: u8 = 1;
const EXIT_RESOURCE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(
    name = "nonsig",
    version,
    about = "Communication lower bounds and SMP simulations for non-signaling distributions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit a JSON report instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Indent the JSON report (implies --json).
    #[arg(long, global = true)]
    pretty: bool,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Cap on enumerated local deterministic vertices (default: NONSIG_VERTEX_CAP or 2000000).
    #[arg(long, global = true)]
    vertex_cap: Option<u128>,
    /// Cap on the total PSD dimension of one SDP.
    #[arg(long, global = true)]
    sdp_dim_cap: Option<usize>,
    /// Interior-point iteration limit.
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check normalization, nonnegativity and non-signaling.
    Validate { input: PathBuf },
    /// Exact nu~ with a local affine model and its Bell certificate.
    Nu { input: PathBuf },
    /// nu~ within statistical distance epsilon.
    NuEps {
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Level-1 gamma2~ with its Tsirelson-type certificate.
    Gamma2 { input: PathBuf },
    /// Level-1 gamma2~ within statistical distance epsilon.
    Gamma2Eps {
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
    },
    /// Optimal Bell functional for the distribution.
    Bell {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ClassArg::Local)]
        class: ClassArg,
    },
    /// nu of the correlation matrix (binary outcomes).
    NuCorr { input: PathBuf },
    /// gamma2 of the correlation matrix (binary outcomes).
    Gamma2Corr { input: PathBuf },
    /// Classical and entangled bias of an XOR game.
    XorBias { input: PathBuf },
    /// Split into binary blocks, each decomposed over local vertices.
    Decompose { input: PathBuf },
    /// Compare nu~ against the Grothendieck-type bound from gamma2~.
    GapCheck { input: PathBuf },
    /// Classical simultaneous-messages simulation.
    SmpClassical(SimArgs),
    /// Quantum simultaneous-messages simulation (closed-form swap tests).
    SmpQuantum(SimArgs),
    /// Boolean simultaneous-messages protocol on a sign matrix.
    SmpBoolean(SimArgs),
    /// Spanning set of the (C, MA, MB) space and its rank.
    Basis {
        #[arg(long)]
        nx: usize,
        #[arg(long)]
        ny: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ClassArg {
    Local,
    Npa1,
}

#[derive(Args, Debug)]
struct SimArgs {
    /// Distribution file; may instead come from the config's "input".
    input: Option<PathBuf>,
    /// Simulation config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Referee replays per input pair.
    #[arg(long)]
    replays: Option<usize>,
    /// Override the planned trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the planned pool size (quantum only).
    #[arg(long)]
    pool: Option<u64>,
}

enum Failure {
    Core(Error),
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_INVALID,
            Failure::Core(e) => match e {
                Error::ResourceLimit { .. } => EXIT_RESOURCE,
                Error::Solver(_) | Error::Internal(_) | Error::Mismatch { .. } => EXIT_SOLVER,
                _ => EXIT_INVALID,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) | Failure::Io(m) => m.clone(),
        }
    }
}

type Outcome = Result<(Report, u8), Failure>;

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}

fn run(argv: impl IntoIterator<Item = OsString>) -> u8 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut cfg = BoundConfig::default();
    if let Some(c) = cli.vertex_cap {
        cfg.vertex_cap = c;
    }
    if let Some(c) = cli.sdp_dim_cap {
        cfg.sdp_dim_cap = c;
    }
    if let Some(c) = cli.max_iterations {
        cfg.sdp_max_iterations = c;
    }
    let mut inputs: Vec<Vec<u8>> = Vec::new();
    let result = dispatch(&cli.command, &cfg, &mut inputs);
    let slices: Vec<&[u8]> = inputs.iter().map(Vec::as_slice).collect();
    let input_digest = digest(&slices);
    match result {
        Ok((report, code)) => {
            let text = if cli.json || cli.pretty {
                render_json(&report, &input_digest, cli.pretty)
            } else {
                render_table(&report, &input_digest)
            };
            let written = match &cli.output {
                Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(m) = written {
                eprintln!("error: {m}");
                return EXIT_INVALID;
            }
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn read(path: &Path, inputs: &mut Vec<Vec<u8>>) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Io(format!("{} is not UTF-8", path.display())))?;
    inputs.push(bytes);
    Ok(text)
}

fn load(path: &Path, inputs: &mut Vec<Vec<u8>>) -> Result<DistributionInput, Failure> {
    Ok(parse_distribution(&read(path, inputs)?)?)
}

/// Loads a distribution and refuses it unless it validates.
fn load_valid(path: &Path, inputs: &mut Vec<Vec<u8>>) -> Result<ConditionalDistribution, Failure> {
    let p = load(path, inputs)?.into_distribution();
    let report = p.validate();
    if !report.is_valid() {
        return Err(Failure::Core(Error::InvalidInput(format!(
            "input fails validation: {}",
            report.violations().join("; ")
        ))));
    }
    Ok(p)
}

fn correlations(p: &ConditionalDistribution) -> Result<Vec<Vec<f64>>, Failure> {
    Ok(to_correlation_rep(p)?.c)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn dispatch(cmd: &Command, cfg: &BoundConfig, inputs: &mut Vec<Vec<u8>>) -> Outcome {
    match cmd {
        Command::Validate { input } => validate_cmd(input, inputs),
        Command::Nu { input } => bound_cmd("nu", nu_tilde_with(&load_valid(input, inputs)?, cfg)?),
        Command::NuEps { input, epsilon } => {
            bound_cmd("nu-eps", nu_tilde_eps_with(&load_valid(input, inputs)?, *epsilon, cfg)?)
        }
        Command::Gamma2 { input } => bound_cmd("gamma2", gamma2_tilde_1_with(&load_valid(input, inputs)?, cfg)?),
        Command::Gamma2Eps { input, epsilon } => {
            bound_cmd("gamma2-eps", gamma2_tilde_1_eps_with(&load_valid(input, inputs)?, *epsilon, cfg)?)
        }
        Command::Bell { input, class } => bell_cmd(&load_valid(input, inputs)?, *class, cfg),
        Command::NuCorr { input } => {
            let c = correlations(&load_valid(input, inputs)?)?;
            bound_cmd("nu-corr", nu_corr_with(&c, cfg)?)
        }
        Command::Gamma2Corr { input } => {
            let c = correlations(&load_valid(input, inputs)?)?;
            bound_cmd("gamma2-corr", gamma2_corr_with(&c, cfg)?)
        }
        Command::XorBias { input } => xor_cmd(input, cfg, inputs),
        Command::Decompose { input } => decompose_cmd(&load_valid(input, inputs)?, cfg),
        Command::GapCheck { input } => {
            let g = gap_check(&load_valid(input, inputs)?, cfg)?;
            let report = Report::new("gap-check", to_value(&g))
                .row("nu~", fmt_num(g.nu))
                .row("gamma2~ (level 1)", fmt_num(g.gamma2_1))
                .row("ratio", fmt_num(g.ratio))
                .row("applicable bound", fmt_num(g.applicable_bound))
                .row("holds", g.holds);
            Ok((report, 0))
        }
        Command::SmpClassical(args) => smp_cmd(SmpKind::Classical, args, cfg, inputs),
        Command::SmpQuantum(args) => smp_cmd(SmpKind::Quantum, args, cfg, inputs),
        Command::SmpBoolean(args) => smp_cmd(SmpKind::Boolean, args, cfg, inputs),
        Command::Basis { nx, ny } => {
            inputs.push(format!("basis {nx} {ny}").into_bytes());
            let basis = affine_basis(*nx, *ny)?;
            let rank = rank_of(&basis);
            let body = json!({ "nx": nx, "ny": ny, "dimension": nx * ny + nx + ny, "rank": rank, "basis": basis });
            let report = Report::new("basis", body)
                .row("vectors", basis.len())
                .row("rank", rank)
                .row("expected dimension", nx * ny + nx + ny);
            Ok((report, 0))
        }
    }
}

fn validate_cmd(input: &Path, inputs: &mut Vec<Vec<u8>>) -> Outcome {
    let parsed = load(input, inputs)?;
    let p = parsed.distribution();
    let v = p.validate();
    let violations = v.violations();
    let s = p.alphabets();
    let mut body = to_value(&v);
    body["valid"] = json!(v.is_valid());
    body["violations"] = json!(violations);
    body["alphabets"] = to_value(&s);
    let mut report = Report::new("validate", body)
        .row("alphabets", format!("nx={} ny={} na={} nb={}", s.nx, s.ny, s.na, s.nb))
        .row("valid", v.is_valid())
        .row("normalization violation", format!("{:.3e}", v.max_normalization_violation))
        .row("max negativity", format!("{:.3e}", v.max_negativity))
        .row("signaling (Bob to Alice)", format!("{:.3e}", v.max_signaling_alice))
        .row("signaling (Alice to Bob)", format!("{:.3e}", v.max_signaling_bob));
    for m in &violations {
        report = report.row("violated", m);
    }
    if !v.is_valid() {
        for m in &violations {
            eprintln!("violated: {m}");
        }
    }
    Ok((report, if v.is_valid() { 0 } else { EXIT_INVALID }))
}

fn bound_cmd(command: &'static str, r: BoundResult) -> Outcome {
    let bits = r.bits();
    let mut body = to_value(&r);
    body["bits"] = to_value(&bits);
    let mut report = Report::new(command, body)
        .row("quantity", r.quantity.name())
        .row("value", fmt_num(r.value))
        .row("epsilon", r.epsilon)
        .row("dual value", fmt_num(r.dual_value))
        .row("dual normalization", fmt_num(r.diagnostics.dual_normalization));
    report = match &r.primal_certificate {
        Certificate::Affine { model } => report.row("model components", model.components.len()),
        Certificate::SignDecomposition { terms } => report.row("sign terms", terms.len()),
        Certificate::Gram { matrix } => report.row("gram dimension", matrix.len()),
    };
    for (name, v) in [("r_pub bits", bits.r_pub), ("q_ent qubits", bits.q_ent), ("q_ent_corr qubits", bits.q_ent_corr)]
    {
        if let Some(v) = v {
            report = report.row(name, fmt_num(v));
        }
    }
    for n in &bits.notes {
        report = report.row("note", n);
    }
    let d = &r.diagnostics;
    report = report
        .row("solver", format!("{:?}, {} iterations, {}x{}", d.engine, d.iterations, d.rows, d.columns))
        .row("primal residual", format!("{:.3e}", d.primal_residual))
        .row("duality gap", format!("{:.3e}", d.duality_gap));
    Ok((report, 0))
}

fn bell_cmd(p: &ConditionalDistribution, class: ClassArg, cfg: &BoundConfig) -> Outcome {
    let class = match class {
        ClassArg::Local => BoundClass::Local,
        ClassArg::Npa1 => BoundClass::NpaLevel1,
    };
    let f = dual_bell_with(p, class, cfg)?;
    let value = f.evaluate(p)?;
    let bound = match class {
        BoundClass::Local => f.local_bound(cfg.vertex_cap)?,
        BoundClass::NpaLevel1 => npa_bound(&f, cfg)?,
    };
    let body = json!({ "functional": to_value(&f), "value_on_input": value, "class_bound": bound });
    let report = Report::new("bell", body)
        .row("class", format!("{class:?}"))
        .row("B(p)", fmt_num(value))
        .row("max |B| over class", fmt_num(bound));
    Ok((report, 0))
}

fn xor_cmd(input: &Path, cfg: &BoundConfig, inputs: &mut Vec<Vec<u8>>) -> Outcome {
    let game = parse_game(&read(input, inputs)?)?;
    let classical = classical_bias(&game)?;
    let quantum = quantum_bias(&game, cfg)?;
    let body = json!({ "game": to_value(&game), "classical": to_value(&classical), "quantum": to_value(&quantum) });
    let report = Report::new("xor-bias", body)
        .row("classical bias", fmt_num(classical.bias))
        .row("quantum bias", fmt_num(quantum.bias))
        .row("ratio", fmt_num(quantum.bias / classical.bias));
    Ok((report, 0))
}

fn decompose_cmd(p: &ConditionalDistribution, cfg: &BoundConfig) -> Outcome {
    let local = |q: &ConditionalDistribution| -> nonsig::Result<AffineModel> {
        match nu_tilde_with(q, cfg)?.primal_certificate {
            Certificate::Affine { model } => Ok(model),
            _ => Err(Error::Internal("nu~ returned a non-affine certificate".into())),
        }
    };
    let d = quantum_to_local_decomposition(p, Some(&local))?;
    let body = json!({
        "model": to_value(&d.model),
        "mass": d.model.mass(),
        "block_masses": d.block_masses,
        "residual": d.residual,
    });
    let report = Report::new("decompose", body)
        .row("blocks", d.block_masses.len())
        .row("block masses", d.block_masses.iter().map(|m| fmt_num(*m)).collect::<Vec<_>>().join(" "))
        .row("components", d.model.components.len())
        .row("mass", fmt_num(d.model.mass()))
        .row("residual", format!("{:.3e}", d.residual));
    Ok((report, 0))
}

#[derive(Clone, Copy, PartialEq)]
enum SmpKind {
    Classical,
    Quantum,
    Boolean,
}

fn resolve_sim(args: &SimArgs, inputs: &mut Vec<Vec<u8>>) -> Result<(SimulationConfig, PathBuf), Failure> {
    let mut cfg = SimulationConfig {
        input: None,
        epsilon: 0.0,
        delta: f64::NAN,
        seed: 0,
        replays: DEFAULT_REPLAYS,
        trials: None,
        pool: None,
    };
    let mut base = PathBuf::new();
    if let Some(path) = &args.config {
        cfg = parse_simulation_config(&read(path, inputs)?)?;
        base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    }
    let input = match (&args.input, &cfg.input) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base.join(p),
        (None, None) => {
            return Err(Failure::Usage("a distribution file is required (argument or config \"input\")".into()))
        }
    };
    cfg.epsilon = args.epsilon.unwrap_or(cfg.epsilon);
    cfg.delta = args.delta.unwrap_or(cfg.delta);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.replays = args.replays.unwrap_or(cfg.replays);
    cfg.trials = args.trials.or(cfg.trials);
    cfg.pool = args.pool.or(cfg.pool);
    if cfg.delta.is_nan() {
        return Err(Failure::Usage("--delta is required (flag or config)".into()));
    }
    if cfg.replays == 0 || cfg.trials == Some(0) || cfg.pool == Some(0) {
        return Err(Failure::Core(Error::InvalidInput("replays, trials and pool must be positive".into())));
    }
    Ok((cfg, input))
}

fn smp_cmd(kind: SmpKind, args: &SimArgs, bounds: &BoundConfig, inputs: &mut Vec<Vec<u8>>) -> Outcome {
    let (cfg, input) = resolve_sim(args, inputs)?;
    let p = load_valid(&input, inputs)?;
    let s = p.alphabets();
    let result =
        if cfg.epsilon > 0.0 { nu_tilde_eps_with(&p, cfg.epsilon, bounds)? } else { nu_tilde_with(&p, bounds)? };
    let model = match result.primal_certificate {
        Certificate::Affine { model } => model,
        _ => return Err(Failure::Core(Error::Internal("nu~ returned a non-affine certificate".into()))),
    };
    let lambda = model.mass().max(1.0);
    let mut plan = match kind {
        SmpKind::Classical => SmpPlan::classical(s, lambda, cfg.epsilon, cfg.delta)?,
        SmpKind::Quantum => SmpPlan::quantum(s, lambda, cfg.epsilon, cfg.delta)?,
        SmpKind::Boolean => SmpPlan::boolean(s, lambda, cfg.epsilon, cfg.delta)?,
    }
    .with_replays(cfg.replays);
    if let Some(t) = cfg.trials {
        plan = plan.with_trials(t);
    }
    if let Some(l) = cfg.pool {
        plan = plan.with_pool_size(l);
    }
    let mut config_value = to_value(&cfg);
    config_value["input"] = json!(input.display().to_string());
    if kind == SmpKind::Boolean {
        let c = correlations(&p)?;
        let out = run_smp_boolean(&c, &model, &plan, cfg.seed)?;
        let ok = out.max_error_rate <= cfg.delta;
        let body = json!({ "config": config_value, "model_mass": lambda, "plan": to_value(&plan), "outcome": to_value(&out), "within_delta": ok });
        let report = Report::new("smp-boolean", body)
            .row("model mass", fmt_num(lambda))
            .row("trials per run", out.trials)
            .row("runs", out.replays)
            .row("error rates", fmt_matrix(&out.error_rates))
            .row("max error rate", fmt_num(out.max_error_rate))
            .row("within delta", ok);
        return Ok((report, 0));
    }
    let out = match kind {
        SmpKind::Classical => run_smp_classical(&model, &plan, &p, cfg.seed)?,
        _ => run_smp_quantum_sim(&model, &plan, &p, cfg.seed)?,
    };
    let ok = out.empirical_distance <= cfg.epsilon + cfg.delta;
    let body =
        json!({ "config": config_value, "model_mass": lambda, "outcome": to_value(&out), "within_tolerance": ok });
    let mut report = Report::new(if kind == SmpKind::Classical { "smp-classical" } else { "smp-quantum" }, body)
        .row("model mass", fmt_num(lambda))
        .row("trials", plan.trials)
        .row("beta", fmt_num(plan.beta))
        .row("replays", plan.replays);
    if let Some(l) = plan.pool_size {
        report = report.row("pool size", l);
    }
    report =
        report.row("distances", fmt_matrix(&out.distances)).row("empirical distance", fmt_num(out.empirical_distance));
    if let (Some(dev), Some(pool_ok)) = (out.pool_deviation, out.pool_ok) {
        report = report.row("pool deviation", fmt_num(dev)).row("pool ok", pool_ok);
    }
    report = report.row("within epsilon + delta", ok);
    Ok((report, 0))
}
