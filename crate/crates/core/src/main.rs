use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cpsverify::certifier::{certify_iid, sample_size_iid, sample_size_noniid, verify_noniid};
use cpsverify::clifford::CliffordCircuit;
use cpsverify::config::ExperimentConfig;
use cpsverify::dense::build_cps_dense;
use cpsverify::error::Result;
use cpsverify::msi::{
    compile_msi, enumerate_branches, ideal_output_distribution, run_msi, verify_and_run,
    MsiProgram, ProgramDoc, UniversalCircuit,
};
use cpsverify::pauli::{PauliAxis, PauliString};
use cpsverify::prover::{AdaptiveSession, ideal_prover};
use cpsverify::seed::{derive_seed, rng_from};
use cpsverify::sweep::{rows_to_csv, run_sweep};
use cpsverify::target::{
    build_plan, chi, parse_states, CpsTarget, SamplingMode, Setting, SingleQubitState,
};
use cpsverify::{dense, target};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exclude,
    Include,
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exclude => SamplingMode::ExcludeIdentity,
            ModeArg::Include => SamplingMode::IncludeIdentity,
        }
    }
}

#[derive(Parser)]
#[command(name = "cpsverify", version, about = "Certification of Clifford-enhanced product states")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Master seed; falls back to $CPSVERIFY_SEED, then the config, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write primary output (JSON or CSV) here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the estimator mode from the config.
    #[arg(long, global = true)]
    mode: Option<ModeArg>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the characteristic-function table of a single-qubit state spec.
    Chi {
        /// State spec token(s), e.g. `T` or `bloch 0 0 1` or `angles 1.1 0.3`.
        #[arg(required = true, num_args = 1..)]
        state: Vec<String>,
    },
    /// Print the back-propagated observable C P^(i) C-dagger.
    Backprop {
        /// Experiment config naming the target's states and circuit.
        config: PathBuf,
        /// Qubit index i.
        qubit: usize,
        /// Pauli axis: X, Y or Z.
        axis: char,
    },
    /// Print the i.i.d. and non-i.i.d. copy budgets for a config.
    SampleSize {
        config: PathBuf,
    },
    /// One Protocol-1 run (i.i.d. copies); exit 0 on accept, 2 on reject.
    Certify {
        config: PathBuf,
    },
    /// One Protocol-2 run (adversarial copies); exit 0 on accept, 2 on reject.
    Verify {
        config: PathBuf,
    },
    /// Magic-state-injection compilation and execution.
    Msi {
        #[command(subcommand)]
        cmd: MsiCmd,
    },
    /// Acceptance-probability sweep over a noise or parameter grid (CSV).
    Sweep {
        config: PathBuf,
    },
    /// Oracle-backed invariant suite.
    Selftest,
}

#[derive(Subcommand)]
enum MsiCmd {
    /// Compile a Clifford+T circuit into a CPS + measurement schedule.
    Compile(MsiCompileArgs),
    /// Execute a compiled program (or circuit) on the perfect resource
    /// state, or run Protocol 3 against a configured prover.
    Run(MsiRunArgs),
}

#[derive(Args)]
struct MsiCompileArgs {
    /// Clifford+T circuit file.
    circuit: PathBuf,
    /// State-spec file for the data qubits (default: all |+>).
    #[arg(long)]
    states: Option<PathBuf>,
}

#[derive(Args)]
struct MsiRunArgs {
    /// Compiled program JSON, or a Clifford+T circuit file.
    program: PathBuf,
    /// State-spec file for the data qubits when compiling from a circuit.
    #[arg(long)]
    states: Option<PathBuf>,
    /// Shots on the perfect resource state (ignored with --config).
    #[arg(long, default_value_t = 1000)]
    shots: u64,
    /// Experiment config: verify the prover first (Protocol 3), then run
    /// once on the kept copy.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(accepted) => {
            if accepted {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("CPSVERIFY_SEED").ok().and_then(|s| s.parse().ok())
}

fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(cli: &Cli, path: &PathBuf) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?.anchored(path);
    if let Some(m) = cli.mode {
        cfg.mode = m.into();
    }
    Ok(cfg)
}

fn resolve_seed(cli: &Cli, cfg: Option<&ExperimentConfig>) -> u64 {
    cli.seed
        .or_else(env_seed)
        .or(cfg.and_then(|c| c.seed))
        .unwrap_or(0)
}

/// Returns Ok(true) for success/accept, Ok(false) for reject/abort.
fn run(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Chi { state } => {
            let spec = state.join(" ");
            let st = SingleQubitState::<f64>::parse_spec(&spec)
                .map_err(|msg| cpsverify::Error::Parse { line: 1, msg })?;
            let t = chi(&st);
            let mut out = String::new();
            for axis in PauliAxis::NON_IDENTITY {
                out.push_str(&format!("chi({axis})={:.6}\n", t.chi(axis)));
            }
            out.push_str(&format!("w={:.6}\n", t.weight()));
            emit(cli, &out)?;
            Ok(true)
        }
        Cmd::Backprop { config, qubit, axis } => {
            let cfg = load_config(cli, config)?;
            let target = cfg.load_target()?;
            let axis = PauliAxis::from_char(*axis)
                .filter(|a| *a != PauliAxis::I)
                .ok_or_else(|| cpsverify::Error::Config("axis must be X, Y or Z".into()))?;
            let sign = chi(&target.states()[*qubit]).sign(axis);
            let s = Setting { qubit: *qubit, axis, sign };
            let q = target::backprop_observable(&target, &s)?;
            emit(cli, &format!("{q}\n"))?;
            Ok(true)
        }
        Cmd::SampleSize { config } => {
            let cfg = load_config(cli, config)?;
            let target = cfg.load_target()?;
            let cert = cfg.cert_config(Some(resolve_seed(cli, Some(&cfg))));
            let plan = build_plan(&target, cert.mode)?;
            let n_iid = sample_size_iid(&plan, &cert)?;
            let c = cfg.noniid.map_or(1.0, |nn| nn.c);
            let n_noniid = sample_size_noniid(target.num_qubits(), n_iid, &cert, c)?;
            emit(cli, &format!("N_iid={n_iid}\nN_noniid={n_noniid}\n"))?;
            Ok(true)
        }
        Cmd::Certify { config } => {
            let cfg = load_config(cli, config)?;
            let target = cfg.load_target()?;
            let spec = cpsverify::config::build_prover(&cfg.prover, &target)?;
            let cert = cfg.cert_config(Some(resolve_seed(cli, Some(&cfg))));
            let res = certify_iid(&target, &spec, &cert)?;
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&res)?))?;
            Ok(res.accepted)
        }
        Cmd::Verify { config } => {
            let cfg = load_config(cli, config)?;
            let target = cfg.load_target()?;
            let spec = cpsverify::config::build_prover(&cfg.prover, &target)?;
            let vcfg = cfg.verify_config(Some(resolve_seed(cli, Some(&cfg))));
            let (res, _kept) = verify_noniid(&target, &spec, &vcfg)?;
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&res)?))?;
            Ok(res.cert.accepted)
        }
        Cmd::Msi { cmd } => run_msi_cmd(cli, cmd),
        Cmd::Sweep { config } => {
            let cfg = load_config(cli, config)?;
            let target = cfg.load_target()?;
            let sweep = cfg
                .sweep
                .clone()
                .ok_or_else(|| cpsverify::Error::Config("config has no sweep section".into()))?;
            let cert = cfg.cert_config(Some(resolve_seed(cli, Some(&cfg))));
            let rows = run_sweep(&target, &cert, &sweep)?;
            emit(cli, &rows_to_csv(&rows))?;
            Ok(true)
        }
        Cmd::Selftest => selftest(cli),
    }
}

fn msi_inputs(
    states: &Option<PathBuf>,
    n: usize,
) -> Result<Vec<SingleQubitState<f64>>> {
    match states {
        Some(path) => {
            let v = parse_states(&std::fs::read_to_string(path)?)?;
            if v.len() != n {
                return Err(cpsverify::Error::DimensionMismatch(v.len(), n));
            }
            Ok(v)
        }
        None => Ok(vec![SingleQubitState::plus(); n]),
    }
}

fn load_program(path: &PathBuf, states: &Option<PathBuf>) -> Result<MsiProgram> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let doc: ProgramDoc = serde_json::from_str(&text)?;
        MsiProgram::from_doc(&doc)
    } else {
        let circ = UniversalCircuit::parse(&text)?;
        let inputs = msi_inputs(states, circ.num_qubits())?;
        compile_msi(&circ, &inputs)
    }
}

fn run_msi_cmd(cli: &Cli, cmd: &MsiCmd) -> Result<bool> {
    match cmd {
        MsiCmd::Compile(args) => {
            let circ = UniversalCircuit::parse(&std::fs::read_to_string(&args.circuit)?)?;
            let inputs = msi_inputs(&args.states, circ.num_qubits())?;
            let program = compile_msi(&circ, &inputs)?;
            emit(cli, &format!("{}\n", serde_json::to_string_pretty(&program.to_doc())?))?;
            Ok(true)
        }
        MsiCmd::Run(args) => {
            let program = load_program(&args.program, &args.states)?;
            match &args.config {
                Some(cfg_path) => {
                    let cfg = load_config(cli, cfg_path)?;
                    // the prover must prepare the compiled CPS, so the
                    // config's own target paths are ignored here
                    let spec = cpsverify::config::build_prover(&cfg.prover, program.cps())?;
                    let vcfg = cfg.verify_config(Some(resolve_seed(cli, Some(&cfg))));
                    let mut rng =
                        rng_from(derive_seed(vcfg.cert.seed, "msi-run", 0));
                    let res = verify_and_run(&program, &spec, &vcfg, &mut rng)?;
                    let accepted = res.run.is_some();
                    emit(cli, &format!("{}\n", serde_json::to_string_pretty(&res)?))?;
                    Ok(accepted)
                }
                None => {
                    let seed = resolve_seed(cli, None);
                    let psi = build_cps_dense(program.cps())?;
                    let mut rng = rng_from(derive_seed(seed, "msi-ideal", 0));
                    let mut counts =
                        std::collections::BTreeMap::<String, u64>::new();
                    for _ in 0..args.shots {
                        let mut copy = AdaptiveSession::from_density(
                            dense::DenseDensity::from_pure(&psi),
                        );
                        let out = run_msi(&program, &mut copy, &mut rng)?;
                        let key: String = out
                            .output_bits
                            .iter()
                            .map(|b| char::from(b'0' + b))
                            .collect();
                        *counts.entry(key).or_insert(0) += 1;
                    }
                    let mut text = String::from("bits,count,frequency\n");
                    for (bits, k) in &counts {
                        text.push_str(&format!(
                            "{bits},{k},{:.6}\n",
                            *k as f64 / args.shots as f64
                        ));
                    }
                    emit(cli, &text)?;
                    Ok(true)
                }
            }
        }
    }
}

fn selftest(cli: &Cli) -> Result<bool> {
    let mut report = String::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, report: &mut String| {
        report.push_str(&format!("{} {name}\n", if pass { "pass" } else { "FAIL" }));
        if !pass {
            ok = false;
        }
    };
    let mut rng = rng_from(0xC0FFEE);

    // tableau conjugation vs dense unitary conjugation
    let mut pass = true;
    for _ in 0..40 {
        use rand::Rng;
        let n = 1 + rng.gen_range(0..4);
        let circ = CliffordCircuit::random(n, 3 * n, &mut rng);
        let tab = cpsverify::clifford::CliffordTableau::from_circuit(&circ);
        let axes: Vec<PauliAxis> = (0..n)
            .map(|_| [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z][rng.gen_range(0..4)])
            .collect();
        let p = PauliString::from_axes(&axes, 0);
        let q = tab.conjugate(&p)?;
        let u = dense::circuit_unitary::<f64>(&circ)?;
        let pm = dense::pauli_matrix::<f64>(&p)?;
        let qm = dense::pauli_matrix::<f64>(&q)?;
        let lhs = &u * pm * u.adjoint();
        if (lhs - qm).iter().any(|d| d.norm() > 1e-10) {
            pass = false;
        }
    }
    check("tableau conjugation matches dense oracle", pass, &mut report);

    // chi of the canonical magic state
    let t = chi(&SingleQubitState::<f64>::t_state());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    check(
        "chi(T|+>) weight is 1/sqrt(2)",
        (t.weight() - s).abs() < 1e-12,
        &mut report,
    );

    // worked sample-size example
    let tgt = CpsTarget::new(vec![SingleQubitState::zero()], CliffordCircuit::empty(1))?;
    let cert = cpsverify::certifier::CertConfig {
        epsilon: 0.3,
        delta: 0.1,
        k: 3.0,
        mode: SamplingMode::ExcludeIdentity,
        seed: 0,
    };
    let plan = build_plan(&tgt, cert.mode)?;
    check(
        "iid sample-size worked example (150)",
        sample_size_iid(&plan, &cert)? == 150,
        &mut report,
    );

    // perfect prover certifies
    let res = certify_iid(&tgt, &ideal_prover(&tgt), &cert)?;
    check("perfect prover accepted with W = 1", res.accepted && (res.witness - 1.0).abs() < 1e-12, &mut report);

    // MSI: single T on |+>, branch enumeration vs dense reference
    let circ = UniversalCircuit::parse("QUBITS 1\nT 0\nH 0")?;
    let inputs = vec![SingleQubitState::plus()];
    let program = compile_msi(&circ, &inputs)?;
    let copy = build_cps_dense(program.cps())?;
    let got = enumerate_branches(&program, &copy)?;
    let want = ideal_output_distribution(&circ, &inputs)?;
    let tvd: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
    check("MSI branch enumeration matches dense simulation", tvd < 1e-9, &mut report);

    // Fuchs-van de Graaf on a random pure pair
    let mut pass = true;
    for _ in 0..50 {
        use rand::Rng;
        let mk = |rng: &mut rand_chacha::ChaCha12Rng| {
            SingleQubitState::<f64>::from_angles(
                rng.gen::<f64>() * std::f64::consts::PI,
                rng.gen::<f64>() * std::f64::consts::TAU,
            )
        };
        let a = dense::DenseState::product(&[mk(&mut rng), mk(&mut rng)])?;
        let b = dense::DenseState::product(&[mk(&mut rng), mk(&mut rng)])?;
        let ra = dense::DenseDensity::from_pure(&a);
        let rb = dense::DenseDensity::from_pure(&b);
        let d = dense::trace_distance(&ra, &rb)?;
        let f = rb.fidelity(&a)?;
        let lo = 1.0 - f.sqrt();
        let hi = (1.0 - f).sqrt();
        if d < lo - 1e-9 || d > hi + 1e-9 {
            pass = false;
        }
    }
    check("Fuchs-van de Graaf inequalities", pass, &mut report);

    emit(cli, &report)?;
    Ok(ok)
}
