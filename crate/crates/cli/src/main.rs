//! `bwp`: simulate and analyze systems with lines of equilibria.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use bwp_core::averaging::{drift_grid, melnikov_zeros, MelnikovComponent, MelnikovZero};
use bwp_core::classify::{scan_manifold, spectrum_table};
use bwp_core::connections::{find_heteroclinic, splitting_distance, ConnectionOptions, SplittingOptions};
use bwp_core::integrals::{integrals, scale_pair};
use bwp_core::integrate::export::{fmt_num, write_rows, TrajectoryMeta};
use bwp_core::integrate::{integrate, Tolerances, Trajectory};
use bwp_core::oscillators::{decoupling_defect, network_from_params};
use bwp_core::portraits::{portrait, write_bundle, PortraitSpec, SeedGrid, View};
use bwp_core::systems::{make_family, FamilyId, FamilySpec, Params};
use bwp_core::Error;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const DEFAULT_OUT: &str = "bwp-out";

#[derive(Parser, Debug)]
#[command(name = "bwp", version, about = "Dynamics near lines of equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Output directory. Takes precedence over BWP_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for scans and grids.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the resolved run configuration as JSON before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Run a configuration saved with --save-config.
    #[arg(long, global = true, conflicts_with = "save_config")]
    from_config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "args", rename_all = "snake_case")]
enum Command {
    /// Integrate one orbit and export it with its first integrals.
    Simulate(SimulateArgs),
    /// Locate bifurcation points along the equilibrium line.
    Classify(ClassifyArgs),
    /// Averaged per-period drift of the first integrals.
    Average(AverageArgs),
    /// Melnikov functions over a range of Θ and their zeros.
    Melnikov(MelnikovArgs),
    /// Shoot for a heteroclinic connection from an equilibrium.
    Heteroclinic(HeteroclinicArgs),
    /// Separatrix splitting of the perturbed elliptic Hopf truncation.
    Splitting(SplittingArgs),
    /// Coupled oscillators on an octahedral graph.
    Osc(OscArgs),
    /// Phase-portrait data and a gnuplot script.
    Portrait(PortraitArgs),
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FamilyArgs {
    /// Family id, e.g. tb-2.4.
    #[arg(long, value_parser = parse_family)]
    family: FamilyId,
    /// Parameter assignment `name=value`; repeatable.
    #[arg(long = "param", value_name = "K=V", value_parser = parse_param, allow_hyphen_values = true)]
    #[serde(with = "param_map", default)]
    params: Vec<(String, f64)>,
}

impl FamilyArgs {
    fn params(&self) -> Params {
        let mut p = Params::new();
        for (k, v) in &self.params {
            p.insert(k, *v);
        }
        p
    }

    fn spec(&self) -> Result<FamilySpec, Error> {
        make_family(self.family, &self.params())
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    init: Vec<f64>,
    /// Final time; negative integrates backward.
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    t: f64,
    /// Resampling step; accepted steps are written when absent.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClassifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Scan range `lo:hi` along the line.
    #[arg(long, allow_hyphen_values = true, default_value = "-2:2")]
    range: Span,
    #[arg(long, default_value_t = 1024)]
    n: usize,
    /// Also write the transverse spectrum on this many sample points.
    #[arg(long)]
    spectrum: Option<usize>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AverageArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Θ values, comma separated. Overrides --theta-range.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, default_value = "0.1:2")]
    theta_range: Span,
    #[arg(long, default_value_t = 8)]
    n_theta: usize,
    /// Levels as fractions of the periodic window (0 center, 1 separatrix).
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    h_fractions: Vec<f64>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MelnikovArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    #[arg(long, allow_hyphen_values = true)]
    theta_range: Span,
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// theta, h or normal.
    #[arg(long, default_value = "theta", value_parser = parse_component)]
    component: MelnikovComponent,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HeteroclinicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// Source equilibrium on the line.
    #[arg(long, allow_hyphen_values = true)]
    source: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 500.0)]
    t_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    accept_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    eta: f64,
    #[arg(long, default_value_t = 16)]
    ring: usize,
    /// Follow the stable manifold in backward time.
    #[arg(long)]
    backward: bool,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SplittingArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    omega: f64,
    /// Radial scales, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.35,0.25,0.175,0.125")]
    r: Vec<f64>,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, default_value_t = 64)]
    seeds: usize,
    #[arg(long, default_value_t = 8)]
    harmonics: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OscArgs {
    /// Graph size: 1 square, 2 octahedron.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Node dynamics: 0 Stuart-Landau, 1 van der Pol.
    #[arg(long, default_value_t = 0)]
    node: usize,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Horizon of the invariance demo.
    #[arg(long, default_value_t = 100.0)]
    t: f64,
    /// Horizon of the decoupling comparison.
    #[arg(long, default_value_t = 50.0)]
    t_decouple: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Phase samples for the return-map fixed-point check.
    #[arg(long, default_value_t = 16)]
    fixed_samples: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PortraitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    family: FamilyArgs,
    /// state-plane, state-3d or integral-plane.
    #[arg(long, default_value = "state-plane", value_parser = parse_view)]
    view: View,
    /// Grid axis `lo:hi:n`; one per grid dimension.
    #[arg(long = "axis", allow_hyphen_values = true)]
    axes: Vec<Axis>,
    #[arg(long, allow_hyphen_values = true)]
    t_back: Option<f64>,
    #[arg(long)]
    t_fwd: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    line_range: Option<Span>,
    #[arg(long)]
    manifold_points: Option<usize>,
}

/// `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Span {
    lo: f64,
    hi: f64,
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
        let lo: f64 = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
        let hi: f64 = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
        if !(lo < hi) {
            return Err(format!("empty range `{s}`"));
        }
        Ok(Span { lo, hi })
    }
}

/// `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Axis {
    lo: f64,
    hi: f64,
    n: usize,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (span, n) = s.rsplit_once(':').ok_or_else(|| format!("expected lo:hi:n, got `{s}`"))?;
        let n: usize = n.trim().parse().map_err(|_| format!("bad count `{n}`"))?;
        let sp: Span = span.parse()?;
        Ok(Axis { lo: sp.lo, hi: sp.hi, n })
    }
}

fn parse_family(s: &str) -> Result<FamilyId, String> {
    s.parse().map_err(|e: Error| {
        let known: Vec<&str> = FamilyId::ALL.iter().map(|f| f.as_str()).collect();
        format!("{e}; known: {}", known.join(", "))
    })
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let mut p = Params::new();
    p.push_assignment(s).map_err(|e| e.to_string())?;
    let (k, v) = p.iter().next().expect("one assignment");
    Ok((k.to_string(), v))
}

fn parse_component(s: &str) -> Result<MelnikovComponent, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_view(s: &str) -> Result<View, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parameter list stored as a JSON object.
mod param_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(String, f64)], s: S) -> Result<S::Ok, S::Error> {
        v.iter().cloned().collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(String, f64)>, D::Error> {
        Ok(BTreeMap::<String, f64>::deserialize(d)?.into_iter().collect())
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunConfig {
    out: PathBuf,
    #[serde(flatten)]
    command: Command,
}

/// Usage errors exit with 2, numerical failures with 1.
enum Failure {
    Usage(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Integration(_)
            | Error::NoEigenvalue { .. }
            | Error::NonSimpleEigenvalue { .. }
            | Error::NoConvergence { .. }
            | Error::SectionMissed(_)
            | Error::PeriodMismatch { .. }
            | Error::OutOfChart { .. }
            | Error::Io(_) => Failure::Numerical(e),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(e.into())
    }
}

type Run = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Run {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        // a second initialization only happens in tests; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let env_out = std::env::var_os("BWP_OUT").map(PathBuf::from);
    let config = match (&cli.from_config, cli.command) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let mut c: RunConfig = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))?;
            if let Some(o) = cli.out.or(env_out) {
                c.out = o;
            }
            c
        }
        (Some(_), Some(_)) => return Err(Failure::Usage("--from-config replaces the subcommand; give one or the other".into())),
        (None, Some(command)) => RunConfig { out: cli.out.or(env_out).unwrap_or_else(|| DEFAULT_OUT.into()), command },
        (None, None) => return Err(Failure::Usage("no subcommand given; see --help".into())),
    };
    if let Some(path) = &cli.save_config {
        let text = serde_json::to_string_pretty(&config).expect("config serializes") + "\n";
        fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    fs::create_dir_all(&config.out).map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", config.out.display())))?;
    let out = config.out.as_path();
    let result = match &config.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Classify(a) => classify(a, out),
        Command::Average(a) => average(a, out),
        Command::Melnikov(a) => melnikov(a, out),
        Command::Heteroclinic(a) => heteroclinic(a, out),
        Command::Splitting(a) => splitting(a, out),
        Command::Osc(a) => osc(a, out),
        Command::Portrait(a) => portrait_cmd(a, out),
    };
    if let Err(Failure::Numerical(e)) = &result {
        write_failure(out, e);
    }
    result
}

#[derive(Serialize)]
struct FailureReport {
    error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<Vec<f64>>,
}

fn write_failure(out: &Path, e: &Error) {
    let (t, state) = match e {
        Error::Integration(f) => (Some(f.t), Some(f.state.clone())),
        _ => (None, None),
    };
    let report = FailureReport { error: e.to_string(), t, state };
    let _ = fs::write(out.join("failure.json"), serde_json::to_string_pretty(&report).expect("serializes") + "\n");
}

fn create(out: &Path, name: &str) -> Result<BufWriter<fs::File>, Failure> {
    Ok(BufWriter::new(fs::File::create(out.join(name))?))
}

fn write_json<T: Serialize + ?Sized>(out: &Path, name: &str, v: &T) -> Run {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)? + "\n";
    fs::write(out.join(name), text)?;
    Ok(())
}

type Column = (&'static str, Box<dyn Fn(&[f64]) -> Option<f64>>);

fn integral_columns(id: FamilyId) -> Vec<Column> {
    match id {
        FamilyId::Tb24 | FamilyId::RevTb25 => vec![
            ("theta", Box::new(move |s: &[f64]| integrals(id, s).ok().map(|p| p.theta)) as Box<dyn Fn(&[f64]) -> Option<f64>>),
            ("h", Box::new(move |s: &[f64]| integrals(id, s).ok().map(|p| p.hamiltonian))),
            ("tau", Box::new(move |s: &[f64]| integrals(id, s).ok().and_then(|p| scale_pair(p).ok()).map(|c| c.tau))),
            ("h_tilde", Box::new(move |s: &[f64]| integrals(id, s).ok().and_then(|p| scale_pair(p).ok()).map(|c| c.h_tilde))),
        ],
        FamilyId::LineZero21 => vec![("x_minus_half_y2", Box::new(|s: &[f64]| Some(s[0] - 0.5 * s[1] * s[1])))],
        _ => vec![],
    }
}

fn write_trajectory(out: &Path, spec: &FamilySpec, traj: &Trajectory, dt: Option<f64>) -> Run {
    let (times, states) = match dt {
        Some(dt) => traj.resample(dt),
        None => (traj.times.clone(), traj.states.clone()),
    };
    let cols = integral_columns(spec.id());
    let extra: Vec<(&str, &dyn Fn(&[f64]) -> Option<f64>)> = cols.iter().map(|(n, f)| (*n, f.as_ref())).collect();
    let mut w = create(out, "trajectory.csv")?;
    write_rows(&mut w, &times, &states, &extra)?;
    w.flush()?;
    write_json(out, "trajectory.json", &TrajectoryMeta::new(spec, traj))
}

fn simulate(a: &SimulateArgs, out: &Path) -> Run {
    let spec = a.family.spec()?;
    if a.init.len() != spec.state_dim() {
        return Err(Error::DimensionMismatch { expected: spec.state_dim(), got: a.init.len() }.into());
    }
    if let Some(dt) = a.dt {
        if !(dt > 0.0) {
            return Err(Failure::Usage("--dt must be positive".into()));
        }
    }
    let tol = Tolerances::new(a.rtol, a.atol);
    match integrate(&spec, &a.init, (0.0, a.t), &tol) {
        Ok(traj) => write_trajectory(out, &spec, &traj, a.dt),
        Err(Error::Integration(f)) => {
            write_trajectory(out, &spec, &f.partial, a.dt)?;
            Err(Failure::Numerical(Error::Integration(f)))
        }
        Err(e) => Err(e.into()),
    }
}

fn classify(a: &ClassifyArgs, out: &Path) -> Run {
    let spec = a.family.spec()?;
    let points = scan_manifold(&spec, (a.range.lo, a.range.hi), a.n)?;
    write_json(out, "bifurcations.json", &points)?;
    if let Some(n) = a.spectrum {
        let table = spectrum_table(&spec, (a.range.lo, a.range.hi), n)?;
        let k = table.iter().map(|(_, e)| e.len()).max().unwrap_or(0);
        let mut w = create(out, "spectrum.csv")?;
        let mut header = vec!["y".to_string()];
        for i in 0..k {
            header.push(format!("re{i}"));
            header.push(format!("im{i}"));
        }
        writeln!(w, "{}", header.join(","))?;
        for (y, eig) in &table {
            let mut row = vec![fmt_num(*y)];
            for i in 0..k {
                match eig.get(i) {
                    Some(z) => row.extend([fmt_num(z.re), fmt_num(z.im)]),
                    None => row.extend(["nan".to_string(), "nan".to_string()]),
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
    }
    Ok(())
}

fn average(a: &AverageArgs, out: &Path) -> Run {
    let spec = a.family.spec()?;
    let thetas: Vec<f64> = if !a.theta.is_empty() {
        a.theta.clone()
    } else if a.n_theta < 2 {
        vec![a.theta_range.lo]
    } else {
        (0..a.n_theta).map(|i| a.theta_range.lo + (a.theta_range.hi - a.theta_range.lo) * i as f64 / (a.n_theta - 1) as f64).collect()
    };
    let samples = drift_grid(&spec, &thetas, &a.h_fractions)?;
    let mut w = create(out, "drift.csv")?;
    writeln!(w, "theta,h,delta_theta,delta_h,period,error_estimate")?;
    for d in &samples {
        let row = [d.theta, d.h, d.delta_theta, d.delta_h, d.period, d.error_estimate].map(fmt_num);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ZeroReport<'a> {
    family: FamilyId,
    component: MelnikovComponent,
    requested_range: (f64, f64),
    effective_range: (f64, f64),
    log_spaced: bool,
    samples: usize,
    sign_changes: usize,
    unique: bool,
    zeros: &'a [MelnikovZero],
}

fn melnikov(a: &MelnikovArgs, out: &Path) -> Run {
    let spec = a.family.spec()?;
    let scan = melnikov_zeros(&spec, (a.theta_range.lo, a.theta_range.hi), a.n, a.component)?;
    let mut w = create(out, "melnikov.csv")?;
    writeln!(w, "theta,m_theta,m_h,m_normal,error_estimate")?;
    for m in &scan.samples {
        let row = [m.theta_value, m.m_theta, m.m_h, m.m_normal, m.error_estimate].map(fmt_num);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    let report = ZeroReport {
        family: scan.family,
        component: scan.component,
        requested_range: scan.requested_range,
        effective_range: scan.effective_range,
        log_spaced: scan.log_spaced,
        samples: scan.samples.len(),
        sign_changes: scan.sign_changes,
        unique: scan.unique,
        zeros: &scan.zeros,
    };
    write_json(out, "zeros.json", &report)
}

#[derive(Serialize)]
struct ConnectionReport {
    source: f64,
    target: f64,
    flight_time: f64,
    residual: f64,
    homoclinic: bool,
    seed_index: usize,
    backward: bool,
}

fn heteroclinic(a: &HeteroclinicArgs, out: &Path) -> Run {
    let spec = a.family.spec()?;
    let opts = ConnectionOptions { delta: a.delta, t_max: a.t_max, accept_tol: a.accept_tol, eta: a.eta, ring: a.ring, backward: a.backward };
    let c = find_heteroclinic(&spec, a.source, &opts)?;
    write_json(
        out,
        "connection.json",
        &ConnectionReport {
            source: c.source_y,
            target: c.target_y,
            flight_time: c.flight_time,
            residual: c.closest_residual,
            homoclinic: c.homoclinic,
            seed_index: c.seed_index,
            backward: c.backward,
        },
    )?;
    if let Some(orbit) = &c.orbit {
        let mut w = create(out, "orbit.csv")?;
        write_rows(&mut w, &orbit.times, &orbit.states, &[])?;
        w.flush()?;
    }
    Ok(())
}

fn splitting(a: &SplittingArgs, out: &Path) -> Run {
    if a.r.is_empty() {
        return Err(Failure::Usage("--r needs at least one scale".into()));
    }
    let opts = SplittingOptions { gamma: a.gamma, seeds: a.seeds, harmonics: a.harmonics, ..Default::default() };
    let results: Vec<_> = a.r.par_iter().map(|&r| splitting_distance(a.omega, r, &opts)).collect();
    let mut measurements = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(m) => measurements.push(m),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let mut w = create(out, "splitting.csv")?;
    writeln!(w, "r,gap,signed_gap,sign_changes")?;
    for m in &measurements {
        writeln!(w, "{},{},{},{}", fmt_num(m.r_scale), fmt_num(m.gap), fmt_num(m.signed_gap), m.sign_changes)?;
    }
    w.flush()?;
    write_json(out, "splitting.json", &measurements)?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct OscReport {
    m: usize,
    node: usize,
    vertices: Vec<i64>,
    antipode_residual_max: f64,
    decoupling_defect: f64,
    fixed_point_phases: Vec<f64>,
    fixed_point_residuals: Vec<f64>,
}

fn osc(a: &OscArgs, out: &Path) -> Run {
    let params = Params::from_pairs(&[("m", a.m as f64), ("node", a.node as f64), ("coupling", a.coupling), ("mu", a.mu)]);
    let net = network_from_params(&params)?;
    let g = *net.graph();
    let d = net.node_dim();
    // a fixed point of the antipode space: u_{-j} = -u_j
    let mut x0 = vec![0.0; net.state_dim()];
    for j in 1..=g.m() as i64 + 1 {
        let u = [1.0 + 0.1 * j as f64, 0.3 - 0.2 * j as f64];
        for c in 0..d {
            x0[g.index(j) * d + c] = u[c % 2];
            x0[g.index(-j) * d + c] = -u[c % 2];
        }
    }
    let tol = Tolerances::new(1e-11, 1e-13);
    let traj = integrate(&net, &x0, (0.0, a.t), &tol)?;
    let anti = traj.states.iter().map(|s| net.antipode_residual(s)).fold(0.0, f64::max);

    let (times, states) = traj.resample(a.dt);
    let mut w = create(out, "vertices.csv")?;
    let mut header = vec!["t".to_string()];
    for i in 0..g.n_vertices() {
        for c in 0..d {
            header.push(format!("v{}_{c}", g.label(i)));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for (t, s) in times.iter().zip(&states) {
        let mut row = vec![fmt_num(*t)];
        row.extend(s.iter().map(|v| fmt_num(*v)));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;

    let short = integrate(&net, &x0, (0.0, a.t_decouple), &tol)?;
    let defect = decoupling_defect(&net, &short, &tol)?;

    let phases: Vec<f64> = (0..a.fixed_samples).map(|k| 2.0 * std::f64::consts::PI * k as f64 / a.fixed_samples as f64).collect();
    let residuals = phases
        .par_iter()
        .map(|&p| {
            let mut coords = vec![0.0; g.m()];
            if let Some(c) = coords.first_mut() {
                *c = p;
            }
            net.fixed_point_residual(&coords, &tol)
        })
        .collect::<Result<Vec<f64>, Error>>()?;

    write_json(
        out,
        "osc.json",
        &OscReport {
            m: g.m(),
            node: a.node,
            vertices: (0..g.n_vertices()).map(|i| g.label(i)).collect(),
            antipode_residual_max: anti,
            decoupling_defect: defect,
            fixed_point_phases: phases,
            fixed_point_residuals: residuals,
        },
    )
}

fn portrait_cmd(a: &PortraitArgs, out: &Path) -> Run {
    let mut ps = PortraitSpec::preset(a.family.family, a.family.params(), a.view);
    if !a.axes.is_empty() {
        ps.grid = SeedGrid {
            lo: a.axes.iter().map(|x| x.lo).collect(),
            hi: a.axes.iter().map(|x| x.hi).collect(),
            counts: a.axes.iter().map(|x| x.n).collect(),
        };
    }
    if let Some(t) = a.t_back {
        ps.t_window.0 = t;
    }
    if let Some(t) = a.t_fwd {
        ps.t_window.1 = t;
    }
    if let Some(dt) = a.dt {
        ps.dt = dt;
    }
    if let Some(r) = a.line_range {
        ps.line_range = (r.lo, r.hi);
    }
    if let Some(k) = a.manifold_points {
        ps.manifold_points = k;
    }
    let bundle = portrait(&ps)?;
    write_bundle(&bundle, &out.join("portrait"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_and_axes_parse() {
        assert_eq!("-1:1".parse::<Span>().unwrap(), Span { lo: -1.0, hi: 1.0 });
        assert_eq!("1e-2:1".parse::<Span>().unwrap(), Span { lo: 1e-2, hi: 1.0 });
        assert!("1:-1".parse::<Span>().is_err());
        assert!("3".parse::<Span>().is_err());
        assert_eq!("-2:-1:5".parse::<Axis>().unwrap(), Axis { lo: -2.0, hi: -1.0, n: 5 });
        assert!("0:1:x".parse::<Axis>().is_err());
    }

    #[test]
    fn params_accept_aliases_and_negatives() {
        assert_eq!(parse_param("b=-1.2").unwrap(), ("b".to_string(), -1.2));
        assert_eq!(parse_param("λ=2").unwrap(), ("lambda".to_string(), 2.0));
        assert!(parse_param("b").is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cli = Cli::parse_from(["bwp", "melnikov", "--family", "tb-2.4", "--param", "eps=0.05", "--param", "lambda=1", "--param", "b=-1.2", "--theta-range", "0.5:10", "--component", "normal"]);
        let c = RunConfig { out: "x".into(), command: cli.command.unwrap() };
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        assert_eq!(back.command, Command::Melnikov(MelnikovArgs { family: FamilyArgs { params: {
            let mut p = match &c.command { Command::Melnikov(m) => m.family.params.clone(), _ => unreachable!() };
            p.sort_by(|a, b| a.0.cmp(&b.0));
            p
        }, family: FamilyId::Tb24 }, theta_range: Span { lo: 0.5, hi: 10.0 }, n: 64, component: MelnikovComponent::Normal }));
    }
}
