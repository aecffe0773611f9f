//! The `hqam` command-line tool.
//!
//! Exit codes: 0 on success, 2 for invalid arguments (including unsupported
//! orders and mismatched SNR grids), 1 for I/O failures and malformed files.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::geometry::{
    hqam_2d, hqam_3d_with_basis, nn_histogram, Constellation, LatticeBasis, LATTICE_NN_TOL,
    PROJECTED_NN_TOL, SUPPORTED_ORDERS,
};
use crate::io::{self, GainRow, ProjectionFile};
use crate::pso::{multi_start, project, PsoConfig};
use crate::sep::{
    abs_rel_error, snr_gain_at, table2_params, SepCurve, SepPolynomial, SnrPoint,
};
use crate::sim::{sweep, EnergyReference, SimConfig, SimReport};

#[derive(Debug, Parser)]
#[command(name = "hqam", version, about = "3D-HQAM constellations, projections and SEP curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a 2D or 3D constellation and write it as JSON.
    Gen(GenArgs),
    /// Project a 3D constellation onto the plane with multi-start PSO.
    Project(ProjectArgs),
    /// Evaluate the closed-form SEP over an SNR grid.
    Sep(SepArgs),
    /// Monte Carlo SEP of a constellation over AWGN.
    Sim(SimArgs),
    /// SNR gain of 3D-HQAM over 2D-HQAM at a target SEP.
    Compare(CompareArgs),
    /// Absolute/relative error between an analytic and a simulated curve.
    Errors(ErrorsArgs),
    /// Regenerate every data file (gen, project, sep, sim, compare) in one run.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Paper,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Tetrahedral,
    Printed,
}

impl From<BasisArg> for LatticeBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Tetrahedral => LatticeBasis::Tetrahedral,
            BasisArg::Printed => LatticeBasis::AsPrinted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnergyArg {
    Constellation,
    Unit,
}

impl From<EnergyArg> for EnergyReference {
    fn from(e: EnergyArg) -> Self {
        match e {
            EnergyArg::Constellation => EnergyReference::Constellation,
            EnergyArg::Unit => EnergyReference::Unit,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(short = 'M', long)]
    pub order: usize,
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    /// 3D generating vectors.
    #[arg(long, value_enum, default_value_t = BasisArg::Tetrahedral)]
    pub basis: BasisArg,
    /// Output file; JSON goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// 3D constellation JSON.
    #[arg(long)]
    pub constellation: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Projection matrix JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Projected constellation JSON [default: <out stem>.constellation.json].
    #[arg(long)]
    pub projected_out: Option<PathBuf>,
    /// Target MED [default: MED of the input].
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 60)]
    pub particles: usize,
    /// Weight of the average-power preservation penalty.
    #[arg(long, default_value_t = 0.0)]
    pub power_penalty: f64,
}

#[derive(Debug, Args)]
pub struct SepArgs {
    /// Modulation order (taken from the constellation file in derived mode).
    #[arg(short = 'M', long)]
    pub order: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Paper)]
    pub mode: ModeArg,
    /// Constellation JSON, required in derived mode.
    #[arg(long)]
    pub constellation: Option<PathBuf>,
    #[arg(long, default_value = "0:30:1", allow_hyphen_values = true)]
    pub snr: String,
    /// Relative tolerance for counting nearest neighbours in derived mode.
    #[arg(long, default_value_t = PROJECTED_NN_TOL)]
    pub nn_tol: f64,
    /// `csv` writes the curve, `json` the polynomial.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub constellation: PathBuf,
    #[arg(long, default_value = "0:30:2", allow_hyphen_values = true)]
    pub snr: String,
    /// Maximum symbols per SNR point.
    #[arg(long, default_value_t = 10_000_000)]
    pub symbols: u64,
    /// Early-stop error count per SNR point (0 disables early stopping).
    #[arg(long, default_value_t = 200)]
    pub target_errors: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed work partitions per SNR point (part of the random stream layout).
    #[arg(long, default_value_t = 8)]
    pub partitions: usize,
    #[arg(long, value_enum, default_value_t = EnergyArg::Constellation)]
    pub energy_ref: EnergyArg,
    /// `csv` writes the curve, `json` the full report.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Additional report JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_values_t = SUPPORTED_ORDERS.to_vec())]
    pub orders: Vec<usize>,
    /// SEP level at which the gain is read off.
    #[arg(long, default_value_t = 1e-5)]
    pub target: f64,
    #[arg(long, default_value = "0:60:0.05", allow_hyphen_values = true)]
    pub snr: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[arg(long)]
    pub analytic: PathBuf,
    #[arg(long)]
    pub sim: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = "hqam-out")]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = SUPPORTED_ORDERS.to_vec())]
    pub orders: Vec<usize>,
    /// Simulation grid.
    #[arg(long, default_value = "0:30:2", allow_hyphen_values = true)]
    pub snr: String,
    #[arg(long, default_value_t = 1_000_000)]
    pub symbols: u64,
    #[arg(long, default_value_t = 200)]
    pub target_errors: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 60)]
    pub particles: usize,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_)
        | Error::NotInTable(_)
        | Error::DegenerateInput(_)
        | Error::OutOfRange(_)
        | Error::RelativeErrorUndefined => 2,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) | Error::InternalConsistency(_) => 1,
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HQAM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::invalid(format!("HQAM_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(e.to_string()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Project(a) => cmd_project(a),
        Command::Sep(a) => cmd_sep(a),
        Command::Sim(a) => cmd_sim(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Errors(a) => cmd_errors(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => io::write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

/// Summary lines go to stdout unless stdout carries the data.
fn report_line(data_on_stdout: bool, line: &str) {
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn check_order(m: usize) -> Result<()> {
    if SUPPORTED_ORDERS.contains(&m) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "unsupported order {m} (supported: 8, 16, 32, 64, 128, 256, 512, 1024)"
        )))
    }
}

fn build(m: usize, dim: usize, basis: LatticeBasis) -> Result<Constellation> {
    check_order(m)?;
    match dim {
        2 => hqam_2d(m),
        3 => hqam_3d_with_basis(m, basis),
        d => Err(Error::invalid(format!("dimension must be 2 or 3, got {d}"))),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let c = build(a.order, a.dim, a.basis.into())?;
    let hist = nn_histogram(&c, LATTICE_NN_TOL)?;
    emit(a.out.as_deref(), &io::constellation_json(&c)?)?;
    report_line(
        a.out.is_none(),
        &format!(
            "M={} dim={} med={:.6} avg_power={:.6} mean_k={}",
            c.order(),
            c.dim(),
            c.med(),
            c.avg_power(),
            io::rational_string(&hist.mean_k)
        ),
    );
    Ok(())
}

fn pso_config(seed: u64, iterations: usize, particles: usize, penalty: f64) -> PsoConfig {
    PsoConfig {
        n_particles: particles,
        n_iterations: iterations,
        seed,
        power_penalty: penalty,
        ..PsoConfig::default()
    }
}

fn projected_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.constellation.json"))
}

struct Projection {
    file: ProjectionFile,
    projected: Constellation,
}

fn run_projection(x: &Constellation, target: f64, cfg: &PsoConfig, restarts: usize) -> Result<Projection> {
    let trace = multi_start(x, target, cfg, restarts)?;
    let projected = project(x, &trace.final_matrix)?;
    Ok(Projection {
        file: ProjectionFile {
            matrix: trace.final_matrix,
            target_med: target,
            final_fitness: trace.final_fitness,
            seed: trace.seed,
        },
        projected,
    })
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let x = io::read_constellation(&a.constellation)?;
    if x.dim() != 3 {
        return Err(Error::invalid(format!(
            "{} is a {}D constellation; projection needs 3D input",
            a.constellation.display(),
            x.dim()
        )));
    }
    let target = a.target.unwrap_or(x.med());
    let cfg = pso_config(a.seed, a.iterations, a.particles, a.power_penalty);
    let p = run_projection(&x, target, &cfg, a.restarts)?;
    let projected_out = a.projected_out.unwrap_or_else(|| projected_path(&a.out));
    io::write_projection(&a.out, &p.file)?;
    io::write_constellation(&projected_out, &p.projected)?;
    let achieved = p.projected.med();
    println!(
        "target_med={target:.6} achieved_med={achieved:.6} rel_dev={:.4e} fitness={:.4e} seed={} projected_avg_power={:.6}",
        (achieved - target).abs() / target,
        p.file.final_fitness,
        p.file.seed,
        p.projected.avg_power()
    );
    Ok(())
}

fn cmd_sep(a: SepArgs) -> Result<()> {
    let grid = io::parse_snr_range(&a.snr)?;
    let poly = match a.mode {
        ModeArg::Paper => {
            let m = a
                .order
                .ok_or_else(|| Error::invalid("paper mode needs --order"))?;
            check_order(m)?;
            table2_params(m)?
        }
        ModeArg::Derived => {
            let path = a
                .constellation
                .as_ref()
                .ok_or_else(|| Error::invalid("derived mode needs --constellation"))?;
            let c = io::read_constellation(path)?;
            if let Some(m) = a.order {
                if m != c.order() {
                    return Err(Error::invalid(format!(
                        "--order {m} does not match the {}-point constellation",
                        c.order()
                    )));
                }
            }
            SepPolynomial::derived(&c, a.nn_tol)?
        }
    };
    let bytes = match a.format {
        Format::Csv => io::curve_csv(&SepCurve::analytic(label(&poly), &poly, &grid)?)?,
        Format::Json => io::polynomial_json(&poly)?,
    };
    emit(a.out.as_deref(), &bytes)?;
    report_line(
        a.out.is_none(),
        &format!(
            "M={} mode={} A={:.6} b1={}",
            poly.order(),
            poly.mode().name(),
            poly.divisor(),
            io::rational_string(&poly.coeffs()[0])
        ),
    );
    Ok(())
}

fn label(p: &SepPolynomial) -> String {
    format!("{}-{}", p.mode().name(), p.order())
}

fn sim_config(snr: &str, symbols: u64, target_errors: u64, seed: u64, partitions: usize, energy: EnergyReference) -> Result<SimConfig> {
    Ok(SimConfig {
        snr_points: io::parse_snr_range(snr)?,
        max_symbols: symbols,
        target_errors,
        seed,
        worker_partitions: partitions,
        energy_reference: energy,
    })
}

fn cmd_sim(a: SimArgs) -> Result<()> {
    let c = io::read_constellation(&a.constellation)?;
    let cfg = sim_config(&a.snr, a.symbols, a.target_errors, a.seed, a.partitions, a.energy_ref.into())?;
    let (report, curve) = sweep(&c, &cfg)?;
    let bytes = match a.format {
        Format::Csv => io::curve_csv(&curve)?,
        Format::Json => io::to_json_bytes(&report)?,
    };
    if let Some(r) = &a.report {
        io::write_atomic(r, &io::to_json_bytes(&report)?)?;
    }
    emit(a.out.as_deref(), &bytes)?;
    let total: u64 = report.points.iter().map(|p| p.symbols_sent).sum();
    let secs: f64 = report.points.iter().map(|p| p.elapsed.as_secs_f64()).sum();
    report_line(
        a.out.is_none(),
        &format!(
            "M={} points={} symbols={} seed={} elapsed={secs:.2}s",
            c.order(),
            report.points.len(),
            total,
            report.seed
        ),
    );
    Ok(())
}

/// Derived-mode analytic curves of the 2D and 3D families and their gain.
pub fn gain_row(m: usize, target: f64, grid: &[SnrPoint]) -> Result<GainRow> {
    check_order(m)?;
    let c2 = hqam_2d(m)?;
    let c3 = hqam_3d_with_basis(m, LatticeBasis::default())?;
    let p2 = SepPolynomial::derived(&c2, LATTICE_NN_TOL)?;
    let p3 = SepPolynomial::derived(&c3, LATTICE_NN_TOL)?;
    let curve2 = SepCurve::analytic("2d", &p2, grid)?;
    let curve3 = SepCurve::analytic("3d", &p3, grid)?;
    Ok(GainRow {
        order: m,
        gain_db: snr_gain_at(target, &curve3, &curve2)?,
        med_2d: c2.med(),
        med_3d: c3.med(),
        med_increase_pct: 100.0 * (c3.med() / c2.med() - 1.0),
    })
}

fn compare_rows(orders: &[usize], target: f64, snr: &str) -> Result<Vec<GainRow>> {
    let grid = io::parse_snr_range(snr)?;
    orders.iter().map(|&m| gain_row(m, target, &grid)).collect()
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let rows = compare_rows(&a.orders, a.target, &a.snr)?;
    emit(a.out.as_deref(), &io::compare_csv(&rows)?)?;
    for r in &rows {
        report_line(
            a.out.is_none(),
            &format!(
                "M={} gain={:.2} dB med_2d={:.5} med_3d={:.5} increase={:.2}%",
                r.order, r.gain_db, r.med_2d, r.med_3d, r.med_increase_pct
            ),
        );
    }
    Ok(())
}

/// AE/RE rows of `approx` against the simulated reference on a shared grid.
pub fn error_rows(analytic: &SepCurve, sim: &SepCurve) -> Result<Vec<(f64, crate::sep::ErrorMetrics)>> {
    let (ga, gs) = (analytic.grid_db(), sim.grid_db());
    let same = ga.len() == gs.len()
        && ga
            .iter()
            .zip(&gs)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0));
    if !same {
        return Err(Error::invalid(format!(
            "SNR grids differ ({} vs {} points)",
            ga.len(),
            gs.len()
        )));
    }
    analytic
        .points()
        .iter()
        .zip(sim.points())
        .map(|(a, s)| Ok((a.esn0_db, abs_rel_error(a.sep, s.sep)?)))
        .collect()
}

fn cmd_errors(a: ErrorsArgs) -> Result<()> {
    let analytic = io::read_curve(&a.analytic)?;
    let sim = io::read_curve(&a.sim)?;
    let rows = error_rows(&analytic, &sim)?;
    emit(a.out.as_deref(), &io::errors_csv(&rows)?)?;
    let max_re = rows.iter().filter_map(|(_, m)| m.re).fold(0.0f64, f64::max);
    report_line(a.out.is_none(), &format!("rows={} max_re={max_re:.4e}", rows.len()));
    Ok(())
}

fn write_report(dir: &Path, name: &str, report: &SimReport, curve: &SepCurve) -> Result<()> {
    io::write_curve(&dir.join(format!("{name}.csv")), curve)?;
    io::write_atomic(&dir.join(format!("{name}.report.json")), &io::to_json_bytes(report)?)
}

fn cmd_reproduce(a: ReproduceArgs) -> Result<()> {
    for &m in &a.orders {
        check_order(m)?;
    }
    let sim_grid = io::parse_snr_range(&a.snr)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let dir = a.out.as_path();
    let cfg = pso_config(a.seed, a.iterations, a.particles, 0.0);

    for &m in &a.orders {
        let c2 = hqam_2d(m)?;
        let c3 = hqam_3d_with_basis(m, LatticeBasis::default())?;
        io::write_constellation(&dir.join(format!("constellation_2d_M{m}.json")), &c2)?;
        io::write_constellation(&dir.join(format!("constellation_3d_M{m}.json")), &c3)?;

        let p = run_projection(&c3, c3.med(), &cfg, a.restarts)?;
        io::write_projection(&dir.join(format!("projection_M{m}.json")), &p.file)?;
        io::write_constellation(&dir.join(format!("projected_M{m}.json")), &p.projected)?;

        if let Ok(paper) = table2_params(m) {
            let curve = SepCurve::analytic(label(&paper), &paper, &sim_grid)?;
            io::write_curve(&dir.join(format!("sep_paper_M{m}.csv")), &curve)?;
        }
        let p3 = SepPolynomial::derived(&c3, LATTICE_NN_TOL)?;
        let pp = SepPolynomial::derived(&p.projected, PROJECTED_NN_TOL)?;
        let analytic_3d = SepCurve::analytic("derived-3d", &p3, &sim_grid)?;
        let analytic_proj = SepCurve::analytic("derived-projected", &pp, &sim_grid)?;
        io::write_curve(&dir.join(format!("sep_derived_3d_M{m}.csv")), &analytic_3d)?;
        io::write_curve(&dir.join(format!("sep_derived_projected_M{m}.csv")), &analytic_proj)?;
        io::write_atomic(&dir.join(format!("poly_derived_3d_M{m}.json")), &io::polynomial_json(&p3)?)?;
        io::write_atomic(&dir.join(format!("poly_derived_projected_M{m}.json")), &io::polynomial_json(&pp)?)?;

        let sim_cfg = SimConfig {
            snr_points: sim_grid.clone(),
            max_symbols: a.symbols,
            target_errors: a.target_errors,
            seed: a.seed,
            ..SimConfig::default()
        };
        let (r3, s3) = sweep(&c3, &sim_cfg)?;
        let (rp, sp) = sweep(&p.projected, &sim_cfg)?;
        write_report(dir, &format!("sim_3d_M{m}"), &r3, &s3)?;
        write_report(dir, &format!("sim_projected_M{m}"), &rp, &sp)?;

        let rows = error_rows(&analytic_proj, &sp)?;
        io::write_atomic(&dir.join(format!("errors_projected_M{m}.csv")), &io::errors_csv(&rows)?)?;
        println!(
            "M={m}: med_3d={:.5} med_projected={:.5} med_2d={:.5}",
            c3.med(),
            p.projected.med(),
            c2.med()
        );
    }

    let rows = compare_rows(&a.orders, 1e-5, "0:60:0.05")?;
    io::write_atomic(&dir.join("compare.csv"), &io::compare_csv(&rows)?)?;
    println!("wrote {}", dir.display());
    Ok(())
}
