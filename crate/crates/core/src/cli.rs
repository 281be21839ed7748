//! Command-line driver: one subcommand per pipeline, CSV and JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    first_revival, full_diagonalize, random_basis_state, time_grid, Evolver, TimeSeries, DEFAULT_DENSE_CEILING,
    DEFAULT_DT, DEFAULT_KRYLOV_DIM, DEFAULT_T_MAX,
};
use crate::error::{input, Error, Result};
use crate::format::fmt_g12;
use crate::fsa::{build_ladder, fsa_matrix, fsa_overlay, split_hamiltonian};
use crate::hamiltonian::{build_sector_hamiltonian, verify_form_equivalence};
use crate::observables::{ee_scatter, level_statistics, log_overlap, overlap_tower, Bipartition};
use crate::pxpmap::verify_pxp_equivalence;
use crate::spinbasis::{
    build_sector_basis, enumerate_sectors, sector_components, sector_label, sector_representative, SectorBasis,
    SectorLabel, SpinConfig, ENUMERATION_LIMIT,
};

/// Spectral agreement demanded by `pxp-verify` and `form-check`.
pub const VERIFY_TOLERANCE: f64 = 1e-10;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "KITAEV_SCARS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kitaev-scars", version, about = "Sector-resolved exact diagonalization of the spin-1 Kitaev chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Dimension of every bond-parity sector, by full enumeration.
    Sectors {
        #[arg(long)]
        n: usize,
        /// Directory for sectors.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one sector basis and report its size and connectivity.
    Basis {
        #[command(flatten)]
        sector: SectorArgs,
        /// Also write the sector Hamiltonian as hamiltonian.coo.
        #[arg(long)]
        dump_matrix: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity, transfer and entanglement time series.
    Evolve(EvolveArgs),
    /// Full-diagonalization artifacts: entropy scatter, overlap tower, FSA overlay, level statistics.
    ScarReport {
        #[command(flatten)]
        sector: SectorArgs,
        #[arg(long, default_value_t = DEFAULT_DENSE_CEILING)]
        dense_ceiling: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check the all-plus sector against the PXP model.
    PxpVerify {
        #[arg(long)]
        n: usize,
        /// Optional sector pattern; only the all-plus pattern is accepted.
        #[arg(long, allow_hyphen_values = true)]
        pattern: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DENSE_CEILING)]
        dense_ceiling: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward-scattering ladder from a root state.
    Fsa {
        #[command(flatten)]
        sector: SectorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the uniform and alternating bond forms on the full space.
    FormCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// How a sector is named on the command line.
#[derive(Args, Debug, Clone, Default)]
pub struct SectorArgs {
    /// Chain length; may be omitted when `--initial` spells out every site.
    #[arg(long)]
    pub n: Option<usize>,
    /// Repeating bond-parity unit such as `++-`.
    #[arg(long, allow_hyphen_values = true)]
    pub pattern: Option<String>,
    /// Product state over `xyz`; a shorter unit is repeated up to `--n`.
    #[arg(long)]
    pub initial: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub sector: SectorArgs,
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    pub tmax: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = DEFAULT_KRYLOV_DIM)]
    pub krylov_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from a seeded uniform draw from the sector basis.
    #[arg(long)]
    pub random_initial: bool,
    #[arg(long, value_enum, default_value_t = Method::Krylov)]
    pub method: Method,
    #[arg(long, default_value_t = DEFAULT_DENSE_CEILING)]
    pub dense_ceiling: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Krylov,
    Dense,
}

/// Validated settings of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub n_sites: usize,
    pub sector: SectorLabel,
    /// The named product state, if any.
    pub initial: Option<SpinConfig>,
    pub t_max: f64,
    pub dt: f64,
    pub krylov_dim: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Root used to grow the sector basis: the named state, else the
    /// lexicographically smallest member of the sector.
    pub fn root(&self) -> Result<SpinConfig> {
        match self.initial {
            Some(c) => Ok(c),
            None => sector_representative(self.sector),
        }
    }
}

/// Resolves `--n`, `--pattern` and `--initial` into a chain length, a sector
/// and the optional initial state, checking that they agree.
pub fn resolve_sector(args: &SectorArgs) -> Result<(usize, SectorLabel, Option<SpinConfig>)> {
    let initial = match &args.initial {
        None => None,
        Some(s) => {
            let len = s.chars().count();
            let config = match args.n {
                Some(n) if n != len => {
                    if len == 0 || n % len != 0 {
                        return input(format!("initial {s:?} of length {len} does not tile N = {n}"));
                    }
                    SpinConfig::repeat(s, n)?
                }
                _ => s.parse::<SpinConfig>()?,
            };
            Some(config)
        }
    };
    let n = match (args.n, initial) {
        (Some(n), _) => n,
        (None, Some(c)) => c.n_sites(),
        (None, None) => return input("give --n together with --pattern, or an --initial state"),
    };
    let label = match (&args.pattern, initial) {
        (Some(p), _) => SectorLabel::from_pattern(p, n)?,
        (None, Some(c)) => sector_label(c)?,
        (None, None) => return input("give --pattern or --initial to select a sector"),
    };
    if let Some(c) = initial {
        let own = sector_label(c)?;
        if own != label {
            return input(format!("initial {c} lies in sector {own}, not {label}"));
        }
    }
    Ok((n, label, initial))
}

impl EvolveArgs {
    pub fn run_config(&self) -> Result<RunConfig> {
        let (n_sites, sector, initial) = resolve_sector(&self.sector)?;
        if !self.random_initial && initial.is_none() {
            return input("evolve needs --initial or --random-initial");
        }
        Ok(RunConfig {
            n_sites,
            sector,
            initial,
            t_max: self.tmax,
            dt: self.dt,
            krylov_dim: self.krylov_dim,
            seed: self.seed,
            output_dir: self.out.clone(),
        })
    }
}

/// Parses `args` (program name first) and runs the command, sending
/// report text to `stdout`.
pub fn run_from<I, T>(args: I, stdout: &mut impl Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Input(e.to_string()))?;
    run(cli, stdout)
}

pub fn run(cli: Cli, stdout: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Sectors { n, out } => cmd_sectors(n, out.as_deref(), stdout),
        Command::Basis {
            sector,
            dump_matrix,
            out,
        } => cmd_basis(&sector, dump_matrix, out.as_deref(), stdout),
        Command::Evolve(args) => cmd_evolve(&args),
        Command::ScarReport {
            sector,
            dense_ceiling,
            out,
        } => cmd_scar_report(&sector, dense_ceiling, &out),
        Command::PxpVerify {
            n,
            pattern,
            dense_ceiling,
            out,
        } => cmd_pxp_verify(n, pattern.as_deref(), dense_ceiling, out.as_deref(), stdout),
        Command::Fsa { sector, out } => cmd_fsa(&sector, out.as_deref(), stdout),
        Command::FormCheck { n, out } => cmd_form_check(n, out.as_deref(), stdout),
    }
}

/// Sizes the global rayon pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Input(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    // A second call in the same process keeps the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Rounds to twelve significant digits so JSON floats match the CSV text.
fn g12(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt_g12(x).parse::<f64>().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

fn write_json_file(dir: &Path, name: &str, value: &Value) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn emit_json(value: &Value, out: Option<&Path>, name: &str, w: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    if let Some(dir) = out {
        write_json_file(dir, name, value)?;
    }
    Ok(())
}

fn csv_writer(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn cmd_sectors(n: usize, out: Option<&Path>, w: &mut impl Write) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "sector enumeration walks all 3^N states and is limited to N <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    let sectors = enumerate_sectors(n)?;
    let total: usize = sectors.values().sum();
    for (label, dim) in &sectors {
        writeln!(w, "{label} {dim}")?;
    }
    writeln!(w, "total {total}")?;
    if let Some(dir) = out {
        let rows: Vec<Value> = sectors
            .iter()
            .map(|(l, d)| json!({"label": l.to_string(), "dim": d}))
            .collect();
        write_json_file(
            dir,
            "sectors.json",
            &json!({"n_sites": n, "total": total, "sectors": rows}),
        )?;
    }
    Ok(())
}

fn cmd_basis(args: &SectorArgs, dump_matrix: bool, out: Option<&Path>, w: &mut impl Write) -> Result<()> {
    let (n, label, initial) = resolve_sector(args)?;
    let root = match initial {
        Some(c) => c,
        None => sector_representative(label)?,
    };
    let basis = build_sector_basis(root)?;
    let h = build_sector_hamiltonian(&basis)?;
    let split = split_hamiltonian(&basis, &root)?;
    let mut report = json!({
        "n_sites": n,
        "sector": label.to_string(),
        "root": root.to_string(),
        "dim": basis.len(),
        "nnz": 2 * h.stored_pairs(),
        "max_depth": split.depth.iter().max(),
    });
    if n <= ENUMERATION_LIMIT {
        let components = sector_components(label)?;
        report["sector_total"] = json!(components.iter().sum::<usize>());
        report["components"] = json!(components);
    }
    if dump_matrix {
        let dir = out.unwrap_or(Path::new("."));
        let mut f = csv_writer(dir, "hamiltonian.coo")?;
        h.write_coordinates(&mut f)?;
        f.flush()?;
    }
    emit_json(&report, out, "basis.json", w)
}

/// The basis state farthest from `initial` in graph distance, lowest index on ties.
fn farthest_state(basis: &SectorBasis, initial: &SpinConfig) -> Result<SpinConfig> {
    let depth = split_hamiltonian(basis, initial)?.depth;
    let far = depth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(basis.state(far))
}

#[derive(Serialize)]
struct EvolveSidecar {
    n_sites: usize,
    sector: String,
    initial: String,
    method: &'static str,
    krylov_dim: Option<usize>,
    seed: Option<u64>,
    t_max: f64,
    dt: f64,
    dim: usize,
    transfer_target: String,
    entropy_cut: [usize; 2],
}

pub fn cmd_evolve(args: &EvolveArgs) -> Result<()> {
    let cfg = args.run_config()?;
    let basis = build_sector_basis(cfg.root()?)?;
    let initial = if args.random_initial {
        random_basis_state(&basis, cfg.seed)
    } else {
        cfg.initial.expect("checked by run_config")
    };
    let times = time_grid(cfg.t_max, cfg.dt)?;
    let h = build_sector_hamiltonian(&basis)?;
    let evolver = match args.method {
        Method::Krylov => Evolver::krylov(&h, cfg.krylov_dim)?,
        Method::Dense => Evolver::dense(&h, args.dense_ceiling)?,
    };
    let target = farthest_state(&basis, &initial)?;
    let (i0, it) = (basis.require(&initial)?, basis.require(&target)?);
    let mut v0 = vec![Complex64::default(); basis.len()];
    v0[i0] = Complex64::new(1.0, 0.0);
    let cut_end = cfg.n_sites / 2;
    let cut = Bipartition::new(&basis, 0..cut_end)?;

    let (mut fid, mut tra, mut ent) = (Vec::new(), Vec::new(), Vec::new());
    evolver.observe(&v0, &times, |_, psi| {
        fid.push(psi[i0].norm_sqr());
        tra.push(psi[it].norm_sqr());
        ent.push(cut.entropy(psi)?);
        Ok(())
    })?;

    let fidelity = TimeSeries::new(times.clone(), fid)?;
    let revival = first_revival(&fidelity);
    for (name, series) in [
        ("fidelity.csv", fidelity),
        ("transfer.csv", TimeSeries::new(times.clone(), tra)?),
        ("entropy.csv", TimeSeries::new(times, ent)?),
    ] {
        let mut f = csv_writer(&cfg.output_dir, name)?;
        series.write_csv(&mut f)?;
        f.flush()?;
    }
    let sidecar = EvolveSidecar {
        n_sites: cfg.n_sites,
        sector: cfg.sector.to_string(),
        initial: initial.to_string(),
        method: evolver.method(),
        krylov_dim: (args.method == Method::Krylov).then_some(cfg.krylov_dim),
        seed: args.random_initial.then_some(cfg.seed),
        t_max: cfg.t_max,
        dt: cfg.dt,
        dim: basis.len(),
        transfer_target: target.to_string(),
        entropy_cut: [0, cut_end],
    };
    let mut value = serde_json::to_value(&sidecar)?;
    value["t_max"] = g12(cfg.t_max);
    value["dt"] = g12(cfg.dt);
    value["first_revival"] = match revival {
        Some(p) => json!({"t": g12(p.time), "fidelity": g12(p.value)}),
        None => Value::Null,
    };
    write_json_file(&cfg.output_dir, "evolve.json", &value)
}

pub fn cmd_scar_report(args: &SectorArgs, dense_ceiling: usize, out: &Path) -> Result<()> {
    let (n, label, initial) = resolve_sector(args)?;
    let root = match initial {
        Some(c) => c,
        None => sector_representative(label)?,
    };
    let basis = build_sector_basis(root)?;
    let h = build_sector_hamiltonian(&basis)?;
    let spectrum = full_diagonalize(&h, dense_ceiling)?;

    let mut notes = Vec::new();
    if n % 2 == 0 {
        let mut f = csv_writer(out, "ee_scatter.csv")?;
        writeln!(f, "E,S")?;
        for p in ee_scatter(&spectrum, &basis)? {
            writeln!(f, "{},{}", fmt_g12(p.key), fmt_g12(p.entropy))?;
        }
        f.flush()?;
    } else {
        notes.push(format!("ee_scatter.csv skipped: equipartition needs even N, got {n}"));
    }

    let tower = overlap_tower(&spectrum, &basis, &root)?;
    let mut f = csv_writer(out, "overlap.csv")?;
    writeln!(f, "E,log10_overlap")?;
    for (e, lo) in tower.energies.iter().zip(&tower.log_overlaps) {
        writeln!(f, "{},{}", fmt_g12(*e), fmt_g12(*lo))?;
    }
    f.flush()?;

    let ladder = build_ladder(&basis, &root)?;
    let matrix = fsa_matrix(&ladder);
    let overlay = fsa_overlay(&ladder, &matrix, &spectrum, &basis, &root)?;
    let mut f = csv_writer(out, "fsa_overlay.csv")?;
    writeln!(f, "E,log10_overlap,source")?;
    for (e, lo) in tower.energies.iter().zip(&tower.log_overlaps) {
        writeln!(f, "{},{},exact", fmt_g12(*e), fmt_g12(*lo))?;
    }
    for p in &overlay {
        writeln!(f, "{},{},fsa", fmt_g12(p.energy), fmt_g12(log_overlap(p.overlap)))?;
    }
    f.flush()?;

    let mut levels = json!({"n_sites": n, "sector": label.to_string(), "dim": basis.len()});
    for (key, resolve) in [("momentum_resolved", true), ("unresolved", false)] {
        levels[key] = match level_statistics(&h, &basis, Some(&spectrum), resolve, dense_ceiling) {
            Ok(s) => json!({"mean_r": g12(s.mean_r), "n_levels": s.n_levels, "n_blocks": s.n_blocks}),
            Err(Error::Input(msg)) => {
                notes.push(format!("{key}: {msg}"));
                Value::Null
            }
            Err(e) => return Err(e),
        };
    }
    levels["mean_r"] = levels["momentum_resolved"]["mean_r"].clone();
    write_json_file(out, "levels.json", &levels)?;

    let sidecar = json!({
        "n_sites": n,
        "sector": label.to_string(),
        "initial": root.to_string(),
        "method": "dense",
        "krylov_dim": null,
        "seed": null,
        "dim": basis.len(),
        "fsa_length": ladder.len(),
        "notes": notes,
    });
    write_json_file(out, "scar_report.json", &sidecar)
}

fn cmd_pxp_verify(
    n: usize,
    pattern: Option<&str>,
    dense_ceiling: usize,
    out: Option<&Path>,
    w: &mut impl Write,
) -> Result<()> {
    if let Some(p) = pattern {
        let label = SectorLabel::from_pattern(p, n)?;
        if !label.is_all_plus() {
            return input(format!("the PXP map covers only the all-plus sector, not {label}"));
        }
    }
    let report = verify_pxp_equivalence(n, dense_ceiling)?;
    let mut value = serde_json::to_value(&report)?;
    if let Some(d) = report.max_spectral_deviation {
        value["max_spectral_deviation"] = if d.is_finite() { json!(d) } else { json!("inf") };
    }
    emit_json(&value, out, "pxp_verify.json", w)?;
    if !report.holds(VERIFY_TOLERANCE) {
        return Err(Error::Verification(format!("PXP equivalence fails at N = {n}")));
    }
    Ok(())
}

fn cmd_fsa(args: &SectorArgs, out: Option<&Path>, w: &mut impl Write) -> Result<()> {
    let (n, label, initial) = resolve_sector(args)?;
    let root = match initial {
        Some(c) => c,
        None => sector_representative(label)?,
    };
    let basis = build_sector_basis(root)?;
    let split = split_hamiltonian(&basis, &root)?;
    let ladder = build_ladder(&basis, &root)?;
    let matrix = fsa_matrix(&ladder);
    let energies = matrix.eigen().energies;
    let report = json!({
        "n_sites": n,
        "sector": label.to_string(),
        "root": root.to_string(),
        "dim": basis.len(),
        "length": ladder.len(),
        "closed": ladder.closed,
        "endpoint": ladder.endpoint(&basis).map(|c| c.to_string()),
        "betas": ladder.betas.iter().map(|&b| g12(b)).collect::<Vec<_>>(),
        "energies": energies.iter().map(|&e| g12(e)).collect::<Vec<_>>(),
        "mean_spacing": g12(matrix.mean_spacing()),
        "orthonormality_error": ladder.orthonormality_error(),
        "depth_violations": split.bonds.iter().map(|b| b.depth_violations).sum::<usize>(),
    });
    emit_json(&report, out, "fsa.json", w)?;
    if !ladder.closed || ladder.len() != n + 1 {
        return Err(Error::Verification(format!(
            "ladder from {root} has {} vectors (closed: {}), expected N + 1 = {}",
            ladder.len(),
            ladder.closed,
            n + 1
        )));
    }
    Ok(())
}

fn cmd_form_check(n: usize, out: Option<&Path>, w: &mut impl Write) -> Result<()> {
    let report = verify_form_equivalence(n)?;
    emit_json(&serde_json::to_value(&report)?, out, "form_check.json", w)?;
    if !(report.max_deviation < VERIFY_TOLERANCE) {
        return Err(Error::Verification(format!(
            "form spectra differ by {} at N = {n}",
            report.max_deviation
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sector(n: Option<usize>, pattern: Option<&str>, initial: Option<&str>) -> SectorArgs {
        SectorArgs {
            n,
            pattern: pattern.map(String::from),
            initial: initial.map(String::from),
        }
    }

    #[test]
    fn resolves_repeated_units() {
        let (n, label, init) = resolve_sector(&sector(Some(12), None, Some("yxy"))).unwrap();
        assert_eq!(n, 12);
        assert_eq!(label.to_string(), "++-++-++-++-");
        assert_eq!(init.unwrap().to_string(), "yxyyxyyxyyxy");
        let (n, _, _) = resolve_sector(&sector(None, Some("++-"), Some("yxyyxy"))).unwrap();
        assert_eq!(n, 6);
    }

    #[test]
    fn rejects_inconsistent_requests() {
        assert!(resolve_sector(&sector(Some(5), Some("++-"), None)).is_err());
        assert!(resolve_sector(&sector(Some(6), Some("+"), Some("yxy"))).is_err());
        assert!(resolve_sector(&sector(Some(7), None, Some("yxy"))).is_err());
        assert!(resolve_sector(&sector(Some(6), None, None)).is_err());
        assert!(resolve_sector(&sector(None, Some("+"), None)).is_err());
    }

    #[test]
    fn pattern_alone_uses_smallest_member() {
        let args = sector(Some(6), Some("+"), None);
        let (_, label, init) = resolve_sector(&args).unwrap();
        assert!(init.is_none());
        let root = sector_representative(label).unwrap();
        assert_eq!(sector_label(root).unwrap(), label);
    }

    #[test]
    fn json_floats_are_rounded() {
        assert_eq!(g12(1.0 / 3.0), json!(0.333333333333));
        assert_eq!(g12(f64::NAN), Value::Null);
    }
}
