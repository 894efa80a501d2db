//! `nmd` command-line front end: classify, witness and export runs over a
//! built-in scenario or a user-supplied rate table.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nmd_core::channels::{channel_at, phi_decomposition};
use nmd_core::divisibility::{certify, classify, DivisibilityReport};
use nmd_core::io::{self, complex_header, fmt_f64, real_header, to_json_string, write_table};
use nmd_core::rates::{
    cumulative, probs_from_lambdas, spectrum_from_cumulative, ProbabilityProfile, RateProfile,
    Spectrum, TimeGrid, SINGULARITY_FLOOR,
};
use nmd_core::scenarios::{self, Scenario};
use nmd_core::witnesses::{
    k_positivity_falsifier, random_states, volume_measure, witness_trace, FalsifierWitness,
    Violation, VolumeMeasure,
};
use nmd_core::{NmdError, Result, WeylBasis};

#[derive(Debug, Parser)]
#[command(name = "nmd", version, about = "Non-Markovianity degree of random unitary qudit evolutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify divisibility over the grid; writes report.json and profiles.csv.
    Classify(RunArgs),
    /// Trace-distance, entropy and volume witnesses plus a k-positivity search; writes witness.csv and witness.json.
    Witness(RunArgs),
    /// Plot-ready lambda, p, gamma and V series and process matrices at chosen times.
    Export(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    Uniform,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["scenario", "rates"]))]
pub struct RunArgs {
    /// Built-in scenario: pauli-tanh, qutrit-e3 or unitary.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Rate constant of the scenario.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub c: f64,
    /// Rate table CSV with header `t,gamma_1,...,gamma_{d^2-1}`.
    #[arg(long, value_name = "PATH")]
    pub rates: Option<PathBuf>,
    /// Dimension; checked against the rate table, selects d for `unitary`.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 5.0, conflicts_with = "rates", allow_negative_numbers = true)]
    pub t_max: f64,
    /// Number of grid intervals (the grid has steps + 1 points).
    #[arg(long, default_value_t = 500, conflicts_with = "rates")]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = GridKind::Uniform, conflicts_with = "rates")]
    pub grid: GridKind,
    /// Random state pairs (trace distance) and single states (entropy).
    #[arg(long, default_value_t = 100)]
    pub pairs: usize,
    /// Random starts per k for the k-positivity search.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Grid times at which the k-positivity search runs (evenly spread, t = 0 excluded).
    #[arg(long, default_value_t = 5)]
    pub search_times: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json")]
    pub format: Vec<Format>,
    /// Export times for process matrices (nearest grid point); default 0 and t_max.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub at: Vec<f64>,
}

/// Where the rates come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Scenario(Scenario),
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub t_max: f64,
    pub steps: usize,
    pub kind: GridKind,
}

impl GridSpec {
    pub fn build(&self) -> Result<TimeGrid> {
        match self.kind {
            GridKind::Uniform => TimeGrid::uniform(self.t_max, self.steps + 1),
            GridKind::Log => TimeGrid::log_spaced(self.t_max, self.steps + 1),
        }
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub d: Option<usize>,
    pub source: Source,
    /// Ignored for rate tables, whose first column is the grid.
    pub grid: GridSpec,
    pub pairs: usize,
    pub trials: usize,
    pub search_times: usize,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub at: Vec<f64>,
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let source = match (&a.scenario, &a.rates) {
            (Some(name), None) => {
                let s = scenarios::by_name(name, a.c, a.d)?;
                if let Some(d) = a.d {
                    if d != s.dim() {
                        return Err(NmdError::WrongDimension {
                            required: d,
                            found: s.dim(),
                        });
                    }
                }
                Source::Scenario(s)
            }
            (None, Some(path)) => Source::Table(path.clone()),
            _ => {
                return Err(NmdError::InvalidParameter(
                    "exactly one of --scenario and --rates is required".into(),
                ))
            }
        };
        if !(a.t_max > 0.0) || !a.t_max.is_finite() {
            return Err(NmdError::InvalidParameter(format!("--t-max must be positive, got {}", a.t_max)));
        }
        if a.steps < 2 {
            return Err(NmdError::InvalidParameter(format!("--steps must be at least 2, got {}", a.steps)));
        }
        if a.format.is_empty() {
            return Err(NmdError::InvalidParameter("--format needs csv and/or json".into()));
        }
        Ok(Self {
            d: a.d,
            source,
            grid: GridSpec {
                t_max: a.t_max,
                steps: a.steps,
                kind: a.grid,
            },
            pairs: a.pairs,
            trials: a.trials,
            search_times: a.search_times,
            seed: a.seed,
            out: a.out.clone(),
            csv: a.format.contains(&Format::Csv),
            json: a.format.contains(&Format::Json),
            at: a.at.clone(),
        })
    }

    /// Plain config for a built-in scenario, outputs in both formats.
    pub fn scenario(s: Scenario, t_max: f64, steps: usize, out: impl Into<PathBuf>) -> Self {
        Self {
            d: None,
            source: Source::Scenario(s),
            grid: GridSpec {
                t_max,
                steps,
                kind: GridKind::Uniform,
            },
            pairs: 100,
            trials: 200,
            search_times: 5,
            seed: Some(42),
            out: out.into(),
            csv: true,
            json: true,
            at: Vec::new(),
        }
    }

    fn describe(&self) -> SourceDescription {
        match &self.source {
            Source::Scenario(s) => SourceDescription {
                scenario: Some(s.clone()),
                rates: None,
                grid: Some(self.grid.clone()),
            },
            Source::Table(p) => SourceDescription {
                scenario: None,
                rates: Some(p.display().to_string()),
                grid: None,
            },
        }
    }

    fn randomized(&self) -> bool {
        self.pairs > 0 || (self.trials > 0 && self.search_times > 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceDescription {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

/// All three descriptions of the evolution on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profiles {
    pub rates: RateProfile,
    pub spectrum: Spectrum,
    pub probabilities: ProbabilityProfile,
}

/// Sample a scenario (Gauss-Legendre integrated rates) or read a rate table
/// (trapezoid), then go rates -> Gamma -> lambda -> p.
pub fn load_profiles(cfg: &RunConfig) -> Result<Profiles> {
    let (rates, gamma) = match &cfg.source {
        Source::Scenario(s) => {
            let grid = cfg.grid.build()?;
            (s.rate_profile(&grid)?, s.cumulative_quadrature(&grid)?)
        }
        Source::Table(path) => {
            let file = File::open(path)
                .map_err(|e| NmdError::Io(format!("cannot read rate table {}: {e}", path.display())))?;
            let r = io::read_rates_csv(BufReader::new(file), cfg.d)?;
            let g = cumulative(&r);
            (r, g)
        }
    };
    let spectrum = spectrum_from_cumulative(&gamma)?;
    let probabilities = probs_from_lambdas(&spectrum)?;
    Ok(Profiles {
        rates,
        spectrum,
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyOutput {
    pub source: SourceDescription,
    #[serde(flatten)]
    pub report: DivisibilityReport,
}

pub fn run_classify(cfg: &RunConfig) -> Result<(ClassifyOutput, Profiles)> {
    let profiles = load_profiles(cfg)?;
    let report = classify(&profiles.rates)?;
    Ok((
        ClassifyOutput {
            source: cfg.describe(),
            report,
        },
        profiles,
    ))
}

/// Writes `report.json` and `profiles.csv` (each subject to `--format`).
pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassifyOutput> {
    let (out, profiles) = run_classify(cfg)?;
    prepare_dir(&cfg.out)?;
    if cfg.json {
        write_text(&cfg.out.join("report.json"), &to_json_string(&out)?)?;
    }
    if cfg.csv {
        write_profiles_csv(&cfg.out.join("profiles.csv"), &profiles)?;
    }
    Ok(out)
}

/// `t`, `gamma_k`, `lambda_a` (re/im) and `p_a` side by side.
pub fn write_profiles_csv(path: &Path, p: &Profiles) -> Result<()> {
    let d = p.rates.dim();
    let mut header = vec!["t".to_string()];
    header.extend(real_header("gamma", 1..d * d));
    header.extend(complex_header("lambda", 0..d * d));
    header.extend(real_header("p", 0..d * d));
    let rows: Vec<Vec<f64>> = p
        .rates
        .grid()
        .points()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut row = vec![t];
            row.extend_from_slice(p.rates.row(i));
            row.extend(p.spectrum.row(i).iter().flat_map(|z| [z.re, z.im]));
            row.extend_from_slice(p.probabilities.row(i));
            row
        })
        .collect();
    write_table(create(path)?, &header, &rows)
}

/// Outcome of the k-positivity search for the auxiliary map at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchFinding {
    pub time: f64,
    pub k_certified: usize,
    /// Smallest k at which a violating Schmidt-rank-k vector was found.
    pub falsified_at: Option<usize>,
    pub witness: Option<FalsifierWitness>,
    /// A violation at a certified level; never expected.
    pub conflict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessOutput {
    pub source: SourceDescription,
    pub seed: u64,
    pub pairs: usize,
    pub states: usize,
    pub trials: usize,
    pub max_blp_derivative: f64,
    pub min_entropy_derivative: f64,
    pub geometric_measure: f64,
    pub violations: Vec<Violation>,
    pub blp_derivatives: Vec<Vec<f64>>,
    pub entropies: Vec<Vec<f64>>,
    pub volume: VolumeMeasure,
    pub search: Vec<SearchFinding>,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub distances: Vec<Vec<f64>>,
}

fn check_singularities(s: &Spectrum) -> Result<()> {
    for (i, row) in s.values().iter().enumerate() {
        if let Some((a, z)) = row.iter().enumerate().find(|(_, z)| z.norm() < SINGULARITY_FLOOR) {
            return Err(NmdError::SpectrumSingularity {
                time: s.grid().points()[i],
                index: a,
                modulus: z.norm(),
            });
        }
    }
    Ok(())
}

/// Evenly spread grid indices, excluding `t = 0`.
fn search_indices(n_points: usize, count: usize) -> Vec<usize> {
    if count == 0 || n_points < 2 {
        return Vec::new();
    }
    let last = n_points - 1;
    let mut idx: Vec<usize> = (1..=count)
        .map(|j| ((j * last) as f64 / count as f64).round() as usize)
        .filter(|&i| i >= 1)
        .collect();
    idx.dedup();
    idx
}

pub fn run_witness(cfg: &RunConfig) -> Result<WitnessOutput> {
    let seed = match cfg.seed {
        Some(s) => s,
        None if cfg.randomized() => {
            return Err(NmdError::InvalidParameter(
                "--seed is required for randomized witnesses (use --pairs 0 --trials 0 to disable them)".into(),
            ))
        }
        None => 0,
    };
    let profiles = load_profiles(cfg)?;
    let s = &profiles.spectrum;
    check_singularities(s)?;
    let d = s.dim();
    let basis = WeylBasis::new(d)?;
    let (pairs, states) = random_states(d, cfg.pairs, cfg.pairs, seed);
    let trace = witness_trace(&basis, s, &pairs, &states)?;

    let mut search = Vec::new();
    if cfg.trials > 0 {
        let times = profiles.rates.grid().points();
        for i in search_indices(times.len(), cfg.search_times) {
            let gammas = profiles.rates.row(i);
            let cert = certify(d, times[i], gammas)?;
            let phi = phi_decomposition(d, gammas)?.as_map();
            let mut found = None;
            for k in 1..=d {
                let seed_k = seed ^ ((i as u64) << 16) ^ (k as u64);
                if let Some(w) = k_positivity_falsifier(&basis, &phi, k, cfg.trials, seed_k)? {
                    found = Some(w);
                    break;
                }
            }
            let falsified_at = found.as_ref().map(|w| w.k);
            search.push(SearchFinding {
                time: times[i],
                k_certified: cert.k_certified,
                falsified_at,
                conflict: falsified_at.is_some_and(|k| k <= cert.k_certified),
                witness: found,
            });
        }
    }

    Ok(WitnessOutput {
        source: cfg.describe(),
        seed,
        pairs: pairs.len(),
        states: states.len(),
        trials: cfg.trials,
        max_blp_derivative: trace.max_blp_derivative(),
        min_entropy_derivative: trace.min_entropy_derivative(),
        geometric_measure: trace.volume.value,
        violations: trace.violations,
        blp_derivatives: trace.blp_derivatives,
        entropies: trace.entropies,
        volume: trace.volume,
        search,
        times: trace.times,
        distances: trace.distances,
    })
}

/// Writes `witness.csv` (t, distances, entropies, V) and `witness.json`.
pub fn cmd_witness(cfg: &RunConfig) -> Result<WitnessOutput> {
    let out = run_witness(cfg)?;
    prepare_dir(&cfg.out)?;
    if cfg.json {
        write_text(&cfg.out.join("witness.json"), &to_json_string(&out)?)?;
    }
    if cfg.csv {
        let mut header = vec!["t".to_string()];
        header.extend(real_header("distance", 0..out.distances.len()));
        header.extend(real_header("entropy", 0..out.entropies.len()));
        header.push("V".into());
        let rows: Vec<Vec<f64>> = out
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut row = vec![t];
                row.extend(out.distances.iter().map(|s| s[i]));
                row.extend(out.entropies.iter().map(|s| s[i]));
                row.push(out.volume.volume[i]);
                row
            })
            .collect();
        write_table(create(&cfg.out.join("witness.csv"))?, &header, &rows)?;
    }
    Ok(out)
}

/// One exported channel `Lambda_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelExport {
    pub requested: f64,
    pub time: f64,
    pub grid_index: usize,
    pub coefficients: Vec<f64>,
    /// Rows of `[re, im]`; column `a` holds the Weyl coordinates of `Lambda_t(U_a)`.
    pub process_matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportOutput {
    pub source: SourceDescription,
    pub channels: Vec<ChannelExport>,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

/// Writes `lambda.csv`, `probabilities.csv`, `rates.csv`, `volume.csv` and
/// `process_<i>.csv` per export time; with json also `rates.json`,
/// `spectrum.json`, `probabilities.json` and `channels.json`.
pub fn cmd_export(cfg: &RunConfig) -> Result<ExportOutput> {
    let profiles = load_profiles(cfg)?;
    let d = profiles.rates.dim();
    let basis = WeylBasis::new(d)?;
    let grid = profiles.rates.grid();
    let at = if cfg.at.is_empty() {
        vec![0.0, grid.t_max()]
    } else {
        cfg.at.clone()
    };
    let mut channels = Vec::new();
    for &t in &at {
        if !t.is_finite() || t < 0.0 || t > grid.t_max() {
            return Err(NmdError::InvalidParameter(format!(
                "--at time {t} is outside the grid [0, {}]",
                grid.t_max()
            )));
        }
        let i = grid.nearest(t);
        let map = channel_at(&profiles.spectrum, i)?;
        channels.push((
            map.process_matrix(&basis)?,
            ChannelExport {
                requested: t,
                time: grid.points()[i],
                grid_index: i,
                coefficients: map.coefficients().to_vec(),
                process_matrix: Vec::new(),
            },
        ));
    }

    prepare_dir(&cfg.out)?;
    let mut files = Vec::new();
    let mut record = |p: PathBuf| -> PathBuf {
        files.push(p.clone());
        p
    };
    if cfg.csv {
        io::write_spectrum_csv(create(&record(cfg.out.join("lambda.csv")))?, &profiles.spectrum)?;
        io::write_probs_csv(create(&record(cfg.out.join("probabilities.csv")))?, &profiles.probabilities)?;
        io::write_rates_csv(create(&record(cfg.out.join("rates.csv")))?, &profiles.rates)?;
        let vol = volume_measure(&profiles.spectrum);
        let rows: Vec<Vec<f64>> = grid.points().iter().zip(&vol.volume).map(|(&t, &v)| vec![t, v]).collect();
        write_table(create(&record(cfg.out.join("volume.csv")))?, &["t".into(), "V".into()], &rows)?;
        for (j, (pm, _)) in channels.iter().enumerate() {
            io::write_complex_matrix_csv(create(&record(cfg.out.join(format!("process_{j}.csv"))))?, pm)?;
        }
    }
    let channels: Vec<ChannelExport> = channels
        .into_iter()
        .map(|(pm, mut c)| {
            c.process_matrix = io::complex_matrix_rows(&pm);
            c
        })
        .collect();
    let out = ExportOutput {
        source: cfg.describe(),
        channels,
        files: Vec::new(),
    };
    if cfg.json {
        write_text(&record(cfg.out.join("rates.json")), &to_json_string(&profiles.rates)?)?;
        write_text(&record(cfg.out.join("spectrum.json")), &to_json_string(&profiles.spectrum)?)?;
        write_text(&record(cfg.out.join("probabilities.json")), &to_json_string(&profiles.probabilities)?)?;
        write_text(&record(cfg.out.join("channels.json")), &to_json_string(&out)?)?;
    }
    Ok(ExportOutput { files, ..out })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| NmdError::Io(format!("cannot create output directory {}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| NmdError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| NmdError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Exit status: 0 success, 2 input error, 3 numeric/model error.
pub fn exit_code(e: &NmdError) -> i32 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

/// Parse-free entry point used by `main`: returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Classify(a) => RunConfig::from_args(a).and_then(|c| cmd_classify(&c)).map(|o| {
            println!("{}", o.report.summary);
            println!(
                "NMD in [{}, {}]; report in {}",
                o.report.bracket.nmd_lower,
                o.report.bracket.nmd_upper,
                a.out.display()
            );
        }),
        Command::Witness(a) => RunConfig::from_args(a).and_then(|c| cmd_witness(&c)).map(|o| {
            println!(
                "max dD/dt = {}, min dS/dt = {}, N = {}, {} violations",
                fmt_f64(o.max_blp_derivative),
                fmt_f64(o.min_entropy_derivative),
                fmt_f64(o.geometric_measure),
                o.violations.len()
            );
        }),
        Command::Export(a) => RunConfig::from_args(a).and_then(|c| cmd_export(&c)).map(|o| {
            println!("wrote {} files to {}", o.files.len(), a.out.display());
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
