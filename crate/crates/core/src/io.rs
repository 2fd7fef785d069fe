//! Scenario configuration and the on-disk formats: diagnostics CSV, field
//! snapshots, and JSON summaries.
//!
//! Snapshot layout (little endian): magic `CFSF`, version `u32`, `n u32`,
//! `N u32`, then `N^(2n)` `f64` values in row-major axis order
//! `(x₁, y₁, x₂, y₂)`. Disc fields use `n = 1` with the disc node count as `N`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, DiagnosticsRecord, IntegratorConfig, Mode};
use crate::grid::{ScalarField, TorusGrid};
use crate::spectral::Torus;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CFSF";
pub const SNAPSHOT_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "t,Ca,Cam,V,S,dissip,lam,Lam,sup_phi,sup_ric,sup_F,tail,dt";

/// Normalization note written into every JSON output.
pub const VOLUME_CONVENTION: &str =
    "integrals use the density det(h) against Lebesgue measure on [0,2pi)^(2n); the 2^n n! factor of omega^n is absorbed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialPotential {
    Zero,
    Modes { modes: Vec<Mode> },
    /// `|φ̂(k)| ∝ |k|^{−decay}` with random phases, scaled to `sup|Δ_c φ| = amplitude`.
    RandomSpectrum { decay: f64, seed: u64, amplitude: f64 },
    Snapshot { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorConfig {
    /// Append the full compactness report of every record to `reports.jsonl`.
    pub compactness: bool,
    /// Lowest Lichnérowicz eigenvalue of the final state, into the summary.
    pub spectrum: bool,
    /// Futaki character of the final state, into the summary.
    pub futaki: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { compactness: false, spectrum: false, futaki: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiscPotential {
    Zero,
    /// `coefficient·|z|⁴`.
    Quartic { coefficient: f64 },
    Snapshot { path: PathBuf },
    /// Final state of the scenario's torus flow, read in the chart
    /// `z ↦ center + radius·z` and rescaled by `radius⁻²`.
    TorusChart { center: [f64; 2], radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscConfig {
    pub points: usize,
    #[serde(default = "default_true")]
    pub puncture: bool,
    #[serde(default)]
    pub rbar: f64,
    pub potential: DiscPotential,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayExpectation {
    pub rate: f64,
    pub rel_tol: f64,
    pub window: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Expectations {
    pub decay_rate: Option<DecayExpectation>,
    /// Bound on the dissipation identity defect.
    pub identity_defect: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridConfig,
    pub initial: InitialPotential,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub monitors: MonitorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of auxiliary randomness (eigen-solver start vector).
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub disc: Option<DiscConfig>,
    #[serde(default)]
    pub expect: Expectations,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Reads a scenario; relative paths inside are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InitialPotential::Snapshot { path } = &mut s.initial {
            fix(path);
        }
        if let Some(DiscConfig { potential: DiscPotential::Snapshot { path }, .. }) = &mut s.disc {
            fix(path);
        }
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        TorusGrid::new(self.grid.n, self.grid.points).map_err(|e| Error::Config(e.to_string()))?;
        self.integrator.validate()?;
        if let Some(d) = &self.disc {
            if d.points < 5 {
                return Err(Error::Config(format!("disc needs at least 5 points per axis, got {}", d.points)));
            }
            if let DiscPotential::TorusChart { radius, .. } = d.potential {
                if !(radius > 0.0) || self.grid.n != 1 {
                    return Err(Error::Config("torus chart needs radius > 0 and a grid with n = 1".into()));
                }
            }
        }
        Ok(())
    }

    pub fn torus(&self) -> Result<Torus> {
        Ok(Torus::new(TorusGrid::new(self.grid.n, self.grid.points).map_err(|e| Error::Config(e.to_string()))?))
    }

    /// Builds `φ₀` on the scenario's torus.
    pub fn initial_potential(&self, torus: &Torus) -> Result<ScalarField> {
        let grid = torus.grid();
        match &self.initial {
            InitialPotential::Zero => Ok(ScalarField::zeros(grid)),
            InitialPotential::Modes { modes } => flow::modes_potential(grid, modes),
            InitialPotential::RandomSpectrum { decay, seed, amplitude } => {
                flow::random_spectrum(torus, *decay, *seed, *amplitude)
            }
            InitialPotential::Snapshot { path } => read_field(path, grid),
        }
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn record_row(r: &DiagnosticsRecord) -> String {
    [
        r.t,
        r.ca,
        r.cam,
        r.volume,
        r.total_scalar,
        r.dissipation,
        r.lambda,
        r.big_lambda,
        r.sup_phi,
        r.sup_ric,
        r.sup_f,
        r.tail,
        r.dt,
    ]
    .iter()
    .map(|&v| fmt17(v))
    .collect::<Vec<_>>()
    .join(",")
}

pub fn write_csv<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", record_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    write_csv(BufWriter::new(fs::File::create(path)?), records)
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))??;
    if header.trim() != CSV_HEADER {
        return Err(Error::Format(format!("unexpected CSV header: {header}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
        if v.len() != 13 {
            return Err(Error::Format(format!("row {} has {} columns, expected 13", i + 1, v.len())));
        }
        out.push(DiagnosticsRecord {
            t: v[0],
            ca: v[1],
            cam: v[2],
            volume: v[3],
            total_scalar: v[4],
            dissipation: v[5],
            lambda: v[6],
            big_lambda: v[7],
            sup_phi: v[8],
            sup_ric: v[9],
            sup_f: v[10],
            tail: v[11],
            dt: v[12],
        });
    }
    Ok(out)
}

pub fn read_csv_file(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    read_csv(fs::File::open(path)?)
}

/// Raw snapshot contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: u32,
    pub points: u32,
    pub values: Vec<f64>,
}

pub fn write_snapshot<W: Write>(mut w: W, n: u32, points: u32, values: &[f64]) -> Result<()> {
    let expected = (points as usize).pow(2 * n);
    if values.len() != expected {
        return Err(Error::Format(format!("{} values for n = {n}, N = {points} (expected {expected})", values.len())));
    }
    w.write_all(SNAPSHOT_MAGIC)?;
    w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    w.write_all(&n.to_le_bytes())?;
    w.write_all(&points.to_le_bytes())?;
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| Error::Format("truncated snapshot header".into()))?;
    if &head[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad snapshot magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes"));
    let (version, n, points) = (word(4), word(8), word(12));
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    if !(n == 1 || n == 2) || points == 0 {
        return Err(Error::Format(format!("bad snapshot shape n = {n}, N = {points}")));
    }
    let count = (points as usize).pow(2 * n);
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(Error::Format(format!("snapshot body has {} bytes, expected {}", bytes.len(), 8 * count)));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(Snapshot { n, points, values })
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    let g = f.grid();
    write_snapshot(BufWriter::new(fs::File::create(path)?), g.n() as u32, g.points_per_axis() as u32, f.values())
}

/// Reads a snapshot and checks it against the expected grid.
pub fn read_field(path: &Path, grid: TorusGrid) -> Result<ScalarField> {
    let file = fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let s = read_snapshot(BufReader::new(file))?;
    if s.n as usize != grid.n() || s.points as usize != grid.points_per_axis() {
        return Err(Error::Format(format!(
            "snapshot is n = {}, N = {}; scenario grid is n = {}, N = {}",
            s.n,
            s.points,
            grid.n(),
            grid.points_per_axis()
        )));
    }
    ScalarField::new(grid, s.values)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
