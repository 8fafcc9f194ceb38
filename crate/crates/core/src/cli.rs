//! Command line front end: manifests, reports and rendered tables.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails (a membership
//! witness or a verdict that disagrees with the case table), 2 for
//! configuration and operational errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curvature::{MetricGPsi, FD_STEP};
use crate::error::Error;
use crate::grassmann::{admissible_pairs, SampleConfig, TypePair};
use crate::polynomial::{Polynomial, Term};
use crate::product::{CaseRule, ExpectedVerdict};
use crate::pseudo_linalg::{Signature, Tolerances};
use crate::psi_fields::{
    combine, psi_from_potential, psi_membership_scan, semi_norm, GridRegion, Membership, PsiField,
};
use crate::verify::{
    duality_crosscheck, expected_verdicts, jordan_scan_points, DualityReport, ScanConfig, ScanVerdict,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const SEED_ENV: &str = "OSSERMAN_LAB_SEED";
const MAX_COMBINATION_DEPTH: usize = 16;

#[derive(Debug, Parser)]
#[command(
    name = "osserman-lab",
    version,
    about = "Rank and Jordan-form scans of higher order Jacobi operators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan the grid for directions whose Jacobi form is not PSD of rank p-1.
    CheckPsi(RunFlags),
    /// Run a verification suite and compare against the case tables.
    Verify {
        #[arg(long, value_enum)]
        theorem: Theorem,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Render one or more JSON reports as a text table; `--out` writes CSV.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Overrides both the manifest seed and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol_rank: Option<f64>,
    #[arg(long)]
    pub tol_nilpotent: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Run scans without first certifying membership on the grid.
    #[arg(long)]
    pub waive_membership: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Case table of the bare metric.
    Thm16,
    /// Case table of the product with the manifest's flat factor.
    Thm17,
    /// Dual pairs must agree.
    Duality,
    /// Closed-form curvature against finite differences.
    CurvatureOracle,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("report schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    /// Random frames per pair and base point.
    pub count: usize,
    pub max_rejects: usize,
    /// Relative threshold below which a candidate direction counts as null.
    pub null_tol: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let d = SampleConfig::default();
        Self {
            count: d.count,
            max_rejects: d.max_rejects,
            null_tol: d.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembershipSection {
    pub directions: usize,
    /// Absolute eigenvalue tolerance.
    pub tol: f64,
}

impl Default for MembershipSection {
    fn default() -> Self {
        Self {
            directions: 16,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProductSection {
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub step: f64,
    /// Bound on the relative error of the closed form.
    pub threshold: f64,
    /// Bound on closed-form entries outside the X-block.
    pub outside_closed: f64,
    /// Bound on finite-difference entries outside the X-block.
    pub outside_fd: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            step: FD_STEP,
            threshold: 1e-6,
            outside_closed: 1e-10,
            outside_fd: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSelection {
    /// Only `"all-admissible"` is accepted.
    Named(String),
    /// `[timelike, spacelike]` entries.
    List(Vec<[usize; 2]>),
}

impl Default for PairSelection {
    fn default() -> Self {
        PairSelection::Named("all-admissible".into())
    }
}

impl PairSelection {
    fn resolve(&self, ambient: Signature) -> Result<Vec<TypePair>, CliError> {
        match self {
            PairSelection::Named(name) if name == "all-admissible" => Ok(admissible_pairs(ambient)),
            PairSelection::Named(name) => Err(CliError::Config(format!(
                "pairs must be \"all-admissible\" or a list, got {name:?}"
            ))),
            PairSelection::List(list) => {
                let mut out = list
                    .iter()
                    .map(|&[r, s]| TypePair::new(r, s, ambient).map_err(CliError::from))
                    .collect::<Result<Vec<_>, _>>()?;
                out.sort();
                out.dedup();
                Ok(out)
            }
        }
    }
}

/// A run description. Relative paths are resolved against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub psi: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Points given either by `x` alone or by full coordinates.
    #[serde(default)]
    pub base_points: Vec<Vec<f64>>,
    pub grid: Option<GridRegion>,
    #[serde(default)]
    pub pairs: PairSelection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub membership: MembershipSection,
    #[serde(default)]
    pub product: ProductSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub oracle: OracleSection,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitEntry {
    /// 1-based row.
    i: usize,
    /// 1-based column.
    j: usize,
    terms: Vec<Term>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightedRef {
    weight: f64,
    file: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PsiSpec {
    /// `psi_ij = d_i f d_j f` for the potential `f`.
    Potential { dim: usize, terms: Vec<Term> },
    /// Upper-triangular components.
    Explicit { dim: usize, entries: Vec<ExplicitEntry> },
    /// Positive combination of other files.
    Combination { parts: Vec<WeightedRef> },
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn relative_to(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(path)
    }
}

/// Load a `psi` description file.
pub fn load_psi(path: &Path) -> Result<PsiField, CliError> {
    load_psi_at_depth(path, 0)
}

fn load_psi_at_depth(path: &Path, depth: usize) -> Result<PsiField, CliError> {
    if depth > MAX_COMBINATION_DEPTH {
        return Err(CliError::Config(format!(
            "{}: combinations nested deeper than {MAX_COMBINATION_DEPTH}",
            path.display()
        )));
    }
    let spec: PsiSpec = parse_toml(path, &read(path)?)?;
    let psi = match spec {
        PsiSpec::Potential { dim, terms } => psi_from_potential(&Polynomial::from_terms(dim, terms)?)?,
        PsiSpec::Explicit { dim, entries } => {
            let mut upper = Vec::with_capacity(entries.len());
            for e in entries {
                if e.i == 0 || e.j == 0 {
                    return Err(CliError::Config(format!("{}: indices are 1-based", path.display())));
                }
                upper.push((e.i - 1, e.j - 1, Polynomial::from_terms(dim, e.terms)?));
            }
            PsiField::from_upper(dim, upper)?
        }
        PsiSpec::Combination { parts } => {
            let loaded = parts
                .iter()
                .map(|part| {
                    Ok((
                        part.weight,
                        load_psi_at_depth(&relative_to(path, &part.file), depth + 1)?,
                    ))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let refs: Vec<(f64, &PsiField)> = loaded.iter().map(|(w, p)| (*w, p)).collect();
            combine(&refs)?
        }
    };
    Ok(psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Environment,
    Manifest,
}

/// Flag, then environment, then manifest.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, manifest: u64) -> Result<(u64, SeedSource), CliError> {
    if let Some(seed) = flag {
        return Ok((seed, SeedSource::Flag));
    }
    if let Some(text) = env {
        let seed = text
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={text:?} is not an unsigned integer")))?;
        return Ok((seed, SeedSource::Environment));
    }
    Ok((manifest, SeedSource::Manifest))
}

/// Everything needed to run a command, with overrides applied.
#[derive(Debug, Clone)]
pub struct Run {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub manifest_sha256: String,
    pub psi: PsiField,
    pub psi_sha256: String,
    pub seed: u64,
    pub seed_source: SeedSource,
}

impl Run {
    pub fn load(flags: &RunFlags, env_seed: Option<&str>) -> Result<Self, CliError> {
        let text = read(&flags.manifest)?;
        let mut manifest: RunManifest = parse_toml(&flags.manifest, &text)?;
        if let Some(n) = flags.samples {
            manifest.sampling.count = n;
        }
        if let Some(t) = flags.tol_rank {
            manifest.tolerances.rank = t;
        }
        if let Some(t) = flags.tol_nilpotent {
            manifest.tolerances.nilpotent = t;
        }
        for t in [
            manifest.tolerances.rank,
            manifest.tolerances.nilpotent,
            manifest.tolerances.ortho,
        ] {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tolerance {t} must be positive")));
            }
        }
        let psi_path = relative_to(&flags.manifest, &manifest.psi);
        let psi_bytes = fs::read(&psi_path).map_err(|source| CliError::Io {
            path: psi_path.clone(),
            source,
        })?;
        let psi = load_psi(&psi_path)?;
        if psi.dim() < 2 {
            return Err(CliError::Config(format!(
                "psi has dimension {}, need at least 2",
                psi.dim()
            )));
        }
        if let Some(grid) = &manifest.grid {
            let grid = GridRegion::new(grid.lower.clone(), grid.upper.clone(), grid.resolution)?;
            if grid.dim() != psi.dim() {
                return Err(CliError::Config(format!(
                    "grid has dimension {}, psi has dimension {}",
                    grid.dim(),
                    psi.dim()
                )));
            }
        }
        let (seed, seed_source) = resolve_seed(flags.seed, env_seed, manifest.seed)?;
        Ok(Self {
            manifest_sha256: sha256_hex(text.as_bytes()),
            psi_sha256: sha256_hex(&psi_bytes),
            manifest,
            manifest_path: flags.manifest.clone(),
            psi,
            seed,
            seed_source,
        })
    }

    fn base_points(&self) -> Vec<Vec<f64>> {
        if self.manifest.base_points.is_empty() {
            vec![vec![0.0; self.psi.dim()]]
        } else {
            self.manifest.base_points.clone()
        }
    }

    fn grid(&self) -> Result<&GridRegion, CliError> {
        self.manifest
            .grid
            .as_ref()
            .ok_or_else(|| CliError::Config("a [grid] section is required for membership scans".into()))
    }

    fn membership(&self) -> Result<Membership, CliError> {
        let m = &self.manifest.membership;
        Ok(psi_membership_scan(
            &self.psi,
            self.grid()?,
            m.directions,
            m.tol,
            self.seed,
        )?)
    }

    fn header(&self, command: &str, flat: Signature) -> ReportHeader {
        ReportHeader {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            manifest_sha256: self.manifest_sha256.clone(),
            psi_sha256: self.psi_sha256.clone(),
            seed: self.seed,
            seed_source: self.seed_source,
            tolerances: self.manifest.tolerances,
            sampling: self.manifest.sampling,
            p: self.psi.dim(),
            u: flat.neg,
            v: flat.pos,
        }
    }

    fn scan_config(&self, certified: bool) -> ScanConfig {
        let s = &self.manifest.sampling;
        ScanConfig {
            sample: SampleConfig {
                count: s.count,
                seed: self.seed,
                max_rejects: s.max_rejects,
                tol: s.null_tol,
            },
            tol: self.manifest.tolerances,
            inject: true,
            certified,
        }
    }

    fn output_path(&self, flags: &RunFlags) -> Option<PathBuf> {
        flags.out.clone().or_else(|| {
            self.manifest
                .output
                .as_ref()
                .map(|p| relative_to(&self.manifest_path, p))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub manifest_sha256: String,
    pub psi_sha256: String,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub tolerances: Tolerances,
    pub sampling: SamplingSection,
    pub p: usize,
    pub u: usize,
    pub v: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub expected: ExpectedVerdict,
    pub verdict: ScanVerdict,
    pub matches: bool,
    /// False for table entries extrapolated beyond the stated cases; their
    /// outcome is reported but does not decide the exit code.
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub point: Vec<f64>,
    pub relative_error: f64,
    pub outside_closed: f64,
    pub outside_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportBody {
    CheckPsi {
        grid: GridRegion,
        grid_points: usize,
        semi_norm: f64,
        membership: Membership,
    },
    Scan {
        theorem: Theorem,
        certified: bool,
        membership: Option<Membership>,
        pairs: Vec<PairResult>,
        mismatches: usize,
        duality: Option<DualityReport>,
    },
    CurvatureOracle {
        oracle: OracleSection,
        points: Vec<OraclePoint>,
        max_relative_error: f64,
        max_outside_closed: f64,
        max_outside_fd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: ReportHeader,
    pub passed: bool,
    pub body: ReportBody,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Result of a command before it is written out.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub exit: u8,
}

pub fn cmd_check_psi(run: &Run) -> Result<Outcome, CliError> {
    let grid = run.grid()?.clone();
    let membership = run.membership()?;
    let passed = membership.is_member();
    let report = Report {
        header: run.header("check-psi", Signature::new(0, 0)),
        passed,
        body: ReportBody::CheckPsi {
            grid_points: grid.len(),
            semi_norm: semi_norm(&run.psi, &grid)?,
            grid,
            membership,
        },
    };
    Ok(Outcome {
        report,
        exit: if passed { 0 } else { 1 },
    })
}

fn is_extrapolated(e: &ExpectedVerdict) -> bool {
    e.rule == CaseRule::SpacelikeAbsorbedByFlat
}

pub fn cmd_verify(run: &Run, theorem: Theorem, waive_membership: bool) -> Result<Outcome, CliError> {
    if theorem == Theorem::CurvatureOracle {
        return curvature_oracle(run);
    }
    let flat = match theorem {
        Theorem::Thm16 => Signature::new(0, 0),
        _ => Signature::new(run.manifest.product.u, run.manifest.product.v),
    };
    let metric = MetricGPsi::with_flat_factor(run.psi.clone(), flat);
    let membership = if waive_membership {
        None
    } else {
        Some(run.membership()?)
    };
    if let Some(m) = &membership {
        if !m.is_member() {
            return Err(CliError::Config(
                "psi failed the membership scan; fix psi or pass --waive-membership".into(),
            ));
        }
    }
    let certified = membership.is_some();
    let cfg = run.scan_config(certified);
    let points = run.base_points();
    let pairs = run.manifest.pairs.resolve(metric.signature())?;
    let table: BTreeMap<TypePair, ExpectedVerdict> = expected_verdicts(metric.p(), flat.neg, flat.pos)?
        .into_iter()
        .map(|e| (e.pair, e))
        .collect();
    let mut results = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let verdict = jordan_scan_points(&metric, &points, pair, &cfg)?;
        let expected = table[pair];
        let matches = verdict.jordan_constant == expected.expected_jordan
            && verdict.ranks_outside_trichotomy == 0
            && verdict.rank_formula_violations == 0;
        results.push(PairResult {
            asserted: !is_extrapolated(&expected),
            expected,
            verdict,
            matches,
        });
    }
    let (mismatches, duality) = if theorem == Theorem::Duality {
        let verdicts: Vec<ScanVerdict> = results.iter().map(|r| r.verdict.clone()).collect();
        let report = duality_crosscheck(&verdicts);
        (report.mismatches + report.missing.len(), Some(report))
    } else {
        (results.iter().filter(|r| r.asserted && !r.matches).count(), None)
    };
    let passed = mismatches == 0;
    let report = Report {
        header: run.header("verify", flat),
        passed,
        body: ReportBody::Scan {
            theorem,
            certified,
            membership,
            pairs: results,
            mismatches,
            duality,
        },
    };
    Ok(Outcome {
        report,
        exit: if passed { 0 } else { 1 },
    })
}

fn curvature_oracle(run: &Run) -> Result<Outcome, CliError> {
    let oracle = run.manifest.oracle;
    let flat = Signature::new(run.manifest.product.u, run.manifest.product.v);
    let metric = MetricGPsi::with_flat_factor(run.psi.clone(), flat);
    let p = metric.p();
    let mut points = Vec::new();
    for x in run.base_points() {
        let pt = metric.point(&x)?;
        let closed = metric.curvature_closed(&pt)?;
        let fd = metric.curvature_fd(&pt, oracle.step)?;
        points.push(OraclePoint {
            relative_error: closed.relative_error(&fd),
            outside_closed: closed.max_abs_outside(p),
            outside_fd: fd.max_abs_outside(p),
            point: pt,
        });
    }
    let max = |f: fn(&OraclePoint) -> f64| points.iter().map(f).fold(0.0, f64::max);
    let (rel, oc, ofd) = (
        max(|o| o.relative_error),
        max(|o| o.outside_closed),
        max(|o| o.outside_fd),
    );
    let passed = rel < oracle.threshold && oc < oracle.outside_closed && ofd < oracle.outside_fd;
    let report = Report {
        header: run.header("verify", flat),
        passed,
        body: ReportBody::CurvatureOracle {
            oracle,
            points,
            max_relative_error: rel,
            max_outside_closed: oc,
            max_outside_fd: ofd,
        },
    };
    Ok(Outcome {
        report,
        exit: if passed { 0 } else { 1 },
    })
}

/// Parse a report, rejecting other schema versions before anything else.
pub fn parse_report(path: &Path) -> Result<Report, CliError> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let version = value.pointer("/header/schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION as u64) {
        return Err(CliError::Schema(format!(
            "{}: schema version {version:?}, expected {SCHEMA_VERSION}",
            path.display()
        )));
    }
    // integer map keys only round-trip through the text form
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

fn histogram_text(h: &BTreeMap<usize, usize>) -> String {
    h.iter().map(|(r, n)| format!("{r}:{n}")).collect::<Vec<_>>().join(";")
}

fn verdict_word(constant: bool) -> &'static str {
    if constant {
        "constant"
    } else {
        "varies"
    }
}

/// Plain-text rendering of reports: a pair table, rank histograms and witnesses.
pub fn render_text(reports: &[(String, Report)]) -> String {
    let mut out = String::new();
    for (name, r) in reports {
        let h = &r.header;
        let _ = writeln!(
            out,
            "== {name}: {} p={} u={} v={} seed={} passed={}",
            h.command, h.p, h.u, h.v, h.seed, r.passed
        );
        match &r.body {
            ReportBody::CheckPsi {
                grid_points,
                semi_norm,
                membership,
                ..
            } => {
                let _ = writeln!(out, "grid points: {grid_points}  semi-norm: {semi_norm:e}");
                match membership {
                    Membership::Member {
                        min_positive_eigenvalue,
                        ..
                    } => {
                        let _ = writeln!(out, "member (smallest positive eigenvalue {min_positive_eigenvalue:e})");
                    }
                    Membership::Witness(w) => {
                        let _ = writeln!(
                            out,
                            "witness at {:?} direction {:?}: {}",
                            w.point, w.direction, w.reason
                        );
                    }
                }
            }
            ReportBody::Scan {
                theorem,
                certified,
                pairs,
                mismatches,
                duality,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "theorem: {theorem:?}  certified: {certified}  mismatches: {mismatches}"
                );
                let _ = writeln!(
                    out,
                    "{:<8} {:<9} {:<9} {:<6} {:<24} rule",
                    "pair", "expected", "observed", "match", "ranks"
                );
                for pr in pairs {
                    let _ = writeln!(
                        out,
                        "{:<8} {:<9} {:<9} {:<6} {:<24} {:?}{}",
                        pr.verdict.pair.label(),
                        verdict_word(pr.expected.expected_jordan),
                        verdict_word(pr.verdict.jordan_constant),
                        if pr.matches { "yes" } else { "NO" },
                        histogram_text(&pr.verdict.rank_histogram),
                        pr.expected.rule,
                        if pr.asserted { "" } else { " (reported only)" },
                    );
                }
                if let Some(d) = duality {
                    let _ = writeln!(
                        out,
                        "duality: {} checks, {} mismatches, {} missing",
                        d.checks.len(),
                        d.mismatches,
                        d.missing.len()
                    );
                }
                let with_witnesses: Vec<_> = pairs.iter().filter(|p| p.verdict.witnesses.len() > 1).collect();
                if !with_witnesses.is_empty() {
                    let _ = writeln!(out, "witnesses:");
                    for pr in with_witnesses {
                        for w in &pr.verdict.witnesses {
                            let _ = writeln!(
                                out,
                                "  {} rank {} from {} at {:?}: {:?}",
                                pr.verdict.pair.label(),
                                w.rank,
                                w.origin,
                                w.base_point,
                                w.vectors
                            );
                        }
                    }
                }
            }
            ReportBody::CurvatureOracle {
                max_relative_error,
                max_outside_closed,
                max_outside_fd,
                points,
                ..
            } => {
                let _ = writeln!(
                    out,
                    "points: {}  max relative error: {max_relative_error:e}  outside X-block: closed {max_outside_closed:e}, fd {max_outside_fd:e}",
                    points.len()
                );
            }
        }
    }
    out
}

/// CSV projection: one row per scanned pair (or per report for other kinds).
pub fn render_csv(reports: &[(String, Report)]) -> String {
    let mut out = String::from("report,command,pair,expected_jordan,jordan_constant,rank_histogram,matches,passed\n");
    for (name, r) in reports {
        match &r.body {
            ReportBody::Scan { pairs, .. } => {
                for pr in pairs {
                    let _ = writeln!(
                        out,
                        "{name},{},\"{}\",{},{},{},{},{}",
                        r.header.command,
                        pr.verdict.pair.label(),
                        pr.expected.expected_jordan,
                        pr.verdict.jordan_constant,
                        histogram_text(&pr.verdict.rank_histogram),
                        pr.matches,
                        r.passed
                    );
                }
            }
            _ => {
                let _ = writeln!(out, "{name},{},,,,,,{}", r.header.command, r.passed);
            }
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Run a parsed command line, returning the exit code. `env_seed` is the
/// value of the seed environment variable, if set.
pub fn execute(cli: &Cli, env_seed: Option<&str>) -> Result<u8, CliError> {
    match &cli.command {
        Command::Report { files, out } => {
            let reports = files
                .iter()
                .map(|f| Ok((f.display().to_string(), parse_report(f)?)))
                .collect::<Result<Vec<_>, CliError>>()?;
            print!("{}", render_text(&reports));
            if let Some(path) = out {
                write_file(path, &render_csv(&reports))?;
            }
            Ok(0)
        }
        Command::CheckPsi(flags) => {
            let run = Run::load(flags, env_seed)?;
            let outcome = with_jobs(flags.jobs, || cmd_check_psi(&run))??;
            emit(&run, flags, &outcome)?;
            Ok(outcome.exit)
        }
        Command::Verify { theorem, flags } => {
            let run = Run::load(flags, env_seed)?;
            let outcome = with_jobs(flags.jobs, || cmd_verify(&run, *theorem, flags.waive_membership))??;
            emit(&run, flags, &outcome)?;
            Ok(outcome.exit)
        }
    }
}

fn emit(run: &Run, flags: &RunFlags, outcome: &Outcome) -> Result<(), CliError> {
    let json = outcome.report.to_json();
    match run.output_path(flags) {
        Some(path) => {
            write_file(&path, &json)?;
            eprintln!(
                "{}: {} (report written to {})",
                outcome.report.header.command,
                if outcome.report.passed { "passed" } else { "FAILED" },
                path.display()
            );
        }
        None => print!("{json}"),
    }
    Ok(())
}

pub fn run(cli: Cli) -> ExitCode {
    let env_seed = std::env::var(SEED_ENV).ok();
    match execute(&cli, env_seed.as_deref()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
