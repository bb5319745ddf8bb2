//! Manifest-driven evaluation: run the CT -> projection -> quantification
//! pipeline over a case set, aggregate agreement statistics, and render
//! reports.
//!
//! Probability maps are ingested from files, never produced here; the
//! "cnn-single" method is the first listed map and "cnn-ensemble" the
//! pixelwise mean of all of them.

mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drr::{self, DrrConfig, DrrError};
use crate::io::{self, IoError};
use crate::maskproj::{
    self, binarize_map, thickness_projection, CutoffConfig, CutoffMode, MaskProjError,
    DEFAULT_LUNG_CUTOFF_MM,
};
use crate::quant::{self, MaskCombine, QuantError, SeverityRecord};
use crate::stats::{self, BootstrapResult, StatsError, TTestResult, DEFAULT_N_RESAMPLES};
use crate::types::{BinaryMask2D, ImageKind};

pub use render::{render_report, ReportFormat};

/// Canonical method names and their table order.
pub mod method {
    pub const GROUND_TRUTH_DRR: &str = "ground-truth-drr";
    pub const READER_AVG: &str = "reader-avg";
    pub const READER_INTER: &str = "reader-inter";
    pub const READER_UNION: &str = "reader-union";
    pub const CNN_SINGLE: &str = "cnn-single";
    pub const CNN_ENSEMBLE: &str = "cnn-ensemble";

    pub fn reader(index: usize) -> String {
        format!("reader-{}", index + 1)
    }

    /// Table order: ground truth, individual readers, reader combinations,
    /// systems. Readers sort numerically. Pairwise t-tests list the earlier
    /// method first, which fixes the one-tailed direction (reader errors
    /// minus system errors).
    pub fn rank(name: &str) -> (u8, u32) {
        match name {
            GROUND_TRUTH_DRR => (0, 0),
            READER_AVG => (2, 0),
            READER_INTER => (3, 0),
            READER_UNION => (4, 0),
            CNN_SINGLE => (5, 0),
            CNN_ENSEMBLE => (6, 0),
            other => {
                if let Some(n) = other.strip_prefix("reader-").and_then(|s| s.parse().ok()) {
                    (1, n)
                } else {
                    (7, 0)
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("manifest {path}: {reason}")]
    Schema { path: PathBuf, reason: String },
    #[error("manifest: duplicate case_id `{0}`")]
    DuplicateCaseId(String),
    #[error("case {case_id}, field {field}: file not found: {path}")]
    MissingFile { case_id: String, field: &'static str, path: PathBuf },
    #[error("case {case_id}: {field} geometry does not match the CT volume")]
    Geometry { case_id: String, field: &'static str },
    #[error("config: {0}")]
    Config(String),
    #[error("case {case_id}: {source}")]
    Case {
        case_id: String,
        #[source]
        source: CaseError,
    },
    #[error("statistics for {context}: {source}")]
    Stats {
        context: String,
        #[source]
        source: StatsError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Any per-case pipeline failure.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    MaskProj(#[from] MaskProjError),
    #[error(transparent)]
    Drr(#[from] DrrError),
    #[error("{field}: 2D geometry {got:?} does not match the projection grid {expected:?}")]
    Grid2Mismatch {
        field: String,
        expected: ((usize, usize), (f64, f64)),
        got: ((usize, usize), (f64, f64)),
    },
    #[error("{field}: expected a probability image, got {kind}")]
    NotProbability { field: String, kind: ImageKind },
}

fn default_lung_cutoff() -> f64 {
    DEFAULT_LUNG_CUTOFF_MM
}

fn default_lesion_cutoff() -> CutoffConfig {
    CutoffConfig { mode: CutoffMode::Thickness, cutoff: DEFAULT_LUNG_CUTOFF_MM, inclusive: true }
}

fn default_probability_threshold() -> f64 {
    0.5
}

fn default_n_resamples() -> usize {
    DEFAULT_N_RESAMPLES
}

/// Pipeline configuration carried by the manifest and echoed into every
/// report for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestConfig {
    #[serde(default)]
    pub drr: DrrConfig,
    #[serde(default = "default_lung_cutoff")]
    pub lung_cutoff_mm: f64,
    #[serde(default = "default_lesion_cutoff")]
    pub lesion_cutoff: CutoffConfig,
    #[serde(default = "default_probability_threshold")]
    pub probability_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_resamples")]
    pub n_resamples: usize,
}

impl Default for ManifestConfig {
    fn default() -> Self {
        Self {
            drr: DrrConfig::default(),
            lung_cutoff_mm: default_lung_cutoff(),
            lesion_cutoff: default_lesion_cutoff(),
            probability_threshold: default_probability_threshold(),
            seed: 0,
            n_resamples: default_n_resamples(),
        }
    }
}

impl ManifestConfig {
    fn validate(&self) -> Result<(), ReportError> {
        self.drr.validate().map_err(|e| ReportError::Config(e.to_string()))?;
        self.lesion_cutoff.validate().map_err(|e| ReportError::Config(e.to_string()))?;
        if self.lung_cutoff_mm < 0.0 {
            return Err(ReportError::Config("lung_cutoff_mm must be >= 0".to_string()));
        }
        if !(0.0..=1.0).contains(&self.probability_threshold) {
            return Err(ReportError::Config("probability_threshold must be in [0, 1]".to_string()));
        }
        if self.n_resamples < 1 {
            return Err(ReportError::Config("n_resamples must be >= 1".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    pub case_id: String,
    pub ct_path: PathBuf,
    pub lung3d_path: PathBuf,
    pub lesion3d_path: PathBuf,
    #[serde(default)]
    pub reader_mask_paths: Vec<PathBuf>,
    #[serde(default)]
    pub probability_map_paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<ManifestCase>,
    #[serde(default)]
    pub config: ManifestConfig,
}

/// Parses and validates a manifest: schema, unique case ids, resolvable
/// paths (relative to the manifest file) and consistent 3D geometry.
pub fn validate_manifest(path: &Path) -> Result<Manifest, ReportError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e })?;
    let mut manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| ReportError::Schema { path: path.to_path_buf(), reason: e.to_string() })?;
    manifest.config.validate()?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let mut seen = BTreeSet::new();
    for case in &mut manifest.cases {
        if !seen.insert(case.case_id.clone()) {
            return Err(ReportError::DuplicateCaseId(case.case_id.clone()));
        }
        case.ct_path = resolve(&case.ct_path);
        case.lung3d_path = resolve(&case.lung3d_path);
        case.lesion3d_path = resolve(&case.lesion3d_path);
        for p in &mut case.reader_mask_paths {
            *p = resolve(p);
        }
        for p in &mut case.probability_map_paths {
            *p = resolve(p);
        }

        let probe: [(&'static str, &PathBuf); 3] = [
            ("ct_path", &case.ct_path),
            ("lung3d_path", &case.lung3d_path),
            ("lesion3d_path", &case.lesion3d_path),
        ];
        for (field, p) in probe {
            if !p.exists() {
                return Err(ReportError::MissingFile {
                    case_id: case.case_id.clone(),
                    field,
                    path: p.clone(),
                });
            }
        }
        for (field, paths) in [
            ("reader_mask_paths", &case.reader_mask_paths),
            ("probability_map_paths", &case.probability_map_paths),
        ] {
            for p in paths {
                if !p.exists() {
                    return Err(ReportError::MissingFile {
                        case_id: case.case_id.clone(),
                        field,
                        path: p.clone(),
                    });
                }
            }
        }

        let ct = io::read_volume_geometry(&case.ct_path)
            .map_err(|e| ReportError::Case { case_id: case.case_id.clone(), source: e.into() })?;
        for (field, p) in [("lung3d_path", &case.lung3d_path), ("lesion3d_path", &case.lesion3d_path)]
        {
            let g = io::read_volume_geometry(p).map_err(|e| ReportError::Case {
                case_id: case.case_id.clone(),
                source: e.into(),
            })?;
            if g != ct {
                return Err(ReportError::Geometry { case_id: case.case_id.clone(), field });
            }
        }
    }
    Ok(manifest)
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Skip cases that fail instead of aborting; skips are listed in the report.
    pub skip_bad_cases: bool,
    /// When set, per-case DRR images and projected masks are written here.
    pub artifact_dir: Option<PathBuf>,
}

/// min/max/mean/std of a value distribution over cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub name: String,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Agreement of one method's POa against POv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub method: String,
    pub n_cases: usize,
    pub mae: BootstrapResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pearson: Option<BootstrapResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Paired one-tailed t-test between two methods' absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestRow {
    pub method_a: String,
    pub method_b: String,
    pub n_cases: usize,
    #[serde(flatten)]
    pub result: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub case_id: String,
    pub error: String,
}

/// The full evaluation output. Serialization is deterministic for a given
/// manifest and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: ManifestConfig,
    pub cases: Vec<SeverityRecord>,
    pub distribution: Vec<DistributionRow>,
    pub agreement: Vec<AgreementRow>,
    pub ttests: Vec<TTestRow>,
    pub skipped_cases: Vec<SkippedCase>,
    pub warnings: Vec<String>,
}

struct CaseOutput {
    record: SeverityRecord,
    warnings: Vec<String>,
}

fn check_grid2(
    field: &str,
    expected: &BinaryMask2D,
    got_grid: crate::grid::Grid2,
) -> Result<(), CaseError> {
    if got_grid != expected.grid() {
        return Err(CaseError::Grid2Mismatch {
            field: field.to_string(),
            expected: (expected.dims(), expected.spacing()),
            got: (got_grid.dims, got_grid.spacing),
        });
    }
    Ok(())
}

fn evaluate_case(
    case: &ManifestCase,
    config: &ManifestConfig,
    artifact_dir: Option<&Path>,
) -> Result<CaseOutput, CaseError> {
    let mut warnings = Vec::new();

    let volume = io::load_volume(&case.ct_path)?;
    let lung3d = io::load_mask3d(&case.lung3d_path)?;
    let lesion3d = io::load_mask3d(&case.lesion3d_path)?;
    if !lung3d.matches(&volume) || !lesion3d.matches(&volume) {
        return Err(QuantError::GeometryMismatch.into());
    }

    let (pov, stray3d) = quant::pov_with_stray(&lung3d, &lesion3d)?;
    if stray3d > 0 {
        warnings.push(format!(
            "case {}: {stray3d} lesion voxels outside the lung mask",
            case.case_id
        ));
    }

    let drr_image = drr::generate_drr(&volume, &config.drr)?;

    let lung_cutoff = CutoffConfig {
        mode: CutoffMode::Thickness,
        cutoff: config.lung_cutoff_mm,
        inclusive: true,
    };
    let lung2d = binarize_map(&thickness_projection(&lung3d), &lung_cutoff)?;

    let lesion_map = match config.lesion_cutoff.mode {
        CutoffMode::Thickness => thickness_projection(&lesion3d),
        CutoffMode::Intensity => {
            maskproj::intensity_projection(&volume, &lesion3d, &config.drr)?
        }
    };
    let gt2d = binarize_map(&lesion_map, &config.lesion_cutoff)?;

    let mut poa_by_method = BTreeMap::new();
    poa_by_method.insert(method::GROUND_TRUTH_DRR.to_string(), quant::poa(&lung2d, &gt2d)?);

    // readers
    let mut reader_masks = Vec::new();
    for (i, path) in case.reader_mask_paths.iter().enumerate() {
        let (mask, io_warnings) = io::load_mask2d(path)?;
        warnings.extend(io_warnings);
        check_grid2(&format!("reader mask {}", i + 1), &lung2d, mask.grid())?;
        let (poa, stray) = quant::poa_with_stray(&lung2d, &mask)?;
        if stray > 0 {
            warnings.push(format!(
                "case {}: reader {} has {stray} pixels outside the lung area",
                case.case_id,
                i + 1
            ));
        }
        poa_by_method.insert(method::reader(i), poa);
        reader_masks.push(mask);
    }
    if reader_masks.len() >= 2 {
        poa_by_method.insert(
            method::READER_AVG.to_string(),
            quant::reader_average_poa(&reader_masks, &lung2d)?,
        );
        let inter = quant::combine_masks(&reader_masks, MaskCombine::Intersection)?;
        let union = quant::combine_masks(&reader_masks, MaskCombine::Union)?;
        poa_by_method.insert(method::READER_INTER.to_string(), quant::poa(&lung2d, &inter)?);
        poa_by_method.insert(method::READER_UNION.to_string(), quant::poa(&lung2d, &union)?);
    }

    // predicted probability maps
    let mut prob_maps = Vec::new();
    for (i, path) in case.probability_map_paths.iter().enumerate() {
        let (img, io_warnings) = io::load_image2d(path)?;
        warnings.extend(io_warnings);
        if img.kind() != ImageKind::Probability {
            return Err(CaseError::NotProbability {
                field: format!("probability map {}", i + 1),
                kind: img.kind(),
            });
        }
        check_grid2(&format!("probability map {}", i + 1), &lung2d, img.grid())?;
        prob_maps.push(img);
    }
    if !prob_maps.is_empty() {
        let single =
            quant::probability_to_mask(&prob_maps[0], &lung2d, config.probability_threshold)?;
        poa_by_method.insert(method::CNN_SINGLE.to_string(), quant::poa(&lung2d, &single)?);
        let mean = quant::ensemble_average(&prob_maps)?;
        let ensemble =
            quant::probability_to_mask(&mean, &lung2d, config.probability_threshold)?;
        poa_by_method.insert(method::CNN_ENSEMBLE.to_string(), quant::poa(&lung2d, &ensemble)?);
    }

    if let Some(dir) = artifact_dir {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        io::save_image2d(&drr_image, &dir.join(format!("{}_drr.png", case.case_id)))?;
        io::save_mask2d(&lung2d, &dir.join(format!("{}_lung.png", case.case_id)))?;
        io::save_mask2d(&gt2d, &dir.join(format!("{}_lesion.png", case.case_id)))?;
    }

    Ok(CaseOutput {
        record: SeverityRecord {
            case_id: case.case_id.clone(),
            pov_ct: Some(pov),
            poa_by_method,
        },
        warnings,
    })
}

fn distribution_row(name: &str, values: &[f64]) -> DistributionRow {
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n >= 2 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    DistributionRow { name: name.to_string(), n, min, max, mean, std }
}

/// Runs the full pipeline over every case and aggregates the statistics.
pub fn run_evaluate(manifest: &Manifest, options: &EvalOptions) -> Result<EvalReport, ReportError> {
    manifest.config.validate()?;
    let config = &manifest.config;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for case in &manifest.cases {
        match evaluate_case(case, config, options.artifact_dir.as_deref()) {
            Ok(output) => {
                warnings.extend(output.warnings);
                records.push(output.record);
            }
            Err(source) => {
                if options.skip_bad_cases {
                    skipped.push(SkippedCase {
                        case_id: case.case_id.clone(),
                        error: source.to_string(),
                    });
                } else {
                    return Err(ReportError::Case { case_id: case.case_id.clone(), source });
                }
            }
        }
    }

    // canonical method order over all cases
    let mut methods: Vec<String> = records
        .iter()
        .flat_map(|r| r.poa_by_method.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    methods.sort_by(|a, b| method::rank(a).cmp(&method::rank(b)).then_with(|| a.cmp(b)));

    // paired (poa, pov) per method, in case order
    let pairs_for = |name: &str| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter_map(|r| {
                let poa = r.poa_by_method.get(name)?;
                let pov = r.pov_ct?;
                Some((*poa, pov))
            })
            .collect()
    };

    let mae_stat = |pairs: &[(f64, f64)]| -> Option<f64> {
        Some(pairs.iter().map(|(a, b)| (a - b).abs()).sum::<f64>() / pairs.len() as f64)
    };
    let pearson_stat = |pairs: &[(f64, f64)]| -> Option<f64> {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        stats::pearson(&xs, &ys).ok()
    };

    let mut agreement = Vec::new();
    for name in &methods {
        let pairs = pairs_for(name);
        if pairs.is_empty() {
            continue;
        }
        let mae = stats::bootstrap(mae_stat, &pairs, config.n_resamples, config.seed)
            .map_err(|source| ReportError::Stats { context: format!("MAE of {name}"), source })?;
        let (pearson, note) =
            match stats::bootstrap(pearson_stat, &pairs, config.n_resamples, config.seed) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(format!("pearson unavailable: {e}"))),
            };
        agreement.push(AgreementRow { method: name.clone(), n_cases: pairs.len(), mae, pearson, note });
    }

    // pairwise related-sample t-tests on absolute errors
    let mut ttests = Vec::new();
    for (i, a) in methods.iter().enumerate() {
        for b in methods.iter().skip(i + 1) {
            let paired: Vec<(f64, f64)> = records
                .iter()
                .filter_map(|r| {
                    let pov = r.pov_ct?;
                    let ea = (r.poa_by_method.get(a)? - pov).abs();
                    let eb = (r.poa_by_method.get(b)? - pov).abs();
                    Some((ea, eb))
                })
                .collect();
            if paired.len() < 2 {
                warnings.push(format!(
                    "t-test {a} vs {b}: skipped, only {} paired cases",
                    paired.len()
                ));
                continue;
            }
            let ea: Vec<f64> = paired.iter().map(|p| p.0).collect();
            let eb: Vec<f64> = paired.iter().map(|p| p.1).collect();
            let result = stats::paired_t_one_tailed(&ea, &eb).map_err(|source| {
                ReportError::Stats { context: format!("t-test {a} vs {b}"), source }
            })?;
            ttests.push(TTestRow {
                method_a: a.clone(),
                method_b: b.clone(),
                n_cases: paired.len(),
                result,
            });
        }
    }

    let mut distribution = Vec::new();
    let povs: Vec<f64> = records.iter().filter_map(|r| r.pov_ct).collect();
    if !povs.is_empty() {
        distribution.push(distribution_row("pov-ct", &povs));
    }
    for name in &methods {
        let poas: Vec<f64> =
            records.iter().filter_map(|r| r.poa_by_method.get(name).copied()).collect();
        if !poas.is_empty() {
            distribution.push(distribution_row(&format!("poa-{name}"), &poas));
        }
    }

    Ok(EvalReport {
        config: config.clone(),
        cases: records,
        distribution,
        agreement,
        ttests,
        skipped_cases: skipped,
        warnings,
    })
}
