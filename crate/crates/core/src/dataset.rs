//! Experiment records, CSV ingestion, battery-grade labeling and feature scaling.
//!
//! The CSV layout follows the published experiment table: eighteen fixed columns
//! (identifier, four process controls plus the stored temperature differential,
//! initial and final elemental concentrations with purity) and three optional
//! trailing columns `quality_score`, `excluded` and `notes`.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lithium mass fraction of pure Li2CO3, in ppm.
pub const LI_PPM_IN_PURE_CARBONATE: f64 = 187_880.0;

/// Maximum tolerated disagreement between the stored and recomputed temperature differential.
pub const DELTA_T_TOLERANCE: f64 = 0.5;

const PPM_MAX: f64 = 1.0e6;

/// Reactor operating conditions of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessControls {
    /// Cold reactor temperature, °C.
    pub t_cold: f64,
    /// Hot reactor temperature, °C.
    pub t_hot: f64,
    /// Inter-reactor flow rate, mL/min.
    pub flow_rate: f64,
    /// Slurry concentration, g solid per 100 mL.
    pub slurry_concentration: f64,
}

impl ProcessControls {
    pub fn delta_t(&self) -> f64 {
        self.t_hot - self.t_cold
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.t_cold, self.t_hot, self.flow_rate, self.slurry_concentration];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("process controls must be finite".into()));
        }
        if self.t_cold < 0.0 {
            return Err(Error::Invalid(format!("t_cold {} is negative", self.t_cold)));
        }
        if self.flow_rate <= 0.0 || self.slurry_concentration <= 0.0 {
            return Err(Error::Invalid(
                "flow_rate and slurry_concentration must be positive".into(),
            ));
        }
        if self.t_hot <= self.t_cold {
            return Err(Error::Invalid(format!(
                "t_hot {} must exceed t_cold {}",
                self.t_hot, self.t_cold
            )));
        }
        Ok(())
    }
}

/// Elemental concentrations (ppm) and Li2CO3 purity (mass percent).
///
/// Purity is absent for hypothetical conditions that were never measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub ca: f64,
    pub k: f64,
    pub li: f64,
    pub mg: f64,
    pub na: f64,
    #[serde(default)]
    pub purity_pct: Option<f64>,
}

impl Composition {
    pub fn elements(ca: f64, k: f64, li: f64, mg: f64, na: f64) -> Self {
        Self {
            ca,
            k,
            li,
            mg,
            na,
            purity_pct: None,
        }
    }

    pub fn element_sum(&self) -> f64 {
        self.ca + self.k + self.li + self.mg + self.na
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ca", self.ca),
            ("k", self.k),
            ("li", self.li),
            ("mg", self.mg),
            ("na", self.na),
        ] {
            if !v.is_finite() || !(0.0..=PPM_MAX).contains(&v) {
                return Err(Error::Invalid(format!("{name} = {v} ppm is outside [0, 1e6]")));
            }
        }
        if self.element_sum() > PPM_MAX {
            return Err(Error::Invalid(format!(
                "element sum {} ppm exceeds 1e6",
                self.element_sum()
            )));
        }
        if let Some(p) = self.purity_pct {
            if !p.is_finite() || !(0.0..=100.0).contains(&p) {
                return Err(Error::Invalid(format!("purity {p}% is outside [0, 100]")));
            }
        }
        Ok(())
    }
}

/// Expert-assigned run quality: 1 = clean, 2 = minor anomalies, 3 = noticeable anomalies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum QualityScore {
    #[default]
    Clean,
    Minor,
    Anomalous,
}

impl TryFrom<u8> for QualityScore {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(QualityScore::Clean),
            2 => Ok(QualityScore::Minor),
            3 => Ok(QualityScore::Anomalous),
            other => Err(format!("quality score must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<QualityScore> for u8 {
    fn from(q: QualityScore) -> u8 {
        match q {
            QualityScore::Clean => 1,
            QualityScore::Minor => 2,
            QualityScore::Anomalous => 3,
        }
    }
}

/// One crystallization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub exp_id: u32,
    pub controls: ProcessControls,
    pub initial: Composition,
    /// Composition of the recovered crystals.
    #[serde(rename = "final")]
    pub product: Composition,
    #[serde(default)]
    pub quality_score: QualityScore,
    #[serde(default)]
    pub excluded: bool,
    #[serde(default)]
    pub notes: String,
    /// Non-fatal integrity findings raised on ingestion.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Battery-grade label, filled in when the record enters a campaign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_grade: Option<bool>,
}

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.exp_id == 0 {
            return Err(Error::Invalid("exp_id must be positive".into()));
        }
        let ctx = |e: Error| e.context(format!("experiment {}", self.exp_id));
        self.controls.validate().map_err(ctx)?;
        self.initial.validate().map_err(ctx)?;
        self.product.validate().map_err(ctx)?;
        if self.product.purity_pct.is_none() {
            return Err(ctx(Error::Invalid("final purity is required".into())));
        }
        Ok(())
    }

    /// Warns when final Li disagrees with the purity-implied Li by more than 5 % relative.
    pub fn purity_warning(&self) -> Option<String> {
        let purity = self.product.purity_pct?;
        let implied = purity * LI_PPM_IN_PURE_CARBONATE / 100.0;
        if implied <= 0.0 {
            return None;
        }
        let rel = (self.product.li - implied).abs() / implied;
        (rel > 0.05).then(|| {
            format!(
                "final Li {:.1} ppm differs from purity-implied {:.1} ppm by {:.1}%",
                self.product.li,
                implied,
                rel * 100.0
            )
        })
    }
}

/// Input variables available to the surrogate models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    TCold,
    THot,
    DeltaT,
    FlowRate,
    SlurryConcentration,
    InitCa,
    InitK,
    InitLi,
    InitMg,
    InitNa,
}

impl Feature {
    pub const ALL: [Feature; 10] = [
        Feature::TCold,
        Feature::THot,
        Feature::DeltaT,
        Feature::FlowRate,
        Feature::SlurryConcentration,
        Feature::InitCa,
        Feature::InitK,
        Feature::InitLi,
        Feature::InitMg,
        Feature::InitNa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::TCold => "t_cold",
            Feature::THot => "t_hot",
            Feature::DeltaT => "delta_t",
            Feature::FlowRate => "flow_rate",
            Feature::SlurryConcentration => "slurry_concentration",
            Feature::InitCa => "init_ca",
            Feature::InitK => "init_k",
            Feature::InitLi => "init_li",
            Feature::InitMg => "init_mg",
            Feature::InitNa => "init_na",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == name)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Measured outcomes a regressor can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    FinalCa,
    FinalK,
    FinalLi,
    FinalMg,
    FinalNa,
    FinalPurity,
}

impl Target {
    /// The five per-element regression targets trained every iteration.
    pub const ELEMENTS: [Target; 5] = [
        Target::FinalCa,
        Target::FinalK,
        Target::FinalLi,
        Target::FinalMg,
        Target::FinalNa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::FinalCa => "final_ca",
            Target::FinalK => "final_k",
            Target::FinalLi => "final_li",
            Target::FinalMg => "final_mg",
            Target::FinalNa => "final_na",
            Target::FinalPurity => "final_purity",
        }
    }

    pub fn from_name(name: &str) -> Option<Target> {
        [
            Target::FinalCa,
            Target::FinalK,
            Target::FinalLi,
            Target::FinalMg,
            Target::FinalNa,
            Target::FinalPurity,
        ]
        .into_iter()
        .find(|t| t.name() == name)
    }

    pub fn value(self, record: &ExperimentRecord) -> f64 {
        let p = &record.product;
        match self {
            Target::FinalCa => p.ca,
            Target::FinalK => p.k,
            Target::FinalLi => p.li,
            Target::FinalMg => p.mg,
            Target::FinalNa => p.na,
            Target::FinalPurity => p.purity_pct.unwrap_or(f64::NAN),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anything that carries process controls and an initial composition.
pub trait FeatureSource {
    fn controls(&self) -> &ProcessControls;
    fn initial(&self) -> &Composition;

    fn feature(&self, feature: Feature) -> f64 {
        let c = self.controls();
        let i = self.initial();
        match feature {
            Feature::TCold => c.t_cold,
            Feature::THot => c.t_hot,
            Feature::DeltaT => c.delta_t(),
            Feature::FlowRate => c.flow_rate,
            Feature::SlurryConcentration => c.slurry_concentration,
            Feature::InitCa => i.ca,
            Feature::InitK => i.k,
            Feature::InitLi => i.li,
            Feature::InitMg => i.mg,
            Feature::InitNa => i.na,
        }
    }

    fn feature_vector(&self, features: &[Feature]) -> Vec<f64> {
        features.iter().map(|&f| self.feature(f)).collect()
    }
}

impl FeatureSource for ExperimentRecord {
    fn controls(&self) -> &ProcessControls {
        &self.controls
    }
    fn initial(&self) -> &Composition {
        &self.initial
    }
}

pub fn feature_matrix<T: FeatureSource>(items: &[T], features: &[Feature]) -> Vec<Vec<f64>> {
    items.iter().map(|i| i.feature_vector(features)).collect()
}

/// Records eligible for model training.
pub fn training_records(records: &[ExperimentRecord]) -> Vec<ExperimentRecord> {
    records.iter().filter(|r| !r.excluded).cloned().collect()
}

/// Impurity ceilings and minimum purity defining battery-grade product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeSpec {
    pub max_na: f64,
    pub max_mg: f64,
    pub max_ca: f64,
    pub max_k: f64,
    pub min_purity_pct: f64,
    #[serde(default)]
    pub k_enforced: bool,
}

impl Default for GradeSpec {
    /// Battery-grade targets of the crystallization campaign; potassium is
    /// tracked but not enforced because it washes out downstream.
    fn default() -> Self {
        Self {
            max_na: 500.0,
            max_mg: 80.0,
            max_ca: 150.0,
            max_k: 100.0,
            min_purity_pct: 99.5,
            k_enforced: false,
        }
    }
}

impl GradeSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.max_na,
            self.max_mg,
            self.max_ca,
            self.max_k,
            self.min_purity_pct,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Invalid("grade thresholds must be positive".into()))
        }
    }
}

pub fn label_grade(product: &Composition, spec: &GradeSpec) -> bool {
    let Some(purity) = product.purity_pct else {
        return false;
    };
    product.mg <= spec.max_mg
        && product.na <= spec.max_na
        && product.ca <= spec.max_ca
        && purity >= spec.min_purity_pct
        && (!spec.k_enforced || product.k <= spec.max_k)
}

// ---------------------------------------------------------------------------
// CSV

/// Column headers of the experiment table, in order.
pub const CSV_COLUMNS: [&str; 18] = [
    "Exp. #",
    "T cold (°C)",
    "T hot (°C)",
    "ΔT (°C)",
    "Flow rate (mL/min)",
    "slurry concentration (g total solid per 100 mL)",
    "Initial Ca (ppm)",
    "Initial K (ppm)",
    "Initial Li (ppm)",
    "Initial Mg (ppm)",
    "Initial Na (ppm)",
    "Initial Li2CO3 purity (%)",
    "Final Ca (ppm)",
    "Final K (ppm)",
    "Final Li (ppm)",
    "Final Mg (ppm)",
    "Final Na (ppm)",
    "Final Li2CO3 purity (%)",
];

const OPTIONAL_COLUMNS: [&str; 3] = ["quality_score", "excluded", "notes"];

fn parse_number(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    let trimmed = trimmed.strip_suffix('%').unwrap_or(trimmed).trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            row,
            column: column.to_string(),
            message: format!("`{cell}` is not a finite number"),
        })
}

fn parse_bool(cell: &str, row: usize) -> Result<bool> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" | "n" => Ok(false),
        "1" | "true" | "yes" | "y" => Ok(true),
        other => Err(Error::Parse {
            row,
            column: "excluded".into(),
            message: format!("`{other}` is not a boolean"),
        }),
    }
}

/// Parses an experiment table. Rows are numbered from 1 (the first data row).
pub fn load_dataset<R: Read>(source: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h == name);

    let mut cols = [0usize; 18];
    for (slot, name) in cols.iter_mut().zip(CSV_COLUMNS) {
        *slot = position(name)
            .ok_or_else(|| Error::Integrity(format!("missing required column `{name}`")))?;
    }
    let [quality_col, excluded_col, notes_col] = OPTIONAL_COLUMNS.map(position);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, row) in reader.records().enumerate() {
        let row_no = idx + 1;
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            let cell = row.get(cols[i]).unwrap_or("");
            parse_number(cell, row_no, CSV_COLUMNS[i])
        };

        let id_value = num(0)?;
        if id_value < 1.0 || id_value.fract() != 0.0 || id_value > u32::MAX as f64 {
            return Err(Error::Parse {
                row: row_no,
                column: CSV_COLUMNS[0].into(),
                message: format!("`{id_value}` is not a positive integer"),
            });
        }
        let exp_id = id_value as u32;
        if !seen.insert(exp_id) {
            return Err(Error::Integrity(format!("duplicate exp_id {exp_id}")));
        }

        let controls = ProcessControls {
            t_cold: num(1)?,
            t_hot: num(2)?,
            flow_rate: num(4)?,
            slurry_concentration: num(5)?,
        };
        let stored_delta = num(3)?;
        let initial = Composition {
            ca: num(6)?,
            k: num(7)?,
            li: num(8)?,
            mg: num(9)?,
            na: num(10)?,
            purity_pct: Some(num(11)?),
        };
        let product = Composition {
            ca: num(12)?,
            k: num(13)?,
            li: num(14)?,
            mg: num(15)?,
            na: num(16)?,
            purity_pct: Some(num(17)?),
        };

        let quality_score = match quality_col.and_then(|c| row.get(c)).map(str::trim) {
            None | Some("") => QualityScore::default(),
            Some(cell) => cell
                .parse::<u8>()
                .map_err(|e| e.to_string())
                .and_then(QualityScore::try_from)
                .map_err(|message| Error::Parse {
                    row: row_no,
                    column: "quality_score".into(),
                    message,
                })?,
        };
        let excluded = match excluded_col.and_then(|c| row.get(c)) {
            Some(cell) => parse_bool(cell, row_no)?,
            None => false,
        };
        let notes = notes_col
            .and_then(|c| row.get(c))
            .unwrap_or("")
            .to_string();

        let mut record = ExperimentRecord {
            exp_id,
            controls,
            initial,
            product,
            quality_score,
            excluded,
            notes,
            warnings: Vec::new(),
            battery_grade: None,
        };
        record.validate()?;
        if (controls.delta_t() - stored_delta).abs() > DELTA_T_TOLERANCE {
            record.warnings.push(format!(
                "stored ΔT {stored_delta} differs from t_hot - t_cold = {}",
                controls.delta_t()
            ));
        }
        if let Some(w) = record.purity_warning() {
            record.warnings.push(w);
        }
        records.push(record);
    }
    Ok(records)
}

/// Writes records in the layout accepted by [`load_dataset`].
pub fn write_dataset<W: Write>(sink: W, records: &[ExperimentRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let header: Vec<&str> = CSV_COLUMNS.iter().chain(OPTIONAL_COLUMNS.iter()).copied().collect();
    writer.write_record(&header)?;
    let pct = |p: Option<f64>| p.map(|v| format!("{v}%")).unwrap_or_default();
    for r in records {
        let c = &r.controls;
        let (i, f) = (&r.initial, &r.product);
        let fields = [
            r.exp_id.to_string(),
            c.t_cold.to_string(),
            c.t_hot.to_string(),
            c.delta_t().to_string(),
            c.flow_rate.to_string(),
            c.slurry_concentration.to_string(),
            i.ca.to_string(),
            i.k.to_string(),
            i.li.to_string(),
            i.mg.to_string(),
            i.na.to_string(),
            pct(i.purity_pct),
            f.ca.to_string(),
            f.k.to_string(),
            f.li.to_string(),
            f.mg.to_string(),
            f.na.to_string(),
            pct(f.purity_pct),
            u8::from(r.quality_score).to_string(),
            r.excluded.to_string(),
            r.notes.clone(),
        ];
        writer.write_record(&fields)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Scaling

/// Per-column standardization with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(matrix: &[Vec<f64>]) -> Result<Self> {
        let names: Vec<String> = match matrix.first() {
            Some(row) => (0..row.len()).map(|i| format!("column {i}")).collect(),
            None => Vec::new(),
        };
        Self::fit_named(matrix, &names)
    }

    /// Like [`FeatureScaler::fit`], but degenerate-column errors carry the given names.
    pub fn fit_named<S: AsRef<str>>(matrix: &[Vec<f64>], names: &[S]) -> Result<Self> {
        if matrix.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: matrix.len(),
            });
        }
        let d = matrix[0].len();
        if names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: names.len(),
            });
        }
        check_rows(matrix, d)?;
        let n = matrix.len() as f64;
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for j in 0..d {
            let mean = matrix.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = matrix.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if !(std > 1e-12 * (1.0 + mean.abs())) {
                return Err(Error::DegenerateFeature {
                    column: names[j].as_ref().to_string(),
                });
            }
            means[j] = mean;
            stds[j] = std;
        }
        Ok(Self { means, stds })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        matrix.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| v * s + m)
            .collect())
    }

    pub fn inverse(&self, matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        matrix.iter().map(|r| self.inverse_row(r)).collect()
    }

    fn check(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        Ok(())
    }
}

pub fn fit_scaler(matrix: &[Vec<f64>]) -> Result<FeatureScaler> {
    FeatureScaler::fit(matrix)
}

pub fn apply_scaler(scaler: &FeatureScaler, matrix: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    scaler.transform(matrix)
}

pub(crate) fn check_rows(matrix: &[Vec<f64>], d: usize) -> Result<()> {
    match matrix.iter().find(|r| r.len() != d) {
        Some(bad) => Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        }),
        None => Ok(()),
    }
}
