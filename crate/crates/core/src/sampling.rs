//! Surrogate-space generation: constrained Latin hypercube sampling and the
//! random-walk sampler used to probe around an identified Pareto frontier.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Composition, Feature, FeatureSource, ProcessControls};
use crate::error::{Error, Result};

/// Number of sampled coordinates per condition.
pub const N_DIMS: usize = 9;

/// Coordinates of a condition, ordered as [`Dim::ALL`].
pub type Coords = [f64; N_DIMS];

const CONSTRAINT_EPS: f64 = 1e-9;
const MAX_REPAIR_ATTEMPTS: usize = 32;
const MAX_REPLACEMENT_ATTEMPTS: usize = 10_000;
const MIN_ACCEPTANCE_RATE: f64 = 0.01;

/// A sampled dimension of the surrogate space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dim {
    TCold,
    THot,
    FlowRate,
    SlurryConcentration,
    InitCa,
    InitK,
    InitLi,
    InitMg,
    InitNa,
}

impl Dim {
    pub const ALL: [Dim; N_DIMS] = [
        Dim::TCold,
        Dim::THot,
        Dim::FlowRate,
        Dim::SlurryConcentration,
        Dim::InitCa,
        Dim::InitK,
        Dim::InitLi,
        Dim::InitMg,
        Dim::InitNa,
    ];

    /// Indices of the five elemental concentrations.
    pub const ELEMENTS: [usize; 5] = [4, 5, 6, 7, 8];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn feature(self) -> Feature {
        match self {
            Dim::TCold => Feature::TCold,
            Dim::THot => Feature::THot,
            Dim::FlowRate => Feature::FlowRate,
            Dim::SlurryConcentration => Feature::SlurryConcentration,
            Dim::InitCa => Feature::InitCa,
            Dim::InitK => Feature::InitK,
            Dim::InitLi => Feature::InitLi,
            Dim::InitMg => Feature::InitMg,
            Dim::InitNa => Feature::InitNa,
        }
    }

    pub fn name(self) -> &'static str {
        self.feature().name()
    }

    pub fn from_name(name: &str) -> Option<Dim> {
        Dim::ALL.into_iter().find(|d| d.name() == name)
    }

    fn is_concentration(self) -> bool {
        self.index() >= 4
    }

    fn is_temperature(self) -> bool {
        matches!(self, Dim::TCold | Dim::THot)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionRange {
    pub name: Dim,
    pub min: f64,
    pub max: f64,
}

impl DimensionRange {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

fn default_max_element_sum() -> f64 {
    1.0e6
}

/// Bounds and constraints of one surrogate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpaceSpec {
    pub label: String,
    pub n_points: usize,
    pub dimensions: Vec<DimensionRange>,
    /// Required `t_hot - t_cold`, °C.
    pub min_delta_t: f64,
    #[serde(default = "default_max_element_sum")]
    pub max_element_sum: f64,
}

impl SurrogateSpaceSpec {
    /// Builds a spec from bounds ordered as [`Dim::ALL`].
    pub fn from_bounds(
        label: impl Into<String>,
        n_points: usize,
        bounds: [(f64, f64); N_DIMS],
        min_delta_t: f64,
    ) -> Self {
        Self {
            label: label.into(),
            n_points,
            dimensions: Dim::ALL
                .iter()
                .zip(bounds)
                .map(|(&name, (min, max))| DimensionRange { name, min, max })
                .collect(),
            min_delta_t,
            max_element_sum: default_max_element_sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::Invalid(format!("space {}: n_points must be >= 1", self.label)));
        }
        if !(self.min_delta_t >= 0.0) || !self.min_delta_t.is_finite() {
            return Err(Error::Invalid(format!("space {}: min_delta_t must be >= 0", self.label)));
        }
        if !(self.max_element_sum > 0.0) {
            return Err(Error::Invalid(format!(
                "space {}: max_element_sum must be positive",
                self.label
            )));
        }
        for dim in Dim::ALL {
            let count = self.dimensions.iter().filter(|r| r.name == dim).count();
            if count != 1 {
                return Err(Error::Invalid(format!(
                    "space {}: dimension {dim} must appear exactly once (found {count})",
                    self.label
                )));
            }
        }
        for r in &self.dimensions {
            if !(r.min.is_finite() && r.max.is_finite() && r.min < r.max) {
                return Err(Error::Invalid(format!(
                    "space {}: dimension {} needs min < max (got {}..{})",
                    self.label, r.name, r.min, r.max
                )));
            }
            if r.min < 0.0 && (r.name.is_concentration() || r.name == Dim::TCold) {
                return Err(Error::Invalid(format!(
                    "space {}: dimension {} cannot be negative",
                    self.label, r.name
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self, dim: Dim) -> DimensionRange {
        *self
            .dimensions
            .iter()
            .find(|r| r.name == dim)
            .expect("validated spec carries every dimension")
    }

    pub fn set_range(&mut self, dim: Dim, min: f64, max: f64) {
        match self.dimensions.iter_mut().find(|r| r.name == dim) {
            Some(r) => {
                r.min = min;
                r.max = max;
            }
            None => self.dimensions.push(DimensionRange { name: dim, min, max }),
        }
    }

    /// `(min, max)` per dimension ordered as [`Dim::ALL`].
    pub fn bounds(&self) -> [(f64, f64); N_DIMS] {
        Dim::ALL.map(|d| {
            let r = self.range(d);
            (r.min, r.max)
        })
    }

    pub fn satisfies_constraints(&self, c: &Coords) -> bool {
        let delta_ok = c[Dim::THot.index()] + CONSTRAINT_EPS >= c[Dim::TCold.index()] + self.min_delta_t;
        let sum: f64 = Dim::ELEMENTS.iter().map(|&i| c[i]).sum();
        delta_ok && sum <= self.max_element_sum + CONSTRAINT_EPS
    }

    pub fn within_bounds(&self, c: &Coords) -> bool {
        self.bounds().iter().zip(c).all(|(&(lo, hi), &v)| {
            let tol = CONSTRAINT_EPS * (1.0 + hi.abs().max(lo.abs()));
            v >= lo - tol && v <= hi + tol
        })
    }

    /// Bounds and constraints together.
    pub fn contains(&self, c: &Coords) -> bool {
        self.within_bounds(c) && self.satisfies_constraints(c)
    }

    /// Projects a point onto the feasible set: clip to bounds, raise `t_hot`
    /// (or lower `t_cold`) to honour the temperature differential and scale
    /// elemental concentrations down proportionally when their sum is too large.
    /// The result may still be infeasible when the bounds themselves forbid it.
    pub fn repair(&self, c: &Coords) -> Coords {
        let bounds = self.bounds();
        let mut out = *c;
        for (v, (lo, hi)) in out.iter_mut().zip(bounds) {
            *v = v.clamp(lo, hi);
        }
        let (tc, th) = (Dim::TCold.index(), Dim::THot.index());
        if out[th] < out[tc] + self.min_delta_t {
            out[th] = (out[tc] + self.min_delta_t).min(bounds[th].1);
            if out[th] < out[tc] + self.min_delta_t {
                out[tc] = (out[th] - self.min_delta_t).max(bounds[tc].0);
            }
        }
        let sum: f64 = Dim::ELEMENTS.iter().map(|&i| out[i]).sum();
        if sum > self.max_element_sum {
            let factor = self.max_element_sum / sum;
            for &i in &Dim::ELEMENTS {
                out[i] = (out[i] * factor).max(bounds[i].0);
            }
        }
        out
    }
}

/// How a condition came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    #[serde(rename = "LHC")]
    Lhc,
    RandomWalk,
    Nsga2,
    Midpoint,
    Manual,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Lhc => "LHC",
            Provenance::RandomWalk => "RandomWalk",
            Provenance::Nsga2 => "NSGA2",
            Provenance::Midpoint => "Midpoint",
            Provenance::Manual => "Manual",
        };
        f.write_str(s)
    }
}

/// A hypothetical experiment: process controls plus feed composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPoint {
    pub controls: ProcessControls,
    pub initial: Composition,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_origin: Option<usize>,
}

impl ConditionPoint {
    pub fn from_coords(c: &Coords, provenance: Provenance) -> Self {
        Self {
            controls: ProcessControls {
                t_cold: c[0],
                t_hot: c[1],
                flow_rate: c[2],
                slurry_concentration: c[3],
            },
            initial: Composition::elements(c[4], c[5], c[6], c[7], c[8]),
            provenance,
            seed_origin: None,
        }
    }

    pub fn coords(&self) -> Coords {
        let (c, i) = (&self.controls, &self.initial);
        [
            c.t_cold,
            c.t_hot,
            c.flow_rate,
            c.slurry_concentration,
            i.ca,
            i.k,
            i.li,
            i.mg,
            i.na,
        ]
    }

    pub fn with_origin(mut self, origin: usize) -> Self {
        self.seed_origin = Some(origin);
        self
    }
}

impl FeatureSource for ConditionPoint {
    fn controls(&self) -> &ProcessControls {
        &self.controls
    }
    fn initial(&self) -> &Composition {
        &self.initial
    }
}

// ---------------------------------------------------------------------------
// Latin hypercube

/// Stratified design before any constraint handling.
#[derive(Debug, Clone)]
pub struct StratifiedDesign {
    pub points: Vec<Coords>,
    /// Stratum index of every coordinate.
    pub strata: Vec<[usize; N_DIMS]>,
}

fn draw_in_stratum<R: Rng>(rng: &mut R, stratum: usize, n: usize, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    lo + (stratum as f64 + u) / n as f64 * (hi - lo)
}

/// One point per stratum and dimension, with independent stratum permutations.
pub fn stratified_design<R: Rng>(n: usize, bounds: &[(f64, f64); N_DIMS], rng: &mut R) -> StratifiedDesign {
    let mut strata = vec![[0usize; N_DIMS]; n];
    for d in 0..N_DIMS {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (row, s) in strata.iter_mut().zip(perm) {
            row[d] = s;
        }
    }
    let points = strata
        .iter()
        .map(|s| {
            let mut c = [0.0; N_DIMS];
            for d in 0..N_DIMS {
                c[d] = draw_in_stratum(rng, s[d], n, bounds[d].0, bounds[d].1);
            }
            c
        })
        .collect();
    StratifiedDesign { points, strata }
}

/// Constrained Latin hypercube sample of `spec.n_points` conditions.
///
/// Points that violate a constraint have the offending coordinates redrawn
/// within their own strata; after [`MAX_REPAIR_ATTEMPTS`] failures the point
/// is replaced by an unstratified feasible draw.
pub fn lhc_sample(spec: &SurrogateSpaceSpec, seed: u64) -> Result<Vec<ConditionPoint>> {
    spec.validate()?;
    let n = spec.n_points;
    let bounds = spec.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = stratified_design(n, &bounds, &mut rng);

    let mut attempts = 0usize;
    let mut accepted = 0usize;
    let check = |c: &Coords, attempts: &mut usize, accepted: &mut usize| {
        *attempts += 1;
        let ok = spec.satisfies_constraints(c);
        if ok {
            *accepted += 1;
        }
        ok
    };
    let rate = |attempts: usize, accepted: usize| accepted as f64 / attempts.max(1) as f64;

    let temps = [Dim::TCold.index(), Dim::THot.index()];
    let mut out = Vec::with_capacity(n);
    for (mut c, strata) in design.points.into_iter().zip(design.strata) {
        let mut tries = 0;
        while !check(&c, &mut attempts, &mut accepted) && tries < MAX_REPAIR_ATTEMPTS {
            let delta_bad =
                c[temps[1]] + CONSTRAINT_EPS < c[temps[0]] + spec.min_delta_t;
            let redraw: &[usize] = if delta_bad { &temps } else { &Dim::ELEMENTS };
            for &d in redraw {
                c[d] = draw_in_stratum(&mut rng, strata[d], n, bounds[d].0, bounds[d].1);
            }
            tries += 1;
        }
        if !spec.satisfies_constraints(&c) {
            let mut replaced = false;
            for _ in 0..MAX_REPLACEMENT_ATTEMPTS {
                for d in 0..N_DIMS {
                    c[d] = rng.gen_range(bounds[d].0..=bounds[d].1);
                }
                if check(&c, &mut attempts, &mut accepted) {
                    replaced = true;
                    break;
                }
            }
            if !replaced {
                return Err(Error::Infeasible {
                    acceptance_rate: rate(attempts, accepted),
                });
            }
        }
        out.push(ConditionPoint::from_coords(&c, Provenance::Lhc));
    }
    if rate(attempts, accepted) < MIN_ACCEPTANCE_RATE {
        return Err(Error::Infeasible {
            acceptance_rate: rate(attempts, accepted),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Random walk

fn default_steps() -> usize {
    1
}
fn default_step_fraction() -> f64 {
    0.25
}
fn default_n_output() -> usize {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub n_walkers: usize,
    #[serde(default = "default_steps")]
    pub steps_per_walker: usize,
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
    #[serde(default = "default_n_output")]
    pub n_output: usize,
    #[serde(default)]
    pub anchor_points: Vec<ConditionPoint>,
}

impl WalkConfig {
    pub fn new(n_walkers: usize, anchor_points: Vec<ConditionPoint>) -> Self {
        Self {
            n_walkers,
            steps_per_walker: default_steps(),
            step_fraction: default_step_fraction(),
            n_output: default_n_output(),
            anchor_points,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.step_fraction) {
            return Err(Error::Invalid(format!(
                "step_fraction {} outside [0, 1]",
                self.step_fraction
            )));
        }
        if self.n_walkers == 0 || self.steps_per_walker == 0 || self.n_output == 0 {
            return Err(Error::Invalid("walker, step and output counts must be positive".into()));
        }
        if self.n_output > self.n_walkers * self.steps_per_walker {
            return Err(Error::Invalid(format!(
                "n_output {} exceeds n_walkers x steps_per_walker = {}",
                self.n_output,
                self.n_walkers * self.steps_per_walker
            )));
        }
        if self.anchor_points.is_empty() {
            return Err(Error::Invalid("random walk needs at least one anchor point".into()));
        }
        Ok(())
    }
}

/// Per-dimension clamp window of a walk: the anchor hull widened by the step
/// fraction, intersected with physical limits.
pub fn walk_window(config: &WalkConfig, spec: &SurrogateSpaceSpec) -> ([f64; N_DIMS], [f64; N_DIMS], [f64; N_DIMS]) {
    let f = config.step_fraction;
    let mut lo = [f64::INFINITY; N_DIMS];
    let mut hi = [f64::NEG_INFINITY; N_DIMS];
    for a in &config.anchor_points {
        for (d, v) in a.coords().into_iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let mut range = [0.0; N_DIMS];
    let mut min = [0.0; N_DIMS];
    let mut max = [0.0; N_DIMS];
    for dim in Dim::ALL {
        let d = dim.index();
        range[d] = hi[d] - lo[d];
        min[d] = lo[d] - f * range[d];
        max[d] = hi[d] + f * range[d];
        if dim.is_concentration() || dim == Dim::TCold {
            min[d] = min[d].max(0.0);
        }
        if dim.is_temperature() {
            let r = spec.range(dim);
            min[d] = min[d].max(r.min - f * r.width());
            max[d] = max[d].min(r.max + f * r.width());
        }
        if matches!(dim, Dim::FlowRate | Dim::SlurryConcentration) {
            min[d] = min[d].max(0.0);
        }
    }
    (min, max, range)
}

fn walk_point_valid(c: &Coords, spec: &SurrogateSpaceSpec) -> bool {
    let p = ConditionPoint::from_coords(c, Provenance::RandomWalk);
    spec.satisfies_constraints(c) && p.controls.validate().is_ok() && p.initial.validate().is_ok()
}

/// Random-walk verification sampler.
///
/// Every walker starts at a uniformly chosen anchor and takes
/// `steps_per_walker` uniform steps of at most `step_fraction` times the
/// anchor-set range in each dimension. Valid visited positions are pooled and
/// `n_output` of them are drawn without replacement.
pub fn random_walk(config: &WalkConfig, spec: &SurrogateSpaceSpec, seed: u64) -> Result<Vec<ConditionPoint>> {
    config.validate()?;
    spec.validate()?;
    for (i, a) in config.anchor_points.iter().enumerate() {
        if !spec.within_bounds(&a.coords()) {
            return Err(Error::Invalid(format!("anchor {i} lies outside space {}", spec.label)));
        }
    }
    let (min, max, range) = walk_window(config, spec);
    let f = config.step_fraction;
    let anchors: Vec<Coords> = config.anchor_points.iter().map(ConditionPoint::coords).collect();

    let visited: Vec<Vec<(Coords, usize)>> = (0..config.n_walkers)
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64 + 1);
            let origin = rng.gen_range(0..anchors.len());
            let mut pos = anchors[origin];
            let mut out = Vec::with_capacity(config.steps_per_walker);
            for _ in 0..config.steps_per_walker {
                for d in 0..N_DIMS {
                    if f > 0.0 && range[d] > 0.0 {
                        pos[d] += rng.gen_range(-f..=f) * range[d];
                    }
                    pos[d] = pos[d].clamp(min[d], max[d]);
                }
                if walk_point_valid(&pos, spec) {
                    out.push((pos, origin));
                }
            }
            out
        })
        .collect();
    let all: Vec<(Coords, usize)> = visited.into_iter().flatten().collect();
    if all.is_empty() {
        return Err(Error::Infeasible { acceptance_rate: 0.0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = if all.len() > config.n_output {
        let mut idx = rand::seq::index::sample(&mut rng, all.len(), config.n_output).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..all.len()).collect()
    };
    Ok(chosen
        .into_iter()
        .map(|i| {
            let (c, origin) = all[i];
            ConditionPoint::from_coords(&c, Provenance::RandomWalk).with_origin(origin)
        })
        .collect())
}

/// Writes points with one column per dimension plus `provenance` and `seed_origin`.
pub fn write_points_csv<W: Write>(sink: W, points: &[ConditionPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = Dim::ALL.iter().map(|d| d.name()).collect();
    header.extend(["provenance", "seed_origin"]);
    w.write_record(&header)?;
    for p in points {
        let mut row: Vec<String> = p.coords().iter().map(f64::to_string).collect();
        row.push(p.provenance.to_string());
        row.push(p.seed_origin.map(|o| o.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unconstrained(n: usize) -> SurrogateSpaceSpec {
        SurrogateSpaceSpec::from_bounds(
            "free",
            n,
            [
                (10.0, 40.0),
                (50.0, 90.0),
                (0.5, 6.0),
                (1.5, 10.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
                (0.0, 1000.0),
            ],
            0.0,
        )
    }

    fn space_a() -> SurrogateSpaceSpec {
        SurrogateSpaceSpec::from_bounds(
            "A",
            10_000,
            [
                (10.0, 60.0),
                (40.0, 80.0),
                (0.5, 6.0),
                (1.5, 10.0),
                (20_000.0, 200_000.0),
                (500.0, 2000.0),
                (20_000.0, 170_000.0),
                (100.0, 1000.0),
                (500.0, 15_000.0),
            ],
            20.0,
        )
    }

    #[test]
    fn single_point_lies_inside() {
        let mut spec = space_a();
        spec.n_points = 1;
        let pts = lhc_sample(&spec, 3).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(spec.contains(&pts[0].coords()));
    }

    #[test]
    fn stratification_without_constraints() {
        let spec = unconstrained(1000);
        let pts = lhc_sample(&spec, 11).unwrap();
        let bounds = spec.bounds();
        for d in 0..N_DIMS {
            let mut counts = vec![0usize; 1000];
            for p in &pts {
                let (lo, hi) = bounds[d];
                let bin = (((p.coords()[d] - lo) / (hi - lo)) * 1000.0).floor() as usize;
                counts[bin.min(999)] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1), "dimension {d}");
        }
        // coarse bins hold exactly n / bins samples
        let mut coarse = [0usize; 10];
        for p in &pts {
            coarse[((p.coords()[0] - 10.0) / 3.0).floor().min(9.0) as usize] += 1;
        }
        assert_eq!(coarse, [100; 10]);
    }

    #[test]
    fn constrained_sample_is_feasible_and_deterministic() {
        let mut spec = space_a();
        spec.n_points = 2000;
        let a = lhc_sample(&spec, 5).unwrap();
        let b = lhc_sample(&spec, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2000);
        assert!(a.iter().all(|p| spec.contains(&p.coords())));
    }

    #[test]
    fn infeasible_space_reports_rate() {
        let mut spec = space_a();
        spec.n_points = 10;
        spec.min_delta_t = 100.0;
        match lhc_sample(&spec, 1).unwrap_err() {
            Error::Infeasible { acceptance_rate } => assert!(acceptance_rate < 0.01),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = space_a();
        spec.set_range(Dim::InitMg, 5.0, 1.0);
        assert!(spec.validate().is_err());
        let mut spec = space_a();
        spec.dimensions.pop();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn repair_honours_constraints() {
        let spec = space_a();
        let mut c = [55.0, 41.0, 1.0, 2.0, 190_000.0, 1500.0, 160_000.0, 900.0, 14_000.0];
        let r = spec.repair(&c);
        assert!(spec.contains(&r), "{r:?}");
        c[Dim::TCold.index()] = 30.0;
        c[Dim::THot.index()] = 70.0;
        let r = spec.repair(&c);
        assert_eq!(r[0], 30.0);
        assert_eq!(r[1], 70.0);
    }

    fn anchors_1d(values: &[f64]) -> Vec<ConditionPoint> {
        values
            .iter()
            .map(|&v| {
                let mut c = [30.0, 70.0, 2.0, 3.0, 50_000.0, 1000.0, 100_000.0, v, 1000.0];
                c[Dim::InitMg.index()] = v;
                ConditionPoint::from_coords(&c, Provenance::Manual)
            })
            .collect()
    }

    fn walk_space() -> SurrogateSpaceSpec {
        let mut spec = space_a();
        spec.set_range(Dim::InitMg, 0.0, 100.0);
        spec
    }

    #[test]
    fn zero_step_returns_anchors() {
        let anchors = anchors_1d(&[10.0, 20.0]);
        let mut cfg = WalkConfig::new(50, anchors.clone());
        cfg.step_fraction = 0.0;
        cfg.n_output = 20;
        let out = random_walk(&cfg, &walk_space(), 1).unwrap();
        assert_eq!(out.len(), 20);
        for p in out {
            assert!(anchors.iter().any(|a| a.coords() == p.coords()));
        }
    }

    #[test]
    fn one_dimensional_hull_expansion() {
        let cfg = WalkConfig {
            n_walkers: 5000,
            steps_per_walker: 3,
            step_fraction: 0.25,
            n_output: 2000,
            anchor_points: anchors_1d(&[10.0, 20.0]),
        };
        let out = random_walk(&cfg, &walk_space(), 9).unwrap();
        assert_eq!(out.len(), 2000);
        let mg: Vec<f64> = out.iter().map(|p| p.initial.mg).collect();
        assert!(mg.iter().all(|&v| (7.5..=22.5).contains(&v)));
        // the window is actually explored
        assert!(mg.iter().any(|&v| v < 9.0) && mg.iter().any(|&v| v > 21.0));
    }

    #[test]
    fn walk_is_deterministic() {
        let cfg = WalkConfig {
            n_walkers: 300,
            steps_per_walker: 2,
            step_fraction: 0.25,
            n_output: 100,
            anchor_points: anchors_1d(&[10.0, 20.0, 40.0]),
        };
        let a = random_walk(&cfg, &walk_space(), 4).unwrap();
        let b = random_walk(&cfg, &walk_space(), 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn walk_rejects_bad_config() {
        let mut cfg = WalkConfig::new(10, Vec::new());
        cfg.n_output = 5;
        assert!(random_walk(&cfg, &walk_space(), 0).is_err());
        let mut cfg = WalkConfig::new(10, anchors_1d(&[10.0]));
        cfg.n_output = 11;
        assert!(random_walk(&cfg, &walk_space(), 0).is_err());
    }
}
