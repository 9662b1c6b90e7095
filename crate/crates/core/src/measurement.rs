//! Measurement settings, Born probabilities and simulated count data.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::density::{CMatrix, CVector, DensityMatrix};
use crate::error::{Result, TomoError};
use crate::linear::DesignCache;
use crate::pauli::Pauli;
use crate::rng::rng_from_seed;

/// One rank-one projector `|m><m|`.
#[derive(Debug, Clone)]
pub struct Projector {
    /// Outcome label within its setting, e.g. `"01"`.
    pub label: String,
    pub setting: usize,
    pub vector: CVector,
}

#[derive(Debug, Clone)]
pub struct Setting {
    pub label: String,
    /// Indices of this setting's projectors.
    pub range: Range<usize>,
    /// Per-qubit Pauli basis when this is a product (cube) setting.
    pub bases: Option<Vec<Pauli>>,
}

/// Rank-one projectors grouped into complete measurement settings.
#[derive(Debug)]
pub struct ProjectorSet {
    n: usize,
    projectors: Vec<Projector>,
    settings: Vec<Setting>,
    /// Projector vectors as columns, for batched probability evaluation.
    columns: CMatrix,
    pub(crate) design: OnceLock<DesignCache>,
}

impl ProjectorSet {
    /// Builds a set from explicit settings of `(label, outcomes)`. Vectors are
    /// validated for normalization and each setting for completeness.
    pub fn new(n: usize, settings: Vec<(String, Vec<(String, CVector)>)>) -> Result<Self> {
        let built = settings.into_iter().map(|(label, outcomes)| (label, None, outcomes)).collect();
        Self::build(n, built)
    }

    fn build(n: usize, settings: Vec<(String, Option<Vec<Pauli>>, Vec<(String, CVector)>)>) -> Result<Self> {
        let dim = 1usize << n;
        let mut projectors = Vec::new();
        let mut meta = Vec::with_capacity(settings.len());
        for (s, (label, bases, outcomes)) in settings.into_iter().enumerate() {
            let start = projectors.len();
            let mut sum = CMatrix::zeros(dim, dim);
            for (outcome, vector) in outcomes {
                if vector.len() != dim {
                    return Err(TomoError::DimensionMismatch { expected: dim, actual: vector.len() });
                }
                if (vector.norm() - 1.0).abs() > 1e-12 {
                    return Err(TomoError::Schema {
                        field: format!("{label}:{outcome}"),
                        message: "projector vector is not normalized".into(),
                    });
                }
                sum += &vector * vector.adjoint();
                projectors.push(Projector { label: outcome, setting: s, vector });
            }
            let completeness = (sum - CMatrix::identity(dim, dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if completeness > 1e-10 {
                return Err(TomoError::Schema {
                    field: label,
                    message: format!("setting projectors do not sum to identity (deviation {completeness:e})"),
                });
            }
            meta.push(Setting { label, range: start..projectors.len(), bases });
        }
        let columns = CMatrix::from_fn(dim, projectors.len(), |r, c| projectors[c].vector[r]);
        Ok(Self { n, projectors, settings: meta, columns, design: OnceLock::new() })
    }

    /// Product settings from labels such as `"XZ"`, each with all `2^n`
    /// outcomes in binary order.
    pub fn from_setting_labels<S: AsRef<str>>(n: usize, labels: &[S]) -> Result<Self> {
        let mut settings = Vec::with_capacity(labels.len());
        for label in labels {
            let bases = parse_setting_label(n, label.as_ref())?;
            let outcomes = (0..1usize << n)
                .map(|o| (outcome_label(n, o), product_eigenvector(&bases, o)))
                .collect();
            settings.push((label.as_ref().to_string(), Some(bases), outcomes));
        }
        Self::build(n, settings)
    }

    pub fn qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// True when every setting is a full product basis of Pauli eigenstates.
    pub fn is_product_basis(&self) -> bool {
        self.settings.iter().all(|s| s.bases.is_some() && s.range.len() == self.dim())
    }

    pub fn setting_index(&self, label: &str) -> Option<usize> {
        self.settings.iter().position(|s| s.label.eq_ignore_ascii_case(label))
    }

    /// Projector vectors as the columns of a `2^n x J` matrix.
    pub fn columns(&self) -> &CMatrix {
        &self.columns
    }

    /// `<m_j| m |m_j>` for every projector, without clipping. Valid for any
    /// Hermitian `m`, physical or not.
    pub fn expectations(&self, m: &CMatrix) -> Vec<f64> {
        let image = m * &self.columns;
        self.columns
            .column_iter()
            .zip(image.column_iter())
            .map(|(v, w)| v.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum())
            .collect()
    }
}

/// The `3^n` cube settings `{X,Y,Z}^n` in lexicographic order, `2^n`
/// outcomes each.
pub fn cube_projectors(n: usize) -> ProjectorSet {
    let labels: Vec<String> = (0..3usize.pow(n as u32))
        .map(|mut s| {
            let mut chars = vec!['X'; n];
            for q in (0..n).rev() {
                chars[q] = ['X', 'Y', 'Z'][s % 3];
                s /= 3;
            }
            chars.into_iter().collect()
        })
        .collect();
    ProjectorSet::from_setting_labels(n, &labels).expect("cube labels are well formed")
}

fn parse_setting_label(n: usize, label: &str) -> Result<Vec<Pauli>> {
    let bases: Option<Vec<Pauli>> = label
        .chars()
        .map(|c| Pauli::from_symbol(c).filter(|&p| p != Pauli::I))
        .collect();
    match bases {
        Some(b) if b.len() == n => Ok(b),
        _ => Err(TomoError::UnknownProjectorLabel { label: label.to_string() }),
    }
}

fn outcome_label(n: usize, outcome: usize) -> String {
    (0..n).map(|q| if (outcome >> (n - 1 - q)) & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_outcome_label(n: usize, label: &str) -> Option<usize> {
    if label.len() != n || !label.chars().all(|c| c == '0' || c == '1') {
        return None;
    }
    usize::from_str_radix(label, 2).ok()
}

/// Tensor product of single-qubit eigenstates; bit 0 selects the +1
/// eigenvector of each basis.
fn product_eigenvector(bases: &[Pauli], outcome: usize) -> CVector {
    let n = bases.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVector::from_element(1, Complex64::new(1.0, 0.0));
    for (q, basis) in bases.iter().enumerate() {
        let minus = (outcome >> (n - 1 - q)) & 1 == 1;
        let (a, b) = match (basis, minus) {
            (Pauli::Z, false) => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            (Pauli::Z, true) => (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            (Pauli::X, false) => (Complex64::new(h, 0.0), Complex64::new(h, 0.0)),
            (Pauli::X, true) => (Complex64::new(h, 0.0), Complex64::new(-h, 0.0)),
            (Pauli::Y, false) => (Complex64::new(h, 0.0), Complex64::new(0.0, h)),
            (Pauli::Y, true) => (Complex64::new(h, 0.0), Complex64::new(0.0, -h)),
            (Pauli::I, _) => unreachable!("identity is not a measurement basis"),
        };
        v = v.kronecker(&CVector::from_row_slice(&[a, b]));
    }
    v
}

/// Exact outcome probabilities `<m_j|rho|m_j>`, clipped to `[0, 1]`.
pub fn born_probabilities(state: &DensityMatrix, ps: &ProjectorSet) -> Result<Vec<f64>> {
    if state.dim() != ps.dim() {
        return Err(TomoError::DimensionMismatch { expected: ps.dim(), actual: state.dim() });
    }
    Ok(ps.expectations(state.matrix()).into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    /// Per-outcome Gaussian with multinomial-matched variance, clipped and
    /// renormalized per setting.
    #[default]
    Gaussian,
    /// Exact multinomial sampling per setting.
    Multinomial,
    /// No sampling noise.
    Exact,
}

impl std::str::FromStr for NoiseModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "multinomial" => Ok(Self::Multinomial),
            "exact" | "none" => Ok(Self::Exact),
            other => Err(format!("unknown noise model `{other}`")),
        }
    }
}

impl std::fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Gaussian => "gaussian",
            Self::Multinomial => "multinomial",
            Self::Exact => "exact",
        })
    }
}

/// Observed outcome frequencies for every projector of a [`ProjectorSet`].
#[derive(Debug, Clone)]
pub struct CountRecord {
    pub projectors: Arc<ProjectorSet>,
    /// Shots per setting, indexed like `projectors.settings()`.
    pub shots: Vec<u64>,
    /// Observed probability per projector, normalized within each setting.
    pub probabilities: Vec<f64>,
    /// Raw (possibly fractional) counts per projector.
    pub counts: Vec<f64>,
}

impl CountRecord {
    /// Builds a record from raw counts, normalizing probabilities per setting.
    pub fn from_counts(projectors: Arc<ProjectorSet>, shots: Vec<u64>, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != projectors.len() {
            return Err(TomoError::DimensionMismatch { expected: projectors.len(), actual: counts.len() });
        }
        if shots.len() != projectors.settings().len() {
            return Err(TomoError::DimensionMismatch { expected: projectors.settings().len(), actual: shots.len() });
        }
        let mut probabilities = vec![0.0; counts.len()];
        for setting in projectors.settings() {
            let total: f64 = counts[setting.range.clone()].iter().sum();
            if !(total > 0.0) {
                return Err(TomoError::Schema {
                    field: setting.label.clone(),
                    message: "setting has no counts".into(),
                });
            }
            for j in setting.range.clone() {
                probabilities[j] = counts[j] / total;
            }
        }
        Ok(Self { projectors, shots, probabilities, counts })
    }

    /// Uses exact probabilities as observations (`S -> infinity`).
    pub fn exact(state: &DensityMatrix, projectors: Arc<ProjectorSet>, shots_per_setting: u64) -> Result<Self> {
        let probabilities = born_probabilities(state, &projectors)?;
        let settings = projectors.settings().len();
        let counts = probabilities.iter().map(|p| p * shots_per_setting as f64).collect();
        Ok(Self { projectors, shots: vec![shots_per_setting; settings], probabilities, counts })
    }

    pub fn qubits(&self) -> usize {
        self.projectors.qubits()
    }

    /// `N`, the sum of shots over all settings.
    pub fn total_counts(&self) -> u64 {
        self.shots.iter().sum()
    }

    /// The common shot count, if every setting has the same.
    pub fn shots_per_setting(&self) -> Option<u64> {
        let first = *self.shots.first()?;
        self.shots.iter().all(|&s| s == first).then_some(first)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CountRecordJson::from(self))?)
    }

    /// Parses the ingestion format. Settings must carry product labels such
    /// as `"XZ"`; omitted outcomes count as zero.
    pub fn from_json(text: &str) -> Result<Self> {
        let json: CountRecordJson = serde_json::from_str(text)?;
        json.into_record()
    }
}

/// Wire format shared by simulated output and externally measured data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecordJson {
    pub n: usize,
    pub settings: Vec<SettingJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingJson {
    pub label: String,
    pub shots: u64,
    pub outcomes: Vec<OutcomeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeJson {
    pub label: String,
    pub count: f64,
}

impl From<&CountRecord> for CountRecordJson {
    fn from(cr: &CountRecord) -> Self {
        let settings = cr
            .projectors
            .settings()
            .iter()
            .zip(&cr.shots)
            .map(|(s, &shots)| SettingJson {
                label: s.label.clone(),
                shots,
                outcomes: s
                    .range
                    .clone()
                    .map(|j| OutcomeJson { label: cr.projectors.projectors()[j].label.clone(), count: cr.counts[j] })
                    .collect(),
            })
            .collect();
        Self { n: cr.qubits(), settings }
    }
}

impl CountRecordJson {
    pub fn into_record(self) -> Result<CountRecord> {
        let n = self.n;
        if n == 0 || n > crate::states::MAX_QUBITS {
            return Err(TomoError::Schema { field: "n".into(), message: format!("unsupported qubit count {n}") });
        }
        if self.settings.is_empty() {
            return Err(TomoError::Schema { field: "settings".into(), message: "no settings".into() });
        }
        let mut seen = HashMap::new();
        for (i, s) in self.settings.iter().enumerate() {
            if let Some(prev) = seen.insert(s.label.to_ascii_uppercase(), i) {
                return Err(TomoError::Schema {
                    field: format!("settings[{i}].label"),
                    message: format!("duplicate setting `{}` (also settings[{prev}])", s.label),
                });
            }
        }
        let labels: Vec<&str> = self.settings.iter().map(|s| s.label.as_str()).collect();
        let ps = Arc::new(ProjectorSet::from_setting_labels(n, &labels)?);
        let dim = 1usize << n;
        let mut counts = vec![0.0; ps.len()];
        let mut shots = Vec::with_capacity(self.settings.len());
        for (i, s) in self.settings.iter().enumerate() {
            if s.shots == 0 {
                return Err(TomoError::Schema { field: format!("settings[{i}].shots"), message: "must be positive".into() });
            }
            shots.push(s.shots);
            let mut filled = vec![false; dim];
            for (k, o) in s.outcomes.iter().enumerate() {
                let field = format!("settings[{i}].outcomes[{k}]");
                let Some(idx) = parse_outcome_label(n, &o.label) else {
                    return Err(TomoError::UnknownProjectorLabel { label: format!("{}:{}", s.label, o.label) });
                };
                if !(o.count >= 0.0 && o.count.is_finite()) {
                    return Err(TomoError::Schema { field: format!("{field}.count"), message: "must be finite and non-negative".into() });
                }
                if std::mem::replace(&mut filled[idx], true) {
                    return Err(TomoError::Schema { field: format!("{field}.label"), message: format!("duplicate outcome `{}`", o.label) });
                }
                counts[i * dim + idx] = o.count;
            }
        }
        CountRecord::from_counts(ps, shots, counts)
    }
}

/// Simulates `shots_per_setting` repetitions of every setting.
///
/// With [`NoiseModel::Gaussian`] each observed probability is
/// `clip(p + g, 0, 1)` with `g ~ N(0, sqrt(p(1-p)/S))`, renormalized within
/// its setting.
pub fn simulate_counts(
    state: &DensityMatrix,
    ps: &Arc<ProjectorSet>,
    shots_per_setting: u64,
    seed: u64,
    noise: NoiseModel,
) -> Result<CountRecord> {
    if shots_per_setting == 0 {
        return Err(TomoError::InvalidRecipe("shots_per_setting must be at least 1".into()));
    }
    let exact = born_probabilities(state, ps)?;
    let shots = shots_per_setting as f64;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0.0; exact.len()];

    for setting in ps.settings() {
        let range = setting.range.clone();
        match noise {
            NoiseModel::Exact => {
                for j in range {
                    counts[j] = exact[j] * shots;
                }
            }
            NoiseModel::Gaussian => {
                let mut observed: Vec<f64> =
                    exact[range.clone()].iter().map(|&p| gaussian_observation(p, shots, &mut rng)).collect();
                let total: f64 = observed.iter().sum();
                if total > 0.0 {
                    observed.iter_mut().for_each(|o| *o /= total);
                } else {
                    let uniform = 1.0 / observed.len() as f64;
                    observed.iter_mut().for_each(|o| *o = uniform);
                }
                for (j, o) in range.zip(observed) {
                    counts[j] = o * shots;
                }
            }
            NoiseModel::Multinomial => {
                // Sequential conditional binomials.
                let mut remaining = shots_per_setting;
                let mut mass = 1.0f64;
                let last = range.end - 1;
                for j in range {
                    if remaining == 0 {
                        break;
                    }
                    if j == last {
                        counts[j] = remaining as f64;
                        break;
                    }
                    let q = if mass > 0.0 { (exact[j] / mass).clamp(0.0, 1.0) } else { 0.0 };
                    let k = Binomial::new(remaining, q).expect("valid binomial").sample(&mut rng);
                    counts[j] = k as f64;
                    remaining -= k;
                    mass -= exact[j];
                }
            }
        }
    }
    CountRecord::from_counts(Arc::clone(ps), vec![shots_per_setting; ps.settings().len()], counts)
}

/// `clip(p + g, 0, 1)` with `g ~ N(0, sqrt(p(1-p)/shots))`.
pub fn gaussian_observation<R: Rng + ?Sized>(p: f64, shots: f64, rng: &mut R) -> f64 {
    let sigma = (p * (1.0 - p) / shots).max(0.0).sqrt();
    let g = if sigma > 0.0 { Normal::new(0.0, sigma).expect("finite sigma").sample(rng) } else { 0.0 };
    (p + g).clamp(0.0, 1.0)
}

/// Per-setting shots for a total budget `N` split evenly over the settings.
pub fn shots_for_total(ps: &ProjectorSet, total_counts: f64) -> u64 {
    (total_counts / ps.settings().len() as f64).round().max(1.0) as u64
}
