//! Personality and asset-class algebra: canonical coefficient tables, prior
//! construction, preference vectors and the satisfaction index.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::market::{EpisodeResult, PortfolioState};

/// Tolerance for a prior to count as a point on the simplex.
pub const PRIOR_SUM_TOL: f64 = 1e-9;

pub const PERSONALITY_CSV_HEADER: [&str; 6] = [
    "customer_id",
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
];

/// The five personality traits, in vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trait {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl Trait {
    pub const ALL: [Trait; 5] = [
        Trait::Openness,
        Trait::Conscientiousness,
        Trait::Extraversion,
        Trait::Agreeableness,
        Trait::Neuroticism,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Trait::Openness => "openness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Extraversion => "extraversion",
            Trait::Agreeableness => "agreeableness",
            Trait::Neuroticism => "neuroticism",
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl std::str::FromStr for Trait {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|t| t.name() == lower || t.name()[..1] == lower)
            .ok_or_else(|| Error::Contract(format!("unknown trait '{s}'")))
    }
}

impl std::fmt::Display for Trait {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Degrees of membership in each trait, each in [0, 1] and not all zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PersonalityVector([f64; 5]);

impl PersonalityVector {
    pub fn new(traits: [f64; 5]) -> Result<Self> {
        if traits.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Contract(format!("personality {traits:?} has a component outside [0, 1]")));
        }
        if traits.iter().all(|v| *v == 0.0) {
            return Err(Error::DegeneratePrior("personality vector is all zeros".into()));
        }
        Ok(Self(traits))
    }

    pub fn one_hot(t: Trait) -> Self {
        let mut v = [0.0; 5];
        v[t.index()] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn get(&self, t: Trait) -> f64 {
        self.0[t.index()]
    }

    pub fn dominant_trait(&self) -> Trait {
        Trait::ALL[argmax(&self.0)]
    }
}

/// Asset-by-trait coefficients, rows in asset order, columns in trait order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraitAssetCoefficients([[f64; 5]; 5]);

impl TraitAssetCoefficients {
    pub fn new(rows: [[f64; 5]; 5]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Contract("trait-asset coefficients must lie in [-1, 1]".into()));
        }
        Ok(Self(rows))
    }

    /// Expert-panel coefficients relating savings, property, stocks, luxury
    /// and mortgage (rows) to the five traits (columns).
    pub fn canonical() -> Self {
        Self([
            [-0.11, 0.08, -0.15, 0.51, 0.68],
            [-0.15, 0.32, -0.22, -0.36, -0.24],
            [0.82, -0.61, 0.95, 0.42, 0.12],
            [0.16, -0.51, -0.07, -0.80, -0.81],
            [-0.72, 0.72, -0.52, 0.23, 0.25],
        ])
    }

    pub fn rows(&self) -> &[[f64; 5]; 5] {
        &self.0
    }

    pub fn column(&self, t: Trait) -> [f64; 5] {
        self.0.map(|row| row[t.index()])
    }
}

/// Property-by-trait association scores in {−2, …, 2}. Rows: expected
/// returns, liquidity, low capital prerequisite, low risk, novelty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AssetPropertyAssociations([[i8; 5]; 5]);

impl AssetPropertyAssociations {
    pub fn new(rows: [[i8; 5]; 5]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !(-2..=2).contains(v)) {
            return Err(Error::Contract("associations must lie in {-2, ..., 2}".into()));
        }
        Ok(Self(rows))
    }

    pub fn canonical() -> Self {
        Self([
            [1, 1, 2, 1, 1],
            [2, -1, 2, 1, 2],
            [0, -1, 1, 1, 1],
            [-1, 2, -1, 1, 2],
            [2, 0, 2, 0, -1],
        ])
    }

    pub fn rows(&self) -> &[[i8; 5]; 5] {
        &self.0
    }
}

/// Non-negative weights summing to one: over asset classes for a prototype,
/// over prototypes for an orchestrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffinityPrior([f64; 5]);

impl AffinityPrior {
    pub fn new(weights: [f64; 5]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Contract(format!("prior {weights:?} has a negative or non-finite weight")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > PRIOR_SUM_TOL {
            return Err(Error::Contract(format!("prior {weights:?} sums to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform() -> Self {
        Self([0.2; 5])
    }

    pub fn weights(&self) -> &[f64; 5] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Published orchestration priors for the four reference customers A to D.
pub const REFERENCE_CUSTOMER_PRIORS: [(&str, [f64; 5]); 4] = [
    ("A", [0.22, 0.24, 0.14, 0.15, 0.25]),
    ("B", [0.30, 0.01, 0.23, 0.11, 0.35]),
    ("C", [0.27, 0.04, 0.26, 0.23, 0.20]),
    ("D", [0.23, 0.12, 0.27, 0.25, 0.13]),
];

/// Per-asset scores for one customer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreferenceVector(pub [f64; 5]);

impl PreferenceVector {
    pub fn values(&self) -> &[f64; 5] {
        &self.0
    }
}

/// Shift the trait's column so its minimum is zero, then normalize to unit sum.
pub fn prototype_prior(coefficients: &TraitAssetCoefficients, t: Trait) -> Result<AffinityPrior> {
    let column = coefficients.column(t);
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted = column.map(|c| c - min);
    let total: f64 = shifted.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePrior(format!("{t} column is constant")));
    }
    Ok(AffinityPrior(shifted.map(|s| s / total)))
}

pub fn orchestration_prior(p: &PersonalityVector) -> Result<AffinityPrior> {
    let total: f64 = p.0.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePrior("personality vector sums to zero".into()));
    }
    Ok(AffinityPrior(p.0.map(|v| v / total)))
}

pub fn preference_vector(p: &PersonalityVector, coefficients: &TraitAssetCoefficients) -> PreferenceVector {
    PreferenceVector(coefficients.0.map(|row| row.iter().zip(&p.0).map(|(c, v)| c * v).sum()))
}

/// Holdings in millions of NOK dotted with the preference vector.
pub fn satisfaction_reward(state: &PortfolioState, pref: &PreferenceVector) -> f64 {
    state
        .holdings()
        .iter()
        .zip(&pref.0)
        .map(|(h, w)| h / 1e6 * w)
        .sum()
}

/// Satisfaction at the final month of the episode.
pub fn satisfaction_index(episode: &EpisodeResult, pref: &PreferenceVector) -> Result<f64> {
    episode
        .final_state()
        .map(|s| satisfaction_reward(s, pref))
        .ok_or_else(|| Error::Contract("satisfaction index of an empty episode".into()))
}

/// Illustrative coefficient pipeline: `rankings` (assets × properties, each
/// in [0, 1]) times the association table, rescaled by its largest magnitude
/// into [−1, 1]. The expert rankings behind the canonical table are not
/// public, so this does not reproduce [`TraitAssetCoefficients::canonical`].
pub fn compose_coefficients(assoc: &AssetPropertyAssociations, rankings: &[[f64; 5]; 5]) -> Result<TraitAssetCoefficients> {
    if rankings.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Contract("rankings must lie in [0, 1]".into()));
    }
    let mut raw = [[0.0; 5]; 5];
    for (asset, out) in raw.iter_mut().enumerate() {
        for (t, cell) in out.iter_mut().enumerate() {
            *cell = (0..5).map(|prop| rankings[asset][prop] * f64::from(assoc.0[prop][t])).sum();
        }
    }
    let scale = raw.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale > 0.0 {
        raw.iter_mut().flatten().for_each(|v| *v /= scale);
    }
    Ok(TraitAssetCoefficients(raw))
}

/// A named customer personality as read from the personality CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CustomerPersonality {
    pub id: String,
    pub personality: PersonalityVector,
}

#[derive(Deserialize)]
struct PersonalityRow {
    customer_id: String,
    openness: f64,
    conscientiousness: f64,
    extraversion: f64,
    agreeableness: f64,
    neuroticism: f64,
}

/// Parses personality records; a header-only input yields an empty list.
pub fn parse_personalities(text: &str) -> Result<Vec<CustomerPersonality>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
    if header.iter().collect::<Vec<_>>() != PERSONALITY_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header '{}'", PERSONALITY_CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<PersonalityRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let personality = PersonalityVector::new([
            row.openness,
            row.conscientiousness,
            row.extraversion,
            row.agreeableness,
            row.neuroticism,
        ])
        .map_err(|e| Error::Parse {
            line: out.len() + 2,
            msg: e.to_string(),
        })?;
        out.push(CustomerPersonality {
            id: row.customer_id,
            personality,
        });
    }
    Ok(out)
}

pub fn load_personalities(path: &Path) -> Result<Vec<CustomerPersonality>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_personalities(&text)
}

pub fn personalities_to_csv(customers: &[CustomerPersonality]) -> String {
    let mut out = PERSONALITY_CSV_HEADER.join(",");
    out.push('\n');
    for c in customers {
        let v = c.personality.values();
        out.push_str(&format!("{},{},{},{},{},{}\n", c.id, v[0], v[1], v[2], v[3], v[4]));
    }
    out
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
