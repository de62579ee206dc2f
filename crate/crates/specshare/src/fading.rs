//! Channel-gain models and reproducible training sets.
//!
//! Each band has two fading channels: `g0`, the gain from the secondary
//! transmitter toward the protected primary receiver (what the interference
//! constraint prices), and `g1`, the gain of the secondary link being served
//! (what capacity is earned on).  Codebook design is data-driven, so both
//! are represented by a training set of i.i.d. draws.
//!
//! Reproducibility contract: a training set is a pure function of
//! `(models, n, seed)`.  Every `(band, role)` pair draws from its own
//! deterministic substream, so adding a band or swapping a model never
//! perturbs the other channels' samples, and regeneration is bit-identical
//! across platforms.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Marginal distribution of a channel power gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    /// Rayleigh-faded power gain: `Exponential(mean)`.
    Exponential { mean: f64 },
    /// Fixed list of gains, cycled in order.  Intended for tests and
    /// worked examples; has no density.
    Deterministic { values: Vec<f64> },
}

impl FadingModel {
    /// Unit-mean exponential fading, the default for both roles.
    pub fn unit_exponential() -> Self {
        FadingModel::Exponential { mean: 1.0 }
    }

    /// Check the model parameters.
    pub fn validate(&self) -> Result<()> {
        match self {
            FadingModel::Exponential { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return Err(Error::Config(format!(
                        "exponential mean must be positive and finite, got {mean}"
                    )));
                }
            }
            FadingModel::Deterministic { values } => {
                if values.is_empty() {
                    return Err(Error::Config("deterministic gain list is empty".into()));
                }
                if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::Config(format!(
                        "deterministic gains must be finite and nonnegative, got {bad}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean gain of the model.
    pub fn mean(&self) -> f64 {
        match self {
            FadingModel::Exponential { mean } => *mean,
            FadingModel::Deterministic { values } => {
                crate::numeric::mean(values)
            }
        }
    }
}

/// Density of the model at gain `g` (zero for negative `g`).
///
/// Deterministic models have no density and report [`Error::Unsupported`].
pub fn pdf_eval(model: &FadingModel, g: f64) -> Result<f64> {
    model.validate()?;
    match model {
        FadingModel::Exponential { mean } => {
            if g < 0.0 {
                Ok(0.0)
            } else {
                Ok((-g / mean).exp() / mean)
            }
        }
        FadingModel::Deterministic { .. } => Err(Error::Unsupported(
            "deterministic gain lists have no density".into(),
        )),
    }
}

/// The two fading models of one band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandModels {
    /// Gain toward the primary receiver (`g0`).
    pub interference: FadingModel,
    /// Gain of the secondary link (`g1`).
    pub secondary: FadingModel,
}

impl Default for BandModels {
    fn default() -> Self {
        BandModels {
            interference: FadingModel::unit_exponential(),
            secondary: FadingModel::unit_exponential(),
        }
    }
}

/// One jointly observed pair of gains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSample {
    pub g0: f64,
    pub g1: f64,
}

/// Per-band sample arrays (struct-of-arrays layout).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSamples {
    pub g0: Vec<f64>,
    pub g1: Vec<f64>,
}

/// Training samples for all bands, tagged with the seed that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub seed: u64,
    pub bands: Vec<BandSamples>,
}

/// Borrowed view of one band's samples.
#[derive(Clone, Copy, Debug)]
pub struct BandView<'a> {
    pub g0: &'a [f64],
    pub g1: &'a [f64],
}

impl TrainingSet {
    /// Number of bands.
    pub fn m(&self) -> usize {
        self.bands.len()
    }

    /// Samples per band.
    pub fn n(&self) -> usize {
        self.bands.first().map_or(0, |b| b.g0.len())
    }

    /// Borrow band `i`.
    pub fn band(&self, i: usize) -> BandView<'_> {
        BandView { g0: &self.bands[i].g0, g1: &self.bands[i].g1 }
    }
}

impl<'a> BandView<'a> {
    pub fn len(&self) -> usize {
        self.g0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g0.is_empty()
    }

    pub fn sample(&self, i: usize) -> ChannelSample {
        ChannelSample { g0: self.g0[i], g1: self.g1[i] }
    }

    /// View of an owned pair of slices (tests and callers with ad-hoc data).
    pub fn new(g0: &'a [f64], g1: &'a [f64]) -> Self {
        BandView { g0, g1 }
    }
}

/// Which of a band's two channels a stream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Interference = 0,
    Secondary = 1,
}

/// Draw `n` samples per band for every model pair.
///
/// Substream derivation: each `(seed, band, role)` triple keys its own
/// ChaCha8 stream (key = seed, band index, role id, and a fixed domain tag),
/// uniform doubles come from the top 53 bits of each 64-bit word, and
/// exponential gains use the inverse CDF `-mean * ln(1 - u)`.  All of these
/// steps are exactly specified, so training sets reproduce across platforms.
pub fn sample_training_set(models: &[BandModels], n: usize, seed: u64) -> Result<TrainingSet> {
    if n == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if models.is_empty() {
        return Err(Error::Config("at least one band model is required".into()));
    }
    let mut bands = Vec::with_capacity(models.len());
    for (b, pair) in models.iter().enumerate() {
        pair.interference.validate()?;
        pair.secondary.validate()?;
        bands.push(BandSamples {
            g0: draw(&pair.interference, n, seed, b as u32, Role::Interference),
            g1: draw(&pair.secondary, n, seed, b as u32, Role::Secondary),
        });
    }
    Ok(TrainingSet { seed, bands })
}

fn draw(model: &FadingModel, n: usize, seed: u64, band: u32, role: Role) -> Vec<f64> {
    match model {
        FadingModel::Deterministic { values } => {
            (0..n).map(|i| values[i % values.len()]).collect()
        }
        FadingModel::Exponential { mean } => {
            let mut rng = stream(seed, band, role);
            (0..n).map(|_| -mean * (-uniform53(&mut rng)).ln_1p()).collect()
        }
    }
}

fn stream(seed: u64, band: u32, role: Role) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&band.to_le_bytes());
    key[12] = role as u8;
    key[13..29].copy_from_slice(b"specshare.fading");
    ChaCha8Rng::from_seed(key)
}

/// Uniform in `[0, 1)` with 53 random bits.
fn uniform53(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
