//! Experiment configuration: JSON schema, validation, and defaults.
//!
//! The on-disk format uses dB for powers and caps; everything handed to the
//! library is linear.  Validation failures name the offending field so a
//! config typo is a one-line fix.
//!
//! ```json
//! {
//!   "M": 4,
//!   "B": [2, 3],
//!   "P_avg_dB": 10.0,
//!   "Q_avg_dB": [-10, -5, 0, 5],
//!   "fading": {"interference": {"mean": 1.0}, "secondary": {"mean": 1.0}},
//!   "N_train": 100000,
//!   "N_eval": 100000,
//!   "seed": 1,
//!   "q_f": 0.0,
//!   "method": "gla",
//!   "restarts": 5,
//!   "tolerances": {"design_tol": 1e-6, "design_max_iter": 500},
//!   "sweep": {"start": -10.0, "stop": 20.0, "step": 5.0}
//! }
//! ```
//!
//! `B` (feedback bits, `L = 2^B`) or `L` (level count) may be a single value
//! or a list; `method` may be a single name or a list; `Q_avg_dB` entries may
//! be `null` for uncapped bands.  Defaults: `N_train = 100000`,
//! `N_eval = N_train`, `seed = 1`, `q_f = 0`, `method = "gla"`,
//! `restarts = 5`, design tolerances per the library defaults.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use specshare::db_to_linear;
use specshare::fading::{BandModels, FadingModel};
use specshare::full_csi::ConstraintSet;
use specshare::lloyd::{DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const DEFAULT_N: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_RESTARTS: usize = 5;
/// Largest supported level count (64 feedback bits would be absurd; 4096
/// levels already dwarfs every published scenario).
pub const MAX_LEVELS: usize = 4096;
/// Bit-labeled codebooks cap out where the index-confusion matrix would stop
/// fitting in memory.
pub const MAX_BITS: u32 = 12;

/// Allocation method selected by a subcommand or the config `method` field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fullcsi,
    Gla,
    Aqpa,
    Gla2,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fullcsi => "fullcsi",
            Method::Gla => "gla",
            Method::Aqpa => "aqpa",
            Method::Gla2 => "gla2",
        }
    }
}

/// One quantizer size: the level count plus its bit width when the count is a
/// power of two (required for feedback-error designs).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Quantizer {
    pub levels: usize,
    pub bits: Option<u32>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    mean: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFading {
    interference: Option<RawModel>,
    secondary: Option<RawModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    design_tol: Option<f64>,
    design_max_iter: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "B")]
    bits: Option<OneOrMany<u32>>,
    #[serde(rename = "L")]
    levels: Option<OneOrMany<usize>>,
    #[serde(rename = "P_avg_dB")]
    p_avg_db: Option<f64>,
    #[serde(rename = "Q_avg_dB")]
    q_avg_db: Option<Vec<Option<f64>>>,
    fading: Option<RawFading>,
    #[serde(rename = "N_train")]
    n_train: Option<usize>,
    #[serde(rename = "N_eval")]
    n_eval: Option<usize>,
    seed: Option<u64>,
    q_f: Option<f64>,
    method: Option<OneOrMany<Method>>,
    restarts: Option<usize>,
    tolerances: Option<RawTolerances>,
    sweep: Option<SweepSpec>,
}

/// A validated experiment description with defaults filled in.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub m: usize,
    /// Quantizer sizes to run for the quantized methods; may be empty when
    /// only the full-CSI benchmark is requested.
    pub quantizers: Vec<Quantizer>,
    pub p_avg_db: Option<f64>,
    pub q_avg_db: Vec<Option<f64>>,
    pub models: Vec<BandModels>,
    pub n_train: usize,
    pub n_eval: usize,
    pub seed: u64,
    pub q_f: f64,
    pub methods: Vec<Method>,
    pub restarts: usize,
    pub design_tol: f64,
    pub design_max_iter: usize,
    pub sweep: Option<SweepSpec>,
    /// The config as parsed, with the effective seed patched in; echoed into
    /// codebook files so they can be re-verified standalone.
    pub echo: Value,
}

fn fail(field: &str, detail: &str) -> String {
    format!("{field}: {detail}")
}

impl ExperimentConfig {
    /// Load and validate a config file.  `seed_override` (the `--seed` flag)
    /// replaces the config seed before anything derives from it.
    pub fn load(path: &std::path::Path, seed_override: Option<u64>) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("config {}: {e}", path.display()))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| format!("config is not valid JSON: {e}"))?;
        Self::from_value(value, seed_override)
    }

    /// Validate an already-parsed config document.
    pub fn from_value(mut value: Value, seed_override: Option<u64>) -> Result<Self, String> {
        let raw: RawConfig =
            serde_json::from_value(value.clone()).map_err(|e| format!("config schema: {e}"))?;

        let q_avg_db = raw.q_avg_db.ok_or_else(|| {
            fail("Q_avg_dB", "required (list of per-band caps in dB, null = uncapped)")
        })?;
        if q_avg_db.is_empty() {
            return Err(fail("Q_avg_dB", "needs at least one band entry"));
        }
        let m = match raw.m {
            None => q_avg_db.len(),
            Some(m) if m == q_avg_db.len() => m,
            Some(m) => {
                return Err(fail(
                    "Q_avg_dB",
                    &format!("expected {m} entries to match M, got {}", q_avg_db.len()),
                ))
            }
        };

        let q_f = raw.q_f.unwrap_or(0.0);
        if !(0.0..=0.5).contains(&q_f) {
            return Err(fail("q_f", &format!("must lie in [0, 0.5], got {q_f}")));
        }

        let quantizers = match (raw.bits, raw.levels) {
            (Some(_), Some(_)) => return Err(fail("B", "give either B or L, not both")),
            (Some(bits), None) => bits
                .into_vec()
                .into_iter()
                .map(|b| {
                    if !(1..=MAX_BITS).contains(&b) {
                        return Err(fail("B", &format!("must lie in 1..={MAX_BITS}, got {b}")));
                    }
                    Ok(Quantizer { levels: 1usize << b, bits: Some(b) })
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, Some(levels)) => levels
                .into_vec()
                .into_iter()
                .map(|l| {
                    if !(1..=MAX_LEVELS).contains(&l) {
                        return Err(fail("L", &format!("must lie in 1..={MAX_LEVELS}, got {l}")));
                    }
                    let bits = if l.is_power_of_two() && l > 1 {
                        Some(l.trailing_zeros())
                    } else {
                        None
                    };
                    if q_f > 0.0 && bits.is_none() {
                        return Err(fail(
                            "L",
                            &format!("must be a power of two when q_f > 0, got {l}"),
                        ));
                    }
                    Ok(Quantizer { levels: l, bits })
                })
                .collect::<Result<Vec<_>, _>>()?,
            (None, None) => Vec::new(),
        };

        let (mean0, mean1) = match raw.fading {
            None => (1.0, 1.0),
            Some(f) => (
                f.interference.map_or(1.0, |m| m.mean),
                f.secondary.map_or(1.0, |m| m.mean),
            ),
        };
        if !(mean0.is_finite() && mean0 > 0.0 && mean1.is_finite() && mean1 > 0.0) {
            return Err(fail("fading", "means must be positive and finite"));
        }
        let models = vec![
            BandModels {
                interference: FadingModel::Exponential { mean: mean0 },
                secondary: FadingModel::Exponential { mean: mean1 },
            };
            m
        ];

        let n_train = raw.n_train.unwrap_or(DEFAULT_N);
        let n_eval = raw.n_eval.unwrap_or(n_train);
        if n_train < 2 {
            return Err(fail("N_train", "needs at least 2 samples"));
        }
        if n_eval < 2 {
            return Err(fail("N_eval", "needs at least 2 samples"));
        }

        let restarts = raw.restarts.unwrap_or(DEFAULT_RESTARTS);
        if restarts == 0 {
            return Err(fail("restarts", "must be at least 1"));
        }

        let (design_tol, design_max_iter) = match raw.tolerances {
            None => (DEFAULT_TOL, DEFAULT_MAX_ITER),
            Some(t) => {
                let tol = t.design_tol.unwrap_or(DEFAULT_TOL);
                if !(tol.is_finite() && tol > 0.0) {
                    return Err(fail("tolerances", "design_tol must be positive"));
                }
                let max_iter = t.design_max_iter.unwrap_or(DEFAULT_MAX_ITER);
                if max_iter == 0 {
                    return Err(fail("tolerances", "design_max_iter must be at least 1"));
                }
                (tol, max_iter)
            }
        };

        if let Some(s) = raw.sweep {
            if !(s.step.is_finite() && s.step > 0.0) || !(s.stop >= s.start) {
                return Err(fail("sweep", "needs step > 0 and stop >= start"));
            }
            if (s.stop - s.start) / s.step > 10_000.0 {
                return Err(fail("sweep", "more than 10000 grid points"));
            }
        }

        let seed = seed_override.unwrap_or(raw.seed.unwrap_or(DEFAULT_SEED));
        if let Value::Object(map) = &mut value {
            map.insert("seed".into(), Value::from(seed));
        }

        Ok(ExperimentConfig {
            m,
            quantizers,
            p_avg_db: raw.p_avg_db,
            q_avg_db,
            models,
            n_train,
            n_eval,
            seed,
            q_f,
            methods: raw.method.map_or(vec![Method::Gla], OneOrMany::into_vec),
            restarts,
            design_tol,
            design_max_iter,
            sweep: raw.sweep,
            echo: value,
        })
    }

    /// Linear-unit constraints at a given power budget in dB.
    pub fn constraints(&self, p_avg_db: f64) -> ConstraintSet {
        ConstraintSet::new(
            db_to_linear(p_avg_db),
            self.q_avg_db.iter().map(|q| q.map(db_to_linear)).collect(),
        )
    }

    /// The budget grid of the sweep specification, inclusive of the stop
    /// point when the step divides the range.
    pub fn sweep_grid(&self) -> Option<Vec<f64>> {
        self.sweep.map(|s| {
            let n = ((s.stop - s.start) / s.step + 1e-9).floor() as usize;
            (0..=n).map(|i| s.start + i as f64 * s.step).collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn load(v: Value) -> Result<ExperimentConfig, String> {
        ExperimentConfig::from_value(v, None)
    }

    #[test]
    fn db_conversion_and_level_count() {
        let cfg = load(json!({"M":1,"B":3,"P_avg_dB":10,"Q_avg_dB":[-5]})).unwrap();
        assert_eq!(cfg.quantizers, vec![Quantizer { levels: 8, bits: Some(3) }]);
        let cons = cfg.constraints(cfg.p_avg_db.unwrap());
        assert!((cons.p_avg - 10.0).abs() < 1e-12);
        assert!((cons.q_avg[0].unwrap() - 0.316228).abs() < 1e-6);
    }

    #[test]
    fn unit_cap_and_inferred_band_count() {
        let cfg = load(json!({"Q_avg_dB":[0]})).unwrap();
        assert_eq!(cfg.m, 1);
        assert!((cfg.constraints(0.0).q_avg[0].unwrap() - 1.0).abs() < 1e-12);
        // Defaults fill in.
        assert_eq!(cfg.n_train, DEFAULT_N);
        assert_eq!(cfg.n_eval, DEFAULT_N);
        assert_eq!(cfg.seed, DEFAULT_SEED);
        assert_eq!(cfg.methods, vec![Method::Gla]);
    }

    #[test]
    fn missing_band_caps_named() {
        let err = load(json!({"M":4,"B":2,"P_avg_dB":10})).unwrap_err();
        assert!(err.contains("Q_avg_dB"), "{err}");
        let err = load(json!({"M":4,"B":2,"Q_avg_dB":[-5,0]})).unwrap_err();
        assert!(err.contains("Q_avg_dB"), "{err}");
    }

    #[test]
    fn bit_labeling_requires_power_of_two() {
        let err = load(json!({"L":6,"q_f":0.1,"Q_avg_dB":[0]})).unwrap_err();
        assert!(err.contains("L"), "{err}");
        // Without index errors any level count is fine.
        let cfg = load(json!({"L":6,"Q_avg_dB":[0]})).unwrap();
        assert_eq!(cfg.quantizers[0], Quantizer { levels: 6, bits: None });
    }

    #[test]
    fn unknown_fields_rejected() {
        let err = load(json!({"Q_avg_dB":[0],"frobnicate":1})).unwrap_err();
        assert!(err.contains("frobnicate"), "{err}");
    }

    #[test]
    fn seed_override_patches_echo() {
        let cfg = ExperimentConfig::from_value(json!({"Q_avg_dB":[0],"seed":5}), Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.echo["seed"], json!(9));
    }

    #[test]
    fn sweep_grid_is_inclusive() {
        let cfg = load(json!({"Q_avg_dB":[0],"sweep":{"start":-10.0,"stop":20.0,"step":5.0}}))
            .unwrap();
        let grid = cfg.sweep_grid().unwrap();
        assert_eq!(grid.len(), 7);
        assert_eq!(grid[0], -10.0);
        assert_eq!(grid[6], 20.0);
    }
}
