use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ExternalFactorFrame;
use crate::stmap::{MinMaxScaler, StMap};
use crate::tensor::Tensor;

/// Which external factors feed the fusion branch. With nothing selected the
/// branch is disabled and the decoder sees the demand code alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSelection {
    pub poi: bool,
    pub weekday: bool,
    pub weather: bool,
}

impl FactorSelection {
    pub const ALL: Self = Self {
        poi: true,
        weekday: true,
        weather: true,
    };
    pub const NONE: Self = Self {
        poi: false,
        weekday: false,
        weather: false,
    };

    pub fn any(&self) -> bool {
        self.poi || self.weekday || self.weather
    }

    /// The ablation variants: PoI; PoI + weekday; PoI + weekday + weather;
    /// and no factors.
    pub fn variants() -> [(&'static str, Self); 4] {
        [
            (
                "ExF1",
                Self {
                    poi: true,
                    weekday: false,
                    weather: false,
                },
            ),
            (
                "ExF2",
                Self {
                    poi: true,
                    weekday: true,
                    weather: false,
                },
            ),
            ("ExF3", Self::ALL),
            ("ExF3_w", Self::NONE),
        ]
    }
}

impl Default for FactorSelection {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSpec {
    pub rows: usize,
    pub cols: usize,
    pub seq_len: usize,
    pub conv_lstm_filters: Vec<usize>,
    pub conv3d_channels: usize,
    pub latent_dim: usize,
    pub factor_latent_dim: usize,
    pub mlp_hidden: Vec<usize>,
    pub decoder_seed_steps: usize,
    pub decoder_seed_channels: usize,
    pub dropout: f64,
    pub forget_bias: f64,
    pub factors: FactorSelection,
    /// Number of weather features per frame the model was built for.
    pub weather_arity: usize,
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            rows: 9,
            cols: 9,
            seq_len: 24,
            conv_lstm_filters: vec![32, 16, 8, 4],
            conv3d_channels: 4,
            latent_dim: 64,
            factor_latent_dim: 16,
            mlp_hidden: vec![128],
            decoder_seed_steps: 4,
            decoder_seed_channels: 1,
            dropout: 0.4,
            forget_bias: 1.0,
            factors: FactorSelection::ALL,
            weather_arity: 2,
        }
    }
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("grid must be non-empty, got {}×{}", self.rows, self.cols));
        }
        if self.seq_len == 0 {
            return bad("seq_len must be at least 1".into());
        }
        if self.conv_lstm_filters.is_empty() || self.conv_lstm_filters.contains(&0) {
            return bad("need at least one ConvLSTM layer with a positive filter count".into());
        }
        if self.latent_dim == 0 || self.conv3d_channels == 0 {
            return bad("latent_dim and conv3d_channels must be at least 1".into());
        }
        if self.factors.any() && self.factor_latent_dim == 0 {
            return bad("factor_latent_dim must be at least 1 when factors are enabled".into());
        }
        if self.mlp_hidden.contains(&0) {
            return bad("MLP widths must be positive".into());
        }
        if self.decoder_seed_steps == 0 || self.decoder_seed_channels == 0 {
            return bad("decoder seed volume must be non-empty".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.factors.weather && self.weather_arity == 0 {
            return bad("weather factors selected but weather_arity is 0".into());
        }
        Ok(())
    }

    pub fn regions(&self) -> usize {
        self.rows * self.cols
    }

    pub fn factors_enabled(&self) -> bool {
        self.factors.any()
    }

    /// Channels of the per-slot factor volume.
    pub fn factor_channels(&self) -> usize {
        let f = self.factors;
        usize::from(f.poi) + usize::from(f.weekday) + if f.weather { self.weather_arity } else { 0 }
    }

    /// Width of the fused code fed to the decoder and paired in the discriminator.
    pub fn fused_dim(&self) -> usize {
        self.latent_dim
            + if self.factors_enabled() {
                self.factor_latent_dim
            } else {
                0
            }
    }
}

/// Min-Max scaling for factor channels: one range for PoI (global), one per
/// weather feature. The weekend flag is already 0/1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScaler {
    pub poi: MinMaxScaler,
    pub weather: Vec<MinMaxScaler>,
}

impl FactorScaler {
    pub fn identity(weather_arity: usize) -> Self {
        let unit = MinMaxScaler {
            data_min: 0.0,
            data_max: 1.0,
        };
        Self {
            poi: unit,
            weather: vec![unit; weather_arity],
        }
    }

    pub fn fit(frames: &[ExternalFactorFrame]) -> Result<Self> {
        let first = frames.first().ok_or(Error::NoTrainingData)?;
        let arity = first.weather.len();
        let range = |vals: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            MinMaxScaler {
                data_min: lo,
                data_max: hi,
            }
        };
        let poi = range(&mut frames.iter().flat_map(|f| f.poi.iter().copied()));
        let mut weather = Vec::with_capacity(arity);
        for k in 0..arity {
            if frames.iter().any(|f| f.weather.len() != arity) {
                return Err(Error::Data("weather arity varies across frames".into()));
            }
            weather.push(range(&mut frames.iter().map(|f| f.weather[k])));
        }
        Ok(Self { poi, weather })
    }
}

/// Packs normalized history windows into `(b, T, m, n, 1)`.
pub fn history_tensor(arch: &ArchSpec, windows: &[&[StMap]]) -> Result<Tensor> {
    let (t, m) = (arch.seq_len, arch.regions());
    let mut data = Vec::with_capacity(windows.len() * t * m);
    for w in windows {
        if w.len() != t {
            return Err(Error::shape("history", &[t], &[w.len()]));
        }
        for map in *w {
            if map.rows != arch.rows || map.cols != arch.cols {
                return Err(Error::shape("history map", &[arch.rows, arch.cols], &[map.rows, map.cols]));
            }
            data.extend_from_slice(&map.values);
        }
    }
    Tensor::new(vec![windows.len(), t, arch.rows, arch.cols, 1], data)
}

/// Packs factor windows into `(b, T, m, n, c_f)` with channels ordered
/// PoI, weekend flag, weather features (only the selected ones). Scalar
/// signals are broadcast over the grid.
pub fn factor_tensor(
    arch: &ArchSpec,
    scaler: &FactorScaler,
    windows: &[&[ExternalFactorFrame]],
) -> Result<Tensor> {
    let (t, m, c) = (arch.seq_len, arch.regions(), arch.factor_channels());
    let sel = arch.factors;
    let mut data = Vec::with_capacity(windows.len() * t * m * c);
    for w in windows {
        if w.len() != t {
            return Err(Error::shape("factor window", &[t], &[w.len()]));
        }
        for f in *w {
            if sel.poi && f.poi.len() != m {
                return Err(Error::shape("poi", &[m], &[f.poi.len()]));
            }
            if sel.weather && f.weather.len() != arch.weather_arity {
                return Err(Error::InvalidArgument(format!(
                    "weather arity {} does not match the model's {}",
                    f.weather.len(),
                    arch.weather_arity
                )));
            }
            let weather: Vec<f64> = if sel.weather {
                f.weather
                    .iter()
                    .zip(&scaler.weather)
                    .map(|(v, s)| s.normalize_value(*v))
                    .collect()
            } else {
                Vec::new()
            };
            for r in 0..m {
                if sel.poi {
                    data.push(scaler.poi.normalize_value(f.poi[r]));
                }
                if sel.weekday {
                    data.push(f.is_weekend);
                }
                data.extend_from_slice(&weather);
            }
        }
    }
    Tensor::new(vec![windows.len(), t, arch.rows, arch.cols, c], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: Vec<f64>) -> ExternalFactorFrame {
        ExternalFactorFrame {
            poi: vec![0.0, 2.0, 4.0, 8.0],
            weather: w,
            is_weekend: 1.0,
        }
    }

    fn tiny() -> ArchSpec {
        ArchSpec {
            rows: 2,
            cols: 2,
            seq_len: 1,
            ..ArchSpec::default()
        }
    }

    #[test]
    fn defaults_follow_recipe() {
        let a = ArchSpec::default();
        assert_eq!(a.conv_lstm_filters, vec![32, 16, 8, 4]);
        assert_eq!(a.seq_len, 24);
        assert_eq!(a.dropout, 0.4);
        assert_eq!(a.fused_dim(), 80);
        a.validate().unwrap();
    }

    #[test]
    fn disabled_factors_shrink_fused_width() {
        let a = ArchSpec {
            factors: FactorSelection::NONE,
            ..ArchSpec::default()
        };
        assert_eq!(a.fused_dim(), 64);
        assert_eq!(a.factor_channels(), 0);
    }

    #[test]
    fn factor_channel_layout() {
        let arch = tiny();
        let frames = vec![frame(vec![10.0, -1.0]), frame(vec![20.0, 1.0])];
        let s = FactorScaler::fit(&frames).unwrap();
        let t = factor_tensor(&arch, &s, &[&frames[1..]]).unwrap();
        assert_eq!(t.shape(), &[1, 1, 2, 2, 4]);
        // region 1: poi 2/8, weekend 1, weather (1, 1) after scaling
        assert_eq!(&t.data()[4..8], &[0.25, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let arch = tiny();
        let frames = vec![frame(vec![1.0, 2.0, 3.0])];
        let s = FactorScaler::identity(2);
        assert!(factor_tensor(&arch, &s, &[&frames]).is_err());
    }

    #[test]
    fn invalid_specs() {
        let mut a = ArchSpec::default();
        a.conv_lstm_filters.clear();
        assert!(a.validate().is_err());
        let a = ArchSpec {
            latent_dim: 0,
            ..ArchSpec::default()
        };
        assert!(a.validate().is_err());
    }
}
