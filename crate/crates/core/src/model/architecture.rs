use serde::{Deserialize, Serialize};

use crate::domain::{WindowSpec, BAND_COUNT, SUPPORTED_WINDOWS};
use crate::error::{Error, Result};
use crate::neuralnet::{LayerSpec, Network};

/// Encoder unit counts (the decoder mirrors them) and dropout rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub units: [usize; 3],
    pub dropout: f64,
}

impl Architecture {
    /// Full-size stack: 256/128/64 units.
    pub const FULL: Architecture = Architecture {
        units: [256, 128, 64],
        dropout: 0.2,
    };

    /// Reduced stack for quick runs on a workstation.
    pub const DESK: Architecture = Architecture {
        units: [32, 16, 8],
        dropout: 0.2,
    };

    pub fn latent_dim(&self) -> usize {
        self.units[2]
    }

    /// Layer list: three encoder LSTMs (dropout after the first, the last one
    /// keeping only its final state), a repeat vector, three mirrored decoder
    /// LSTMs (dropout before the widest) and a per-step affine head.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let [a, b, c] = self.units;
        let seq = |units| LayerSpec::Lstm {
            units,
            return_sequences: true,
        };
        vec![
            seq(a),
            LayerSpec::Dropout { rate: self.dropout },
            seq(b),
            LayerSpec::Lstm {
                units: c,
                return_sequences: false,
            },
            LayerSpec::RepeatVector,
            seq(c),
            seq(b),
            LayerSpec::Dropout { rate: self.dropout },
            seq(a),
            LayerSpec::TimeDistributedDense { units: BAND_COUNT },
        ]
    }

    pub fn network(&self) -> Result<Network> {
        if self.units.contains(&0) {
            return Err(Error::Config("layer unit counts must be positive".into()));
        }
        Network::new(BAND_COUNT, &self.layers())
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture::FULL
    }
}

pub(crate) fn check_window(window_size: usize, allow_unsupported: bool) -> Result<()> {
    if window_size == 0 {
        return Err(Error::Config("window size must be positive".into()));
    }
    let spec = WindowSpec::training(window_size);
    if !allow_unsupported && !spec.is_supported() {
        return Err(Error::Config(format!(
            "window size {window_size} not in {SUPPORTED_WINDOWS:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_stack_matches_reference_counts() {
        let net = Architecture::FULL.network().unwrap();
        let counts: Vec<usize> = net
            .layer_param_counts()
            .into_iter()
            .filter(|&c| c > 0)
            .collect();
        assert_eq!(
            counts,
            [272_384, 197_120, 49_408, 33_024, 98_816, 394_240, 2_313]
        );
        assert_eq!(net.param_len(), 1_047_305);
    }

    #[test]
    fn latent_and_output_dims() {
        assert_eq!(Architecture::FULL.latent_dim(), 64);
        let net = Architecture::DESK.network().unwrap();
        assert_eq!(net.output_dim(), BAND_COUNT);
    }

    #[test]
    fn window_gate() {
        assert!(check_window(26, false).is_ok());
        assert!(check_window(10, false).is_err());
        assert!(check_window(10, true).is_ok());
        assert!(check_window(0, true).is_err());
    }
}
