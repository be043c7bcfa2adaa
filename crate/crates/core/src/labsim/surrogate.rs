use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fusion::{ModalityAccuracy, ModalityPrediction};

/// Stand-in for a trained per-modality classifier.
///
/// Each call consumes exactly one uniform draw from the supplied stream, so a
/// condition with `N` modalities always advances the trial RNG by `N` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSurrogate {
    pub accuracy: ModalityAccuracy,
}

impl SensorSurrogate {
    pub fn new(accuracy: ModalityAccuracy) -> Self {
        Self { accuracy }
    }

    pub fn modality(&self) -> &str {
        &self.accuracy.modality
    }

    pub fn predict<R: Rng + ?Sized>(&self, truth: bool, rng: &mut R) -> ModalityPrediction {
        let u: f64 = rng.random();
        let vote = if truth {
            u < self.accuracy.sensitivity
        } else {
            u >= self.accuracy.specificity
        };
        ModalityPrediction::new(self.accuracy.modality.clone(), vote)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_inverted() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let perfect = SensorSurrogate::new(ModalityAccuracy::symmetric("v", 1.0).unwrap());
        let inverted = SensorSurrogate::new(ModalityAccuracy::symmetric("v", 0.0).unwrap());
        for _ in 0..200 {
            assert!(perfect.predict(true, &mut rng).vote);
            assert!(!perfect.predict(false, &mut rng).vote);
            assert!(!inverted.predict(true, &mut rng).vote);
            assert!(inverted.predict(false, &mut rng).vote);
        }
    }

    #[test]
    fn empirical_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = SensorSurrogate::new(ModalityAccuracy::new("ft", 0.9, 0.7).unwrap());
        let n = 20_000;
        let tp = (0..n).filter(|_| s.predict(true, &mut rng).vote).count() as f64 / n as f64;
        let tn = (0..n).filter(|_| !s.predict(false, &mut rng).vote).count() as f64 / n as f64;
        assert!((tp - 0.9).abs() < 0.01, "{tp}");
        assert!((tn - 0.7).abs() < 0.015, "{tn}");
    }
}
