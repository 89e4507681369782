//! Snapping network predictions onto all-pole spectral peaks.

use serde::{Deserialize, Serialize};

use crate::allpole::Method;
use crate::error::{Error, Result};
use crate::peaks::PeakCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub spectrum_method: Method,
    /// Predictions farther than this from every free peak are kept.
    pub max_distance_hz: Option<f64>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            spectrum_method: Method::QcpFbcov,
            max_distance_hz: None,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.spectrum_method, Method::LpFbcov | Method::QcpFbcov) {
            return Err(Error::InvalidArgument(format!(
                "refinement spectrum must be LP-FBCOV or QCP-FBCOV, got {}",
                self.spectrum_method
            )));
        }
        if let Some(d) = self.max_distance_hz {
            if !(d > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "refine distance cap must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Each prediction, lowest first, takes the closest peak not yet taken
/// (ties go to the lower peak); without a free peak it is kept as is.
pub fn refine_formants(predicted: &[f64], peaks: &[PeakCandidate], max_distance_hz: Option<f64>) -> Vec<f64> {
    let mut order: Vec<usize> = (0..predicted.len()).collect();
    order.sort_by(|&a, &b| predicted[a].total_cmp(&predicted[b]));
    let mut used = vec![false; peaks.len()];
    let mut out = predicted.to_vec();
    for i in order {
        let f = predicted[i];
        let best = peaks
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, p)| (j, (p.frequency - f).abs(), p.frequency))
            .filter(|&(_, d, _)| max_distance_hz.is_none_or(|cap| d <= cap))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)));
        if let Some((j, _, freq)) = best {
            used[j] = true;
            out[i] = freq;
        }
    }
    out.sort_by(f64::total_cmp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn peaks(f: &[f64]) -> Vec<PeakCandidate> {
        f.iter()
            .map(|&frequency| PeakCandidate {
                frequency,
                level_db: 0.0,
            })
            .collect()
    }

    #[test]
    fn exact_matches_unchanged() {
        let p = peaks(&[400.0, 1200.0, 2300.0, 3300.0]);
        assert_eq!(
            refine_formants(&[400.0, 1200.0, 2300.0], &p, None),
            vec![400.0, 1200.0, 2300.0]
        );
    }

    #[test]
    fn greedy_with_consumption() {
        let p = peaks(&[550.0, 1500.0, 2500.0, 3400.0]);
        assert_eq!(
            refine_formants(&[600.0, 1400.0, 2600.0], &p, None),
            vec![550.0, 1500.0, 2500.0]
        );
        // F1 takes the shared nearest peak, F2 falls to the next free one and
        // F3 keeps its prediction
        let p = peaks(&[700.0, 2600.0]);
        assert_eq!(
            refine_formants(&[650.0, 800.0, 2500.0], &p, None),
            vec![700.0, 2500.0, 2600.0]
        );
    }

    #[test]
    fn ties_go_low() {
        let p = peaks(&[900.0, 1100.0]);
        assert_eq!(refine_formants(&[1000.0], &p, None), vec![900.0]);
    }

    #[test]
    fn fallbacks() {
        assert_eq!(
            refine_formants(&[600.0, 1400.0, 2600.0], &[], None),
            vec![600.0, 1400.0, 2600.0]
        );
        let p = peaks(&[580.0]);
        assert_eq!(
            refine_formants(&[600.0, 1400.0, 2600.0], &p, None),
            vec![580.0, 1400.0, 2600.0]
        );
        let p = peaks(&[580.0, 2000.0]);
        assert_eq!(
            refine_formants(&[600.0, 1400.0, 2600.0], &p, Some(100.0)),
            vec![580.0, 1400.0, 2600.0]
        );
    }

    #[test]
    fn config_validation() {
        assert!(RefineConfig::default().validate().is_ok());
        assert!(RefineConfig {
            spectrum_method: Method::LpCov,
            max_distance_hz: None
        }
        .validate()
        .is_err());
        assert!(RefineConfig {
            spectrum_method: Method::LpFbcov,
            max_distance_hz: Some(0.0)
        }
        .validate()
        .is_err());
    }

    fn ascending(lo: f64, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::btree_set(0u32..40_000, n)
            .prop_map(move |s| s.into_iter().map(|v| lo + v as f64 * 0.1).collect())
    }

    proptest! {
        #[test]
        fn outputs_are_peaks_or_predictions(pred in ascending(100.0, 3..=3), pk in ascending(100.0, 0..=6)) {
            let p = peaks(&pk);
            let out = refine_formants(&pred, &p, None);
            prop_assert_eq!(out.len(), 3);
            let consumed = out.iter().filter(|f| pk.contains(f)).count();
            prop_assert!(consumed <= pk.len().min(6));
            for f in &out {
                prop_assert!(pk.contains(f) || pred.contains(f));
            }
            // distinct peaks: no peak used twice
            let mut used: Vec<f64> = out.iter().copied().filter(|f| pk.contains(f)).collect();
            used.dedup();
            prop_assert_eq!(used.len(), consumed);
        }

        #[test]
        fn idempotent_with_enough_peaks(pred in ascending(100.0, 3..=3), pk in ascending(100.0, 3..=6)) {
            let p = peaks(&pk);
            let once = refine_formants(&pred, &p, None);
            prop_assert_eq!(refine_formants(&once, &p, None), once);
        }
    }
}
