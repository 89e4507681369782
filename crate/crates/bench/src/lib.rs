//! Shared inputs for the benchmarks.

use formant_core::dsp::Signal;
use formant_core::synth::{synthesize, vowel};

/// One second of a 150 Hz vowel at the analysis rate.
pub fn test_vowel() -> Signal {
    let spec = vowel(
        &[(600.0, 80.0), (1300.0, 90.0), (2500.0, 120.0), (3500.0, 200.0)],
        150.0,
        1.0,
    );
    synthesize(&spec).expect("fixed spec is valid").signal
}
