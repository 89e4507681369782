use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use formant_bench::test_vowel;
use formant_core::allpole::{estimate, Method};
use formant_core::dsp::Frame;
use formant_core::peaks::{allpole_spectrum_db, pick_peaks, CandidateLattice, PeakCandidate};
use formant_core::pipeline::{analyze_signal, Estimator, PipelineConfig};
use formant_core::tracker::{track_dp, TrackerConfig};

fn allpole(c: &mut Criterion) {
    let signal = test_vowel();
    let frame = Frame::new(signal.samples()[800..1000].to_vec(), 800);
    let mut g = c.benchmark_group("allpole_order12_200");
    for m in [Method::LpAcor, Method::LpCov, Method::LpFbcov, Method::QcpFbcov] {
        g.bench_with_input(BenchmarkId::from_parameter(m.tag()), &m, |b, &m| {
            b.iter(|| estimate(black_box(&frame), 12, m, None).unwrap())
        });
    }
    g.finish();
}

fn peaks(c: &mut Criterion) {
    let signal = test_vowel();
    let frame = Frame::new(signal.samples()[800..1000].to_vec(), 800);
    let model = estimate(&frame, 12, Method::LpFbcov, None).unwrap();
    c.bench_function("spectrum_and_peaks_1024", |b| {
        b.iter(|| {
            let s = allpole_spectrum_db(black_box(&model), 1024).unwrap();
            pick_peaks(&s, 8000.0, 100.0).unwrap()
        })
    });
}

fn tracker(c: &mut Criterion) {
    let frames: Vec<Vec<PeakCandidate>> = (0..100)
        .map(|t| {
            [500.0, 1400.0, 2100.0, 2600.0, 3500.0]
                .iter()
                .map(|f| PeakCandidate {
                    frequency: f + 20.0 * (t as f64 * 0.3).sin(),
                    level_db: 0.0,
                })
                .collect()
        })
        .collect();
    let lattice = CandidateLattice::new(frames, 0.01, 5);
    let cfg = TrackerConfig::default();
    c.bench_function("track_dp_100_frames_5_candidates", |b| {
        b.iter(|| track_dp(black_box(&lattice), &cfg).unwrap())
    });
}

fn pipeline(c: &mut Criterion) {
    let signal = test_vowel();
    let mut g = c.benchmark_group("analyze_1s");
    g.sample_size(20);
    for est in [Estimator::AllPole(Method::LpCov), Estimator::AllPole(Method::QcpFbcov)] {
        let cfg = PipelineConfig {
            estimator: est,
            ..PipelineConfig::default()
        };
        g.bench_function(est.to_string(), |b| {
            b.iter(|| analyze_signal(black_box(&signal), &cfg, None).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, allpole, peaks, tracker, pipeline);
criterion_main!(benches);
