use proptest::prelude::*;
use slowbeat_core::rpeak::{detect_batch, score_detections, RPeakDetector};
use slowbeat_core::sim::{add_baseline_wander, gen_ibi_series, noise_rms_for_snr, synth_ecg, synth_ecg_beats, HeartParams};
use slowbeat_core::{ChannelKind, Signal};

fn beats_at(bpm: f64, duration: f64) -> Vec<f64> {
    let ibi = 60.0 / bpm;
    (0..).map(|k| 0.5 * ibi + k as f64 * ibi).take_while(|&t| t < duration - 0.15).collect()
}

fn times(sig: &Signal) -> Vec<f64> {
    detect_batch(sig).unwrap().iter().map(|b| b.t).collect()
}

#[test]
fn clean_75_bpm_minute() {
    let truth = beats_at(75.0, 60.0);
    let sig = synth_ecg_beats(&truth, 60.0, 1000.0, 0.0, 1).unwrap();
    let det = times(&sig);
    assert!((det.len() as i64 - 75).abs() <= 1, "{} events", det.len());
    let s = score_detections(&truth, &det, 0.05);
    assert!(s.max_abs_error() <= 0.010, "{}", s.max_abs_error());
    // only the warm-up second may be missed
    assert!(s.false_negatives <= 1 && s.false_positives == 0, "fn {} fp {}", s.false_negatives, s.false_positives);
}

#[test]
fn emission_latency_is_bounded() {
    let truth = beats_at(75.0, 30.0);
    let sig = synth_ecg_beats(&truth, 30.0, 1000.0, 0.0, 2).unwrap();
    let mut d = RPeakDetector::new(sig.fs).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &x) in sig.samples.iter().enumerate() {
        let now = sig.time_at(i);
        if let Some(b) = d.push_sample(x, now).unwrap() {
            let nearest = truth.iter().cloned().fold(f64::INFINITY, |m, t| if (t - b.t).abs() < (m - b.t).abs() { t } else { m });
            worst = worst.max(now - nearest);
        }
    }
    assert!(worst <= 0.120, "latency {worst}");
}

#[test]
fn long_block_beat_count() {
    let p = HeartParams { mean_hr: 75.0, rmssd_target: 0.0, ..Default::default() };
    let ibi = gen_ibi_series(&p, 480.0, None, 3).unwrap();
    let truth = ibi.beat_times();
    let elapsed = truth.last().unwrap() - truth[0];
    assert_eq!(truth.len(), 1 + (elapsed / 0.8 + 1e-9).floor() as usize);
    let sig = synth_ecg(&ibi, 1000.0, 0.0, 3).unwrap();
    let s = score_detections(&truth, &times(&sig), 0.05);
    assert_eq!(s.false_positives, 0);
    assert!(s.false_negatives <= 1);
}

#[test]
fn snr_20_db_block() {
    let p = HeartParams::default();
    let ibi = gen_ibi_series(&p, 480.0, None, 4).unwrap();
    let clean = synth_ecg(&ibi, 1000.0, 0.0, 4).unwrap();
    let rms = noise_rms_for_snr(&clean.samples, 20.0);
    let sig = synth_ecg(&ibi, 1000.0, rms, 4).unwrap();
    let s = score_detections(&ibi.beat_times(), &times(&sig), 0.05);
    assert!(s.sensitivity() >= 0.995 && s.positive_predictivity() >= 0.995, "fn {} fp {}", s.false_negatives, s.false_positives);
}

#[test]
fn noise_at_tenth_of_r_amplitude() {
    let p = HeartParams::default();
    let ibi = gen_ibi_series(&p, 300.0, None, 5).unwrap();
    let sig = synth_ecg(&ibi, 1000.0, 0.1, 5).unwrap();
    let s = score_detections(&ibi.beat_times(), &times(&sig), 0.05);
    assert!(s.sensitivity() >= 0.99, "fn {} fp {}", s.false_negatives, s.false_positives);
}

#[test]
fn baseline_wander_does_not_change_detection() {
    let p = HeartParams::default();
    let ibi = gen_ibi_series(&p, 120.0, None, 6).unwrap();
    let sig = synth_ecg(&ibi, 1000.0, 0.02, 6).unwrap();
    let mut wandering = sig.clone();
    add_baseline_wander(&mut wandering, 0.5, 0.3, 0.0);
    let a = times(&sig).len() as i64;
    let b = times(&wandering).len() as i64;
    assert!((a - b).abs() <= 1, "{a} vs {b}");
}

#[test]
fn refractory_keeps_first_of_close_pair() {
    // regular beats plus an extra full-size beat 150 ms after one of them
    let mut truth = beats_at(60.0, 20.0);
    let extra = truth[10] + 0.150;
    truth.push(extra);
    truth.sort_by(f64::total_cmp);
    let sig = synth_ecg_beats(&truth, 20.0, 1000.0, 0.0, 7).unwrap();
    let det = times(&sig);
    assert!(det.iter().any(|t| (t - (extra - 0.150)).abs() < 0.01));
    assert!(!det.iter().any(|t| (t - extra).abs() < 0.01));
}

fn random_block(seed: u64, hr: f64, rmssd: f64, noise: f64, dur: f64) -> Signal {
    let p = HeartParams { mean_hr: hr, rmssd_target: rmssd, ..Default::default() };
    let ibi = gen_ibi_series(&p, dur, None, seed).unwrap();
    let mut sig = synth_ecg(&ibi, 1000.0, noise, seed).unwrap();
    sig.kind = ChannelKind::Ecg;
    sig
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn streaming_equals_batch(seed in 0u64..10_000, hr in 50.0f64..140.0, rmssd in 0.0f64..100.0, noise in 0.0f64..0.08) {
        let sig = random_block(seed, hr, rmssd, noise, 30.0);
        let batch = detect_batch(&sig).unwrap();
        let mut d = RPeakDetector::new(sig.fs).unwrap();
        let mut stream = Vec::new();
        for (i, &x) in sig.samples.iter().enumerate() {
            if let Some(b) = d.push_sample(x, sig.time_at(i)).unwrap() {
                stream.push(b);
            }
        }
        prop_assert_eq!(batch, stream);
    }

    #[test]
    fn events_respect_refractory(seed in 0u64..10_000, hr in 40.0f64..180.0, rmssd in 0.0f64..150.0, noise in 0.0f64..0.3) {
        let sig = random_block(seed, hr, rmssd, noise, 30.0);
        let beats = detect_batch(&sig).unwrap();
        for w in beats.windows(2) {
            prop_assert!(w[1].t - w[0].t >= 0.25 - 1e-9);
        }
        prop_assert!(beats.iter().all(|b| b.prominence > 0.0));
    }
}
