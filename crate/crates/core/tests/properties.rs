use proptest::prelude::*;

use vibediag::band_features::{FeaturePair, MinMaxScaler};
use vibediag::emd::{sift, EmdConfig};
use vibediag::hht::{analytic_signal, render_spectrum_image, ImageConfig};
use vibediag::hybrid::{f1_score, Metrics};
use vibediag::nn::{argmax, softmax_cross_entropy, softmax_rows};
use vibediag::segmentation::{segment, window_count, SegmentConfig};
use vibediag::signal::{FaultLabel, Recording};

fn labels() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..5, 0usize..5), 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn windows_tile_the_recording(n in 0usize..400, len in 1usize..60, hop in 1usize..60) {
        let data: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let rec = Recording::new("r", 1000.0, 1200.0, FaultLabel::Ball, vec![data.clone()], data.iter().map(|v| -v).collect());
        prop_assume!(rec.is_ok());
        let rec = rec.unwrap();
        let w = segment(&rec, &SegmentConfig { window_len: len, hop, linear_channel: 0 });
        prop_assert_eq!(w.len(), window_count(n, len, hop));
        for (k, win) in w.iter().enumerate() {
            prop_assert_eq!(win.start_index, k * hop);
            prop_assert!(win.start_index + len <= n);
            prop_assert_eq!(win.linear[0], (k * hop) as f64);
            prop_assert_eq!(win.angular[len - 1], -((k * hop + len - 1) as f64));
        }
        // the next window would not fit
        prop_assert!(w.len() * hop + len > n);
    }

    #[test]
    fn confusion_bookkeeping(pairs in labels()) {
        let truth: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let m = Metrics::from_predictions(&truth, &pred);
        prop_assert_eq!(m.total(), pairs.len());
        let hits = pairs.iter().filter(|p| p.0 == p.1).count();
        prop_assert_eq!(m.errors(), pairs.len() - hits);
        prop_assert!((m.accuracy - hits as f64 / pairs.len() as f64).abs() < 1e-12);
        for c in 0..5 {
            prop_assert_eq!(m.support[c], truth.iter().filter(|&&t| t == c).count());
            let f = m.f1[c];
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((f - f1_score(m.precision[c], m.recall[c])).abs() < 1e-12);
            prop_assert!(f <= m.precision[c].max(m.recall[c]) + 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_distribution(logits in prop::collection::vec(-300.0f64..300.0, 5..=50)) {
        let k = 5;
        let rows = logits.len() / k;
        let logits = &logits[..rows * k];
        let p = softmax_rows(logits, k);
        for (row, l) in p.chunks(k).zip(logits.chunks(k)) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(argmax(row), argmax(l));
        }
        let mut targets = vec![0.0; rows * k];
        for r in 0..rows {
            targets[r * k + r % k] = 1.0;
        }
        let (loss, _, grad) = softmax_cross_entropy(logits, &targets, k).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        for row in grad.chunks(k) {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_maps_training_data_into_unit_box(raw in prop::collection::vec((0.0f64..1e4, 0.0f64..1e4), 1..50)) {
        let pairs: Vec<FeaturePair> = raw.iter().map(|&(n1, n2)| FeaturePair { n1, n2 }).collect();
        let s = MinMaxScaler::fit(&pairs).unwrap();
        for p in &pairs {
            let [a, b] = s.apply(p);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }
    }

    #[test]
    fn analytic_signal_keeps_the_input(x in prop::collection::vec(-10.0f64..10.0, 4..300)) {
        let a = analytic_signal(&x).unwrap();
        for (i, v) in x.iter().enumerate() {
            prop_assert!((a.real[i] - v).abs() < 1e-9);
            prop_assert!((a.amplitude[i] - a.real[i].hypot(a.imag[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn images_are_normalized(seed in 0u64..1000, channels in prop::sample::select(vec![1usize, 3])) {
        let x: Vec<f64> = (0..600)
            .map(|i| {
                let t = i as f64 / 1000.0;
                (2.0 * std::f64::consts::PI * (50.0 + seed as f64 * 0.2) * t).sin()
                    + 0.3 * (((i as u64 * 2654435761) ^ seed) % 97) as f64 / 97.0
            })
            .collect();
        let imfs = sift(&x, &EmdConfig::default()).unwrap();
        let img = render_spectrum_image(&imfs, 1e-3, &ImageConfig { channels, ..Default::default() }).unwrap();
        prop_assert_eq!(img.pixels.len(), img.height * img.width * channels);
        prop_assert!(img.pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        if channels == 1 {
            prop_assert!((img.max_pixel() - 1.0).abs() < 1e-12);
        }
    }
}
