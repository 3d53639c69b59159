//! Property tests for the streaming and codec invariants.

mod common;

use ndarray::{s, Array2};
use nxs_core::analysis::{WelchAccumulator, WelchParams, WindowKind};
use nxs_core::dsl::{parse_expression, ExprEvaluator};
use nxs_core::epoching::{Epocher, StimCode};
use nxs_core::filters::{design_butter_bandpass, design_notch, Decimator};
use nxs_core::ml::{lda_fit, LdaModel};
use nxs_core::net::{frame_decode, frame_encode, DropOldestQueue, SignalBlock, WireItem};
use nxs_core::types::{channel_names, Chunk, Epoch, FeatureVector, MarkerEvent};
use proptest::prelude::*;

const FS: f64 = 128.0;

fn signal() -> Chunk {
    common::seeded_signal(6.0, FS, 3, 42)
}

/// Cuts `sig` at the given piece lengths (cycled) until it is exhausted.
fn pieces(sig: &Chunk, lens: &[usize]) -> Vec<Chunk> {
    let mut out = Vec::new();
    let (mut a, mut k) = (0, 0);
    while a < sig.len() {
        let b = (a + lens[k % lens.len()]).min(sig.len());
        out.push(sig.slice(a, b));
        a = b;
        k += 1;
    }
    out
}

fn chunking() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..200, 1..30).prop_filter("needs progress", |v| v.iter().any(|&n| n > 0))
}

fn markers() -> Vec<MarkerEvent> {
    [0.3, 1.1, 1.15, 2.5, 3.0, 4.2, 5.9]
        .iter()
        .enumerate()
        .map(|(i, &t)| MarkerEvent::new(t, if i % 2 == 0 { "S  1" } else { "S  2" }, None).unwrap())
        .collect()
}

/// Epochs from feeding every piece, handing each marker over with the
/// first piece that reaches its time.
fn run_epocher(mut e: Epocher, parts: &[Chunk]) -> Vec<Epoch> {
    let all = markers();
    let mut next = 0;
    let mut out = Vec::new();
    for p in parts {
        let end = p.timestamps().last().copied().unwrap_or(f64::NEG_INFINITY);
        let due = all[next..].partition_point(|m| m.timestamp <= end);
        out.extend(e.push(Some(p), &all[next..next + due]).unwrap());
        next += due;
    }
    out.extend(e.push(None, &all[next..]).unwrap());
    out
}

fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.dim(), b.dim());
    prop_assert!(common::max_abs_diff(a, b) <= tol, "max diff {}", common::max_abs_diff(a, b));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn butter_is_chunking_invariant(lens in chunking()) {
        let sig = signal();
        let tol = 1e-9 * common::rms(sig.data());
        let reference = design_butter_bandpass(8.0, 12.0, 4, FS).unwrap().apply(&sig).unwrap();
        let mut f = design_butter_bandpass(8.0, 12.0, 4, FS).unwrap();
        let out: Vec<Chunk> = pieces(&sig, &lens).iter().map(|p| f.apply(p).unwrap()).collect();
        let joined = Chunk::concat(&out).unwrap();
        prop_assert_eq!(joined.timestamps(), reference.timestamps());
        assert_close(joined.data(), reference.data(), tol)?;
    }

    #[test]
    fn notch_is_chunking_invariant(lens in chunking()) {
        let sig = signal();
        let tol = 1e-9 * common::rms(sig.data());
        let reference = design_notch(50.0, 30.0, FS).unwrap().apply(&sig).unwrap();
        let mut f = design_notch(50.0, 30.0, FS).unwrap();
        let out: Vec<Chunk> = pieces(&sig, &lens).iter().map(|p| f.apply(p).unwrap()).collect();
        assert_close(Chunk::concat(&out).unwrap().data(), reference.data(), tol)?;
    }

    #[test]
    fn decimator_is_chunking_invariant(lens in chunking(), factor in 2usize..6) {
        let sig = signal();
        let tol = 1e-9 * common::rms(sig.data());
        let reference = Decimator::new(factor, FS).unwrap().process(&sig).unwrap();
        let mut d = Decimator::new(factor, FS).unwrap();
        let out: Vec<Chunk> = pieces(&sig, &lens).iter().map(|p| d.process(p).unwrap()).collect();
        let joined = Chunk::concat(&out).unwrap();
        prop_assert_eq!(joined.timestamps(), reference.timestamps());
        prop_assert_eq!(joined.len(), sig.len().div_ceil(factor));
        assert_close(joined.data(), reference.data(), tol)?;
    }

    #[test]
    fn epochers_are_chunking_invariant(lens in chunking()) {
        let sig = signal();
        let makers: [fn() -> Epocher; 3] = [
            || Epocher::time_based(1.0, 0.37).unwrap(),
            || Epocher::marker_based(0.5).unwrap(),
            || Epocher::stimulation_based(StimCode::Code(1), 0.75, 0.1).unwrap(),
        ];
        for make in makers {
            let reference = run_epocher(make(), std::slice::from_ref(&sig));
            let got = run_epocher(make(), &pieces(&sig, &lens));
            prop_assert!(!reference.is_empty());
            prop_assert_eq!(got, reference);
        }
    }

    #[test]
    fn psd_accumulator_is_chunking_invariant(lens in chunking()) {
        let sig = signal();
        let params = WelchParams { segment_length: 64, overlap: 0.5, window: WindowKind::Hanning };
        let mut whole = WelchAccumulator::new(params, Some(40)).unwrap();
        let reference = whole.push(&sig).unwrap();
        let mut acc = WelchAccumulator::new(params, Some(40)).unwrap();
        let got: Vec<_> = pieces(&sig, &lens).iter().flat_map(|p| acc.push(p).unwrap()).collect();
        prop_assert_eq!(got.len(), reference.len());
        prop_assert_eq!(reference.len(), (sig.len() - 256) / 40 + 1);
        for (g, r) in got.iter().zip(&reference) {
            prop_assert_eq!(g.timestamp, r.timestamp);
            assert_close(&g.values, &r.values, 1e-12)?;
        }
    }

    #[test]
    fn time_epoch_count_formula(n in 10usize..2000, len in 1usize..300, step in 1usize..200) {
        prop_assume!(len <= n);
        let fs = 100.0;
        let data = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let chunk = Chunk::regular(0.0, fs, channel_names(["a"]), data).unwrap();
        let mut e = Epocher::time_based(len as f64 / fs, step as f64 / fs).unwrap();
        let epochs = e.push(Some(&chunk), &[]).unwrap();
        prop_assert_eq!(epochs.len(), (n - len) / step + 1);
        for (k, ep) in epochs.iter().enumerate() {
            prop_assert_eq!(ep.len(), len);
            prop_assert_eq!(ep.data[[0, 0]], (k * step) as f64);
        }
    }

    #[test]
    fn expression_display_round_trips(
        text in prop::sample::select(vec![
            "x", "x^2", "-x^2", "2^-x", "abs(x) - 3 / x", "max(x, -1) * min(2, x)", "log(abs(x) + 1) ^ 0.5",
            "sqrt(x * x + 1) / exp(-x)", "((x))", "1 - 2 - 3", "2 ^ 3 ^ 2", "-(-x)", "x / 2 / 4",
        ]),
        x in -10.0f64..10.0,
    ) {
        let e = parse_expression(text).unwrap();
        let shown = e.to_string();
        let again = parse_expression(&shown).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), shown);
        let (a, b) = (e.eval(x), again.eval(x));
        prop_assert_eq!(a.is_ok(), b.is_ok());
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn expression_commutes_with_concatenation(lens in chunking()) {
        let sig = signal();
        let mut whole = ExprEvaluator::parse("abs(x) ^ 1.5 - max(x, 0)").unwrap();
        let reference = whole.apply(&sig).unwrap();
        let mut ev = ExprEvaluator::parse("abs(x) ^ 1.5 - max(x, 0)").unwrap();
        let parts: Vec<Chunk> = pieces(&sig, &lens).iter().map(|p| ev.apply(p).unwrap()).collect();
        prop_assert_eq!(Chunk::concat(&parts).unwrap(), reference);
    }

    #[test]
    fn softmax_sums_to_one_and_bias_shift_keeps_argmax(
        w in prop::collection::vec(-5.0f64..5.0, 6),
        b in prop::collection::vec(-50.0f64..50.0, 3),
        x in prop::collection::vec(-3.0f64..3.0, 2),
        shift in -1e3f64..1e3,
    ) {
        let model = LdaModel {
            version: 1,
            labels: vec!["a".into(), "b".into(), "c".into()],
            dim: 2,
            weights: w.chunks(2).map(<[f64]>::to_vec).collect(),
            biases: b.clone(),
            ridge: 0.0,
            feature_order: vec!["f0".into(), "f1".into()],
            training_size: 0,
        };
        let p = model.probabilities(&x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        let shifted = LdaModel { biases: b.iter().map(|v| v + shift).collect(), ..model.clone() };
        prop_assert_eq!(shifted.predict_index(&x).unwrap(), model.predict_index(&x).unwrap());
        let best = model.predict_index(&x).unwrap();
        prop_assert!(p.iter().all(|&v| v <= p[best]));
    }

    #[test]
    fn lda_labels_follow_first_appearance(order in any::<bool>()) {
        let labels = if order { ["left", "right"] } else { ["right", "left"] };
        let rows: Vec<FeatureVector> = (0..20)
            .map(|i| {
                let l = labels[i % 2];
                let v = if l == "left" { -1.0 } else { 1.0 } + (i as f64 * 0.37).sin() * 0.2;
                FeatureVector::new(i as f64, vec![v], vec!["f".into()], Some(l.into())).unwrap()
            })
            .collect();
        let m = lda_fit(&rows, 1e-6).unwrap();
        prop_assert_eq!(m.labels.clone(), labels.map(String::from).to_vec());
    }

    #[test]
    fn signal_frames_round_trip(
        channels in 1usize..8,
        samples in 1usize..40,
        t in -1e6f64..1e6,
        seq in any::<u64>(),
        id in any::<[u8; 16]>(),
        seed in any::<u64>(),
    ) {
        let mut r = common::rng(seed);
        let data: Vec<f32> = (0..channels * samples).map(|_| rand::Rng::gen_range(&mut r, -1e4f32..1e4)).collect();
        let item = WireItem::Signal(SignalBlock { timestamp: t, channels, data });
        let bytes = frame_encode(&item, &id, seq).unwrap();
        let frame = frame_decode(&bytes).unwrap();
        prop_assert_eq!(frame.item, item);
        prop_assert_eq!(frame.seq, seq);
        prop_assert_eq!(frame.stream_id, id);
        for cut in [0, 3, 10, bytes.len() - 1] {
            prop_assert!(frame_decode(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn marker_frames_round_trip(label in "[ -~]{1,40}", code in prop::option::of(-100_000i32..100_000), t in any::<f64>()) {
        prop_assume!(t.is_finite());
        let item = WireItem::Marker(MarkerEvent::new(t, label, code).unwrap());
        let bytes = frame_encode(&item, &[7; 16], 1).unwrap();
        prop_assert_eq!(frame_decode(&bytes).unwrap().item, item);
    }

    #[test]
    fn queue_keeps_newest(cap in 1usize..64, n in 0usize..200) {
        let q = DropOldestQueue::new(cap);
        for i in 0..n {
            q.push(i);
        }
        prop_assert_eq!(q.len(), n.min(cap));
        prop_assert_eq!(q.dropped(), n.saturating_sub(cap) as u64);
        let expected: Vec<usize> = (n.saturating_sub(cap)..n).collect();
        prop_assert_eq!(q.drain(), expected);
        prop_assert!(q.is_empty());
    }

    #[test]
    fn chunk_slices_concat_back(cuts in prop::collection::vec(0usize..768, 0..6)) {
        let sig = signal();
        let mut bounds: Vec<usize> = cuts.into_iter().chain([0, sig.len()]).collect();
        bounds.sort_unstable();
        let parts: Vec<Chunk> = bounds.windows(2).map(|w| sig.slice(w[0], w[1])).collect();
        prop_assert_eq!(Chunk::concat(&parts).unwrap(), sig.clone());
        let piece = sig.slice(5, 9);
        prop_assert_eq!(piece.data(), &sig.data().slice(s![5..9, ..]).to_owned());
    }
}
