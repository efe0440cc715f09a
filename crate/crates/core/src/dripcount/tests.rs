use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dropnet::OutputGrid;
use crate::error::Error;

fn obs(t: f64, s: u8) -> DropObservation {
    DropObservation {
        t,
        detected: true,
        s_hat: s,
        cell: (4, 4),
        confidence: 0.9,
        grid_size: 8,
    }
}

fn missing(t: f64) -> DropObservation {
    DropObservation {
        detected: false,
        confidence: 0.05,
        ..obs(t, 0)
    }
}

fn run_counter(seq: &[DropObservation], m: usize) -> Vec<DripEvent> {
    let mut state = CounterState::default();
    let mut events = Vec::new();
    for o in seq {
        let (next, ev) = update_counter(&state, o, m).unwrap();
        state = next;
        events.extend(ev);
    }
    assert_eq!(state.drop_count as usize, events.len());
    assert_eq!(state.detach_times.len(), events.len());
    events
}

fn states(seq: &[u8]) -> Vec<DropObservation> {
    seq.iter().enumerate().map(|(n, &s)| obs(n as f64, s)).collect()
}

#[test]
fn observation_examples() {
    let mut g = OutputGrid::filled(26, 0.0);
    g.set(5, 7, 1, 0.9);
    let o = extract_observation(&g, 1.5, 0.3).unwrap();
    assert!(o.detected);
    assert_eq!((o.s_hat, o.cell, o.confidence, o.t), (1, (5, 7), 0.9, 1.5));

    let mut g = OutputGrid::filled(8, 0.01);
    g.set(3, 3, 0, 0.97);
    g.set(4, 3, 0, 0.98);
    let o = extract_observation(&g, 0.0, 0.3).unwrap();
    assert_eq!(o.s_hat, 0);
    assert!(o.detected);

    let o = extract_observation(&OutputGrid::filled(8, 0.1), 0.0, 0.3).unwrap();
    assert!(!o.detected);

    assert!(extract_observation(&g, 0.0, 0.0).is_err());
    assert!(extract_observation(&g, 0.0, 1.0).is_err());
}

#[test]
fn observation_ties() {
    let g = OutputGrid::filled(4, 0.5);
    let o = extract_observation(&g, 0.0, 0.3).unwrap();
    assert_eq!((o.s_hat, o.cell), (0, (0, 0)));

    let mut g = OutputGrid::filled(4, 0.0);
    g.set(3, 0, 1, 0.8);
    g.set(0, 1, 1, 0.8);
    let o = extract_observation(&g, 0.0, 0.3).unwrap();
    assert_eq!((o.s_hat, o.cell), (1, (3, 0)));
}

#[test]
fn counter_examples() {
    let ev = run_counter(&states(&[0, 0, 1, 1, 1, 0, 0]), 2);
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].t, 5.0);
    assert_eq!(ev[0].drop_count, 1);

    assert!(run_counter(&states(&[1, 1, 0, 1, 1]), 2).is_empty());
    assert!(run_counter(&states(&[1; 50]), 2).is_empty());
    assert!(run_counter(&states(&[0; 50]), 2).is_empty());
}

#[test]
fn undetected_frames_hold_state() {
    let seq = vec![obs(0.0, 1), obs(1.0, 1), obs(2.0, 0), missing(3.0), obs(4.0, 0), missing(5.0)];
    let ev = run_counter(&seq, 2);
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].t, 2.0);
}

#[test]
fn counter_rejects_time_regression() {
    let (s, _) = update_counter(&CounterState::default(), &obs(2.0, 1), 2).unwrap();
    assert!(matches!(
        update_counter(&s, &obs(1.0, 1), 2),
        Err(Error::TimeRegression { .. })
    ));
    assert!(update_counter(&s, &obs(2.0, 1), 2).is_ok());
    assert!(update_counter(&s, &obs(3.0, 1), 0).is_err());
}

/// Independent reference: runs of detected frames at least `m` long are
/// the only ones that can become stable; a detach is a qualifying 0-run
/// whose preceding qualifying run (after merging equal values) was 1.
fn reference_detaches(seq: &[(bool, u8)], m: usize) -> Vec<usize> {
    let detected: Vec<(usize, u8)> = seq
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| *d)
        .map(|(n, (_, s))| (n, *s))
        .collect();
    let mut runs: Vec<(usize, u8, usize)> = Vec::new();
    for (n, s) in detected {
        match runs.last_mut() {
            Some((_, v, len)) if *v == s => *len += 1,
            _ => runs.push((n, s, 1)),
        }
    }
    let mut out = Vec::new();
    let mut stable: Option<u8> = None;
    for (start, v, len) in runs {
        if len < m || stable == Some(v) {
            continue;
        }
        if stable == Some(1) && v == 0 {
            out.push(start);
        }
        stable = Some(v);
    }
    out
}

#[test]
fn counter_matches_reference_on_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..10_000 {
        let len = rng.random_range(0..60);
        let m = 1 + trial % 4;
        let raw: Vec<(bool, u8)> = (0..len)
            .map(|_| (rng.random_bool(0.85), rng.random_range(0..2)))
            .collect();
        let seq: Vec<DropObservation> = raw
            .iter()
            .enumerate()
            .map(|(n, &(d, s))| if d { obs(n as f64, s) } else { missing(n as f64) })
            .collect();
        let got: Vec<usize> = run_counter(&seq, m).iter().map(|e| e.t as usize).collect();
        assert_eq!(got, reference_detaches(&raw, m), "m={m} seq={raw:?}");
    }
}

proptest! {
    #[test]
    fn m1_equals_naive_transitions(seq in proptest::collection::vec(0u8..2, 0..200)) {
        let naive = seq.windows(2).filter(|w| w[0] == 1 && w[1] == 0).count();
        prop_assert_eq!(run_counter(&states(&seq), 1).len(), naive);
    }

    #[test]
    fn count_is_monotone(seq in proptest::collection::vec(0u8..2, 0..200), m in 1usize..4) {
        let mut state = CounterState::default();
        let mut last = 0;
        for o in states(&seq) {
            state = update_counter(&state, &o, m).unwrap().0;
            prop_assert!(state.drop_count >= last);
            last = state.drop_count;
        }
        prop_assert!(state.detach_times.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn flow_examples() {
    let q = flow_rate(&[0.0, 2.0, 4.0, 6.0], 3).unwrap().unwrap();
    assert_eq!((q.t, q.window_n), (6.0, 3));
    assert!((q.q - 30.0).abs() < 1e-12);
    let q = flow_rate(&[0.0, 3.0], 1).unwrap().unwrap();
    assert!((q.q - 20.0).abs() < 1e-12);
    assert_eq!(flow_rate(&[0.0, 3.0], 3).unwrap(), None);
    assert!(matches!(flow_rate(&[0.0, 1.0, 1.0, 2.0], 3), Err(Error::DuplicateTimestamp(_))));
    assert!(flow_rate(&[0.0, 1.0], 0).is_err());
}

#[test]
fn flow_estimator_matches_batch_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut est = FlowEstimator::new(3).unwrap();
    for _ in 0..100 {
        t += rng.random_range(0.5..3.0);
        times.push(t);
        assert_eq!(est.push(t).unwrap(), flow_rate(&times, 3).unwrap());
    }
    assert!(est.push(t).is_err());
}

#[test]
fn window_rate_is_harmonic_mean_of_unit_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let n = rng.random_range(1..8);
        let mut times = vec![rng.random_range(0.0..100.0)];
        for _ in 0..n {
            let last = *times.last().unwrap();
            times.push(last + rng.random_range(0.2..4.0));
        }
        let q_n = flow_rate(&times, n).unwrap().unwrap().q;
        let unit: Vec<f64> = (1..=n)
            .map(|e| flow_rate(&times[..=e], 1).unwrap().unwrap().q)
            .collect();
        let harmonic = n as f64 / unit.iter().map(|q| 1.0 / q).sum::<f64>();
        assert!((q_n - harmonic).abs() / q_n < 1e-9);
    }
}

#[test]
fn framing_examples() {
    let at = |i, j| DropObservation {
        cell: (i, j),
        grid_size: 26,
        ..obs(0.0, 1)
    };
    assert!(check_framing(&at(13, 13), 2).is_none());
    assert_eq!(check_framing(&at(1, 13), 2).unwrap().cell, (1, 13));
    assert!(check_framing(&at(2, 13), 2).is_none());
    assert!(check_framing(&at(13, 24), 2).is_some());
    assert!(check_framing(&at(13, 23), 2).is_none());
}

#[test]
fn framing_band_is_exact() {
    for margin in 0..5 {
        for i in 0..26 {
            for j in 0..26 {
                let o = DropObservation {
                    cell: (i, j),
                    grid_size: 26,
                    ..obs(0.0, 0)
                };
                let inside = i >= margin && j >= margin && i + margin < 26 && j + margin < 26;
                assert_eq!(check_framing(&o, margin).is_none(), inside);
            }
        }
    }
}

#[test]
fn monitor_chain_emits_detach_flow_and_alarm() {
    let mut mon = StreamMonitor::new(CounterConfig::default()).unwrap();
    let period = 20;
    let mut outs = Vec::new();
    for n in 0..(period * 6) {
        let s = if n % period < period / 2 { 0 } else { 1 };
        let mut o = obs(n as f64 / 10.0, s);
        if n == 7 {
            o.cell = (0, 4);
        }
        outs.extend(mon.observe(&o).unwrap());
    }
    let detaches = outs.iter().filter(|o| matches!(o, MonitorOutput::Detach(_))).count();
    let flows: Vec<f64> = outs
        .iter()
        .filter_map(|o| match o {
            MonitorOutput::Flow(f) => Some(f.q),
            _ => None,
        })
        .collect();
    let alarms = outs.iter().filter(|o| matches!(o, MonitorOutput::Alarm(_))).count();
    assert_eq!(detaches, 5);
    assert_eq!(mon.drop_count(), 5);
    assert_eq!(flows.len(), 2);
    assert!(flows.iter().all(|q| (q - 30.0).abs() < 1e-9));
    assert_eq!(alarms, 1);
}

#[test]
fn counter_config_validation() {
    assert!(CounterConfig::default().validate().is_ok());
    let bad = CounterConfig {
        debounce_m: 0,
        ..CounterConfig::default()
    };
    assert!(StreamMonitor::new(bad).is_err());
    let parsed: CounterConfig = serde_json::from_str(r#"{"tau":0.4}"#).unwrap();
    assert_eq!(parsed.window_n, DEFAULT_WINDOW);
    assert_eq!(parsed.tau, 0.4);
}
