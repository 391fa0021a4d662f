use std::collections::BTreeMap;

use actorcause_core::behavior::{classify_log, ActorIndex, BehaviorType};
use actorcause_core::event_log::{validate_and_sort, Event, EventLog};
use actorcause_core::synth::{generate_log, SynthLogConfig};
use actorcause_core::timeseries::{
    align, behavior_series, behavior_series_name, fill_gaps, outcome_series, throughput_series, Completion, DailySeries,
    Granularity, OutcomeRule, Role,
};
use chrono::{Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn poisson_daily_handovers() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let poisson = Poisson::new(4.0).unwrap();
    let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
    let mut events = Vec::new();
    let mut case = 0;
    for day in 0..200i64 {
        let k: f64 = poisson.sample(&mut rng);
        // one handover per two-event case, both events inside the day
        for _ in 0..k as usize {
            let start = t0 + Duration::days(day) + Duration::seconds(rng.gen_range(0..40_000));
            for (j, actor) in ["a", "b"].iter().enumerate() {
                events.push(Event {
                    case_id: format!("c{case}"),
                    activity: "x".into(),
                    timestamp: start + Duration::seconds(1000 * j as i64),
                    actor: Some(actor.to_string()),
                    sequence_index: events.len(),
                });
            }
            case += 1;
        }
    }
    let log = validate_and_sort(EventLog::new(events)).0;
    let c = classify_log(&log, &ActorIndex::build(&log));
    let series = behavior_series::<f64>(&c.transitions, Granularity::Global, 10);
    let total: Vec<f64> = (0..series[0].len())
        .map(|d| series.iter().filter(|s| s.name == "HI" || s.name == "HB").map(|s| s.values[d]).sum())
        .collect();
    let (m, se) = mean_and_se(&total);
    assert!((m - 4.0).abs() < 3.0 * se, "mean {m} se {se}");
}

#[test]
fn throughput_matches_group_by() {
    let log = generate_log(&SynthLogConfig {
        n_cases: 800,
        days: 90,
        seed: 11,
        ..SynthLogConfig::default()
    })
    .unwrap();
    let tt = throughput_series::<f64>(&log, &Completion::All).unwrap();

    let mut spans: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for e in log.events() {
        let t = e.timestamp.timestamp();
        let s = spans.entry(&e.case_id).or_insert((t, t));
        s.0 = s.0.min(t);
        s.1 = s.1.max(t);
    }
    let mut by_day: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (lo, hi) in spans.values() {
        by_day.entry(lo.div_euclid(86_400)).or_default().push((hi - lo) as f64 / 86_400.0);
    }
    let first_day = *by_day.keys().next().unwrap();
    for (day, v) in &by_day {
        let expected = v.iter().sum::<f64>() / v.len() as f64;
        let i = (day - first_day) as usize;
        assert!(!tt.mask[i]);
        assert!((tt.values[i] - expected).abs() < 1e-12);
    }
    assert_eq!(tt.len(), (by_day.keys().last().unwrap() - first_day + 1) as usize);
    assert!(tt.values.iter().all(|&v| v >= 0.0));
}

#[test]
fn bernoulli_outcome_rate() {
    let log = generate_log(&SynthLogConfig {
        n_cases: 4000,
        days: 200,
        outcome_rate: Some(0.3),
        seed: 3,
        ..SynthLogConfig::default()
    })
    .unwrap();
    let s = outcome_series::<f64>(&log, "accepted", &OutcomeRule::attribute("outcome"), &Completion::All).unwrap();
    let observed: Vec<f64> = s.values.iter().zip(&s.mask).filter(|(_, m)| !**m).map(|(v, _)| *v).collect();
    assert!(observed.iter().all(|v| (0.0..=1.0).contains(v)));
    let (m, se) = mean_and_se(&observed);
    assert!((m - 0.3).abs() < 3.0 * se, "mean {m} se {se}");
}

#[test]
fn alignment_clips_to_common_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let base = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
    for _ in 0..20 {
        let mut input = Vec::new();
        let (mut lo, mut hi) = (i64::MIN, i64::MAX);
        for i in 0..6 {
            let offset = rng.gen_range(0..30);
            let len = rng.gen_range(40..80);
            lo = lo.max(offset);
            hi = hi.min(offset + len - 1);
            let values: Vec<f64> = (0..len).map(|_| rng.gen()).collect();
            let role = if i < 3 { Role::Behavior } else { Role::Kpi };
            input.push((DailySeries::observed(format!("s{i}"), base + Duration::days(offset), values), role));
        }
        let originals = input.clone();
        let panel = align(input).unwrap();
        assert_eq!(panel.len() as i64, hi - lo + 1);
        assert_eq!(panel.start_day(), base + Duration::days(lo));
        for (s, _) in &originals {
            let skip = (panel.start_day() - s.start_day).num_days() as usize;
            assert_eq!(panel.values(&s.name).unwrap(), &s.values[skip..skip + panel.len()]);
        }
    }
}

fn random_log(seed: u64, n: usize) -> EventLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = Utc.with_ymd_and_hms(2022, 5, 1, 0, 0, 0).unwrap();
    let events = (0..n)
        .map(|i| Event {
            case_id: format!("c{}", rng.gen_range(0..(n / 4).max(1))),
            activity: format!("a{}", rng.gen_range(0..4)),
            timestamp: t0 + Duration::minutes(rng.gen_range(0..20_000)),
            actor: Some(format!("r{}", rng.gen_range(0..6))),
            sequence_index: i,
        })
        .collect();
    validate_and_sort(EventLog::new(events)).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grouped_series_partition_global(seed in any::<u64>(), n in 20usize..400) {
        let log = random_log(seed, n);
        let c = classify_log(&log, &ActorIndex::build(&log));
        prop_assume!(!c.transitions.is_empty());
        let global = behavior_series::<f64>(&c.transitions, Granularity::Global, 10);
        for g in [Granularity::PerActor, Granularity::PerActivity] {
            let grouped = behavior_series::<f64>(&c.transitions, g, usize::MAX);
            for b in BehaviorType::ALL {
                let whole = global.iter().find(|s| s.name == behavior_series_name(b, Granularity::Global, "")).unwrap();
                let prefix = format!("{}@", b.code());
                let mut sum = vec![0.0; whole.len()];
                for s in grouped.iter().filter(|s| s.name.starts_with(&prefix)) {
                    prop_assert_eq!(s.start_day, whole.start_day);
                    for (acc, v) in sum.iter_mut().zip(&s.values) {
                        *acc += v;
                    }
                }
                prop_assert_eq!(&sum, &whole.values);
            }
        }
    }

    #[test]
    fn gap_filling_keeps_observed_values(raw in prop::collection::vec(prop::option::of(-1e6f64..1e6), 1..100)) {
        match fill_gaps(&raw) {
            None => prop_assert!(raw.iter().all(Option::is_none)),
            Some((values, mask)) => {
                prop_assert_eq!(values.len(), raw.len());
                for ((r, v), m) in raw.iter().zip(&values).zip(&mask) {
                    prop_assert_eq!(*m, r.is_none());
                    if let Some(x) = r {
                        prop_assert_eq!(x.to_bits(), v.to_bits());
                    }
                    prop_assert!(v.is_finite());
                }
            }
        }
    }

    #[test]
    fn kpis_are_in_range(seed in any::<u64>(), n in 10usize..300) {
        let log = random_log(seed, n);
        let tt = throughput_series::<f64>(&log, &Completion::All).unwrap();
        prop_assert!(tt.values.iter().all(|&v| v >= 0.0));
        let rule = OutcomeRule::Keyword { keywords: vec!["a1".into()] };
        let frac = outcome_series::<f64>(&log, "k", &rule, &Completion::All).unwrap();
        prop_assert!(frac.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert_eq!(tt.len(), frac.len());
    }
}
