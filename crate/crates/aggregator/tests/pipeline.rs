use proptest::prelude::*;
use sprayq_aggregator::channels::*;
use sprayq_aggregator::features::{extract_from_table, FeatureConfig};
use sprayq_aggregator::impute::{impute, CellSource, RegressionReference};
use sprayq_aggregator::pipeline::{process_epoch, Aggregator, AggregatorConfig};
use sprayq_aggregator::sync::{synchronize, AlignedTable};
use sprayq_aggregator::{SensorEvent, StaticParams, FEATURE_NAMES};

/// Status on at `t0`, off at `t1`; every sensor channel polled at 100 ms with
/// `value(channel, t)`.
fn epoch_events(cfg: &AggregatorConfig, t0: i64, t1: i64, value: impl Fn(&str, i64) -> Option<f64>) -> Vec<SensorEvent> {
    let mut out = Vec::new();
    let mut t = t0;
    while t < t1 {
        out.push(SensorEvent::good(ROBOT_STATUS, t, STATUS_COATING));
        for c in &cfg.channels {
            out.push(match value(&c.id, t) {
                Some(v) => SensorEvent::good(c.id.clone(), t, v),
                None => SensorEvent::missing(c.id.clone(), t),
            });
        }
        t += 100;
    }
    out.push(SensorEvent::good(ROBOT_STATUS, t1, STATUS_IDLE));
    out
}

fn nominal(cfg: &AggregatorConfig, ch: &str) -> f64 {
    cfg.channels.iter().find(|c| c.id == ch).unwrap().target_value
}

#[test]
fn constant_booth_gives_nominal_features() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let statics = StaticParams { stand_off_distance: 230.0, coating_velocity: 500.0, powder_feed_rate: 55.0 };
    agg.set_static_params(statics);
    let evs = epoch_events(&cfg, 1_000, 11_000, |ch, _| Some(nominal(&cfg, ch)));
    let mut closed = Vec::new();
    for e in &evs {
        closed.extend(agg.ingest(e));
    }
    assert_eq!(closed.len(), 1);
    let ep = &closed[0];
    assert_eq!((ep.start_ms, ep.end_ms), (1_000, 11_000));
    assert!(ep.series.iter().all(|s| s.len() == 2), "constant channels keep first and closing points");
    let f = ep.features.as_ref().unwrap();
    assert_eq!(f.get("fuel_flow_avg"), Some(60.0));
    assert_eq!(f.get("lambda"), Some(288.0 / 60.0 / 5.0));
    assert_eq!(f.get("fuel_flow_std"), Some(0.0));
    assert_eq!(f.get("stand_off_distance"), Some(230.0));
    assert!(f.values.iter().all(|v| v.is_finite()));
    assert!(f.flags.imputed_channels.is_empty());
    assert_eq!(agg.stats().out_of_order, 0);
}

#[test]
fn two_epochs_two_feature_rows() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let mut evs = epoch_events(&cfg, 0, 5_000, |ch, _| Some(nominal(&cfg, ch)));
    evs.extend(epoch_events(&cfg, 8_000, 12_000, |ch, _| Some(1.1 * nominal(&cfg, ch))));
    let closed: Vec<_> = evs.iter().filter_map(|e| agg.ingest(e)).collect();
    assert_eq!(closed.len(), 2);
    assert_eq!(closed[0].epoch, 0);
    assert_eq!(closed[1].epoch, 1);
    let a = closed[0].features.as_ref().unwrap().get("fuel_flow_avg").unwrap();
    let b = closed[1].features.as_ref().unwrap().get("fuel_flow_avg").unwrap();
    assert!((b / a - 1.1).abs() < 1e-12);
}

#[test]
fn partial_features_at_close_equal_final() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let wave = |ch: &str, t: i64| Some(nominal(&cfg, ch) * (1.0 + 0.05 * ((t as f64) / 700.0).sin()));
    let evs = epoch_events(&cfg, 0, 6_000, wave);
    let (last, body) = evs.split_last().unwrap();
    for e in body {
        assert!(agg.ingest(e).is_none());
    }
    let (_, partial) = agg.partial_features(6_000).unwrap();
    let closed = agg.ingest(last).unwrap();
    assert_eq!(closed.features.unwrap(), partial);
}

#[test]
fn missing_channel_without_regressors_reports_error_but_closes() {
    let mut cfg = AggregatorConfig::default();
    cfg.impute.regressors.clear();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let evs = epoch_events(&cfg, 0, 3_000, |ch, _| (ch != ENV_HUMIDITY).then(|| nominal(&cfg, ch)));
    let closed: Vec<_> = evs.iter().filter_map(|e| agg.ingest(e)).collect();
    assert_eq!(closed.len(), 1);
    assert!(closed[0].features.is_none());
    assert!(closed[0].error.as_ref().unwrap().contains(ENV_HUMIDITY));
}

#[test]
fn reference_epoch_enables_regression_imputation() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let fuel = |t: i64| 60.0 + 3.0 * ((t as f64) / 900.0).sin();
    let val = |ch: &str, t: i64| match ch {
        FUEL_FLOW => Some(fuel(t)),
        OXYGEN_FLOW => Some(4.8 * fuel(t)),
        _ => Some(nominal(&cfg, ch)),
    };
    for e in epoch_events(&cfg, 0, 20_000, val) {
        agg.ingest(&e);
    }
    assert!(agg.reference().rows_for(OXYGEN_FLOW) > 100);
    let no_oxygen = |ch: &str, t: i64| if ch == OXYGEN_FLOW { None } else { val(ch, t) };
    let closed: Vec<_> = epoch_events(&cfg, 30_000, 40_000, no_oxygen).iter().filter_map(|e| agg.ingest(e)).collect();
    let ep = &closed[0];
    let f = ep.features.as_ref().unwrap();
    assert_eq!(f.flags.imputed_channels, vec![OXYGEN_FLOW.to_string()]);
    let done = ep.completed.as_ref().unwrap();
    let oi = done.channels.iter().position(|c| c == OXYGEN_FLOW).unwrap();
    assert!(done.sources[oi].iter().all(|s| *s == CellSource::Regression));
    // fuel is stored with a 0.6 l/min deadband, so the recovered oxygen is within 4.8 of 0.6
    for (r, &t) in done.t_ms.iter().enumerate() {
        assert!((done.columns[oi][r] - 4.8 * fuel(t)).abs() <= 4.8 * 0.6 + 1e-6);
    }
}

#[test]
fn out_of_order_and_unknown_events_are_counted() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg).unwrap();
    agg.ingest(&SensorEvent::good(FUEL_FLOW, 0, 1.0));
    agg.ingest(&SensorEvent::good(ROBOT_STATUS, 0, STATUS_COATING));
    agg.ingest(&SensorEvent::good(FUEL_FLOW, 500, 60.0));
    agg.ingest(&SensorEvent::good(FUEL_FLOW, 400, 60.0));
    agg.ingest(&SensorEvent::good("no_such_channel", 500, 1.0));
    let s = agg.stats();
    assert_eq!((s.outside_epoch, s.out_of_order, s.unknown_channel), (1, 1, 1));
}

#[test]
fn status_silence_closes_epoch_by_watchdog() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg).unwrap();
    agg.ingest(&SensorEvent::good(ROBOT_STATUS, 0, STATUS_COATING));
    let mut closed = None;
    for k in 1..40 {
        closed = closed.or(agg.ingest(&SensorEvent::good(FUEL_FLOW, k * 100, 60.0)));
    }
    let ep = closed.expect("watchdog closes the epoch");
    assert_eq!(ep.end_ms, 2_100);
    assert!(agg.open_epoch().is_none());
}

#[test]
fn config_validation() {
    let mut cfg = AggregatorConfig::default();
    cfg.impute.regressors.insert("ghost".into(), vec![FUEL_FLOW.into()]);
    assert!(Aggregator::new(cfg).is_err());
    let mut cfg = AggregatorConfig::default();
    cfg.channels.push(ChannelConfig::new(FUEL_FLOW, "l/min", 1.0, ChannelRole::GasFlow));
    assert!(Aggregator::new(cfg).is_err());
    let json = serde_json::to_string(&AggregatorConfig::default()).unwrap();
    let back: AggregatorConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, AggregatorConfig::default());
}

fn table_from(cols: &[Vec<Option<f64>>]) -> AlignedTable {
    let rows = cols[0].len();
    AlignedTable {
        start_ms: 0,
        end_ms: (rows as i64 - 1) * 100,
        step_ms: 100,
        t_ms: (0..rows as i64).map(|i| i * 100).collect(),
        channels: (0..cols.len()).map(|i| format!("c{i}")).collect(),
        columns: cols.to_vec(),
    }
}

proptest! {
    #[test]
    fn imputation_never_alters_present_cells(
        cols in prop::collection::vec(prop::collection::vec(prop::option::weighted(0.8, -100.0f64..100.0), 12), 1..5)
    ) {
        prop_assume!(cols.iter().all(|c| c.iter().any(Option::is_some)));
        let t = table_from(&cols);
        let done = impute(&t, &RegressionReference::default()).unwrap();
        for (c, col) in cols.iter().enumerate() {
            for (r, cell) in col.iter().enumerate() {
                if let Some(v) = cell {
                    prop_assert_eq!(done.columns[c][r], *v);
                    prop_assert_eq!(done.sources[c][r], CellSource::Observed);
                } else {
                    prop_assert_eq!(done.sources[c][r], CellSource::Mean);
                }
            }
        }
    }

    #[test]
    fn grid_refinement_moves_averages_less_than_deadband(seed in 0u64..500, len_s in 3i64..20) {
        let cfg = AggregatorConfig::default();
        let wave = |ch: &str, t: i64| {
            let phase = (seed % 17) as f64 + t as f64 / (300.0 + (seed % 7) as f64 * 100.0);
            Some(nominal(&cfg, ch) * (1.0 + 0.03 * phase.sin()))
        };
        let mut agg = Aggregator::new(cfg.clone()).unwrap();
        let evs = epoch_events(&cfg, 0, len_s * 1_000, wave);
        let ep = evs.iter().filter_map(|e| agg.ingest(e)).next().unwrap();
        let reference = RegressionReference::default();
        let coarse = process_epoch(&ep.series, ep.start_ms, ep.end_ms, &cfg, &reference, &ep.statics).unwrap().2;
        let fine_cfg = AggregatorConfig { grid_step_ms: 50, ..cfg.clone() };
        let fine = process_epoch(&ep.series, ep.start_ms, ep.end_ms, &fine_cfg, &reference, &ep.statics).unwrap().2;
        let averaged = [
            (0, ENV_AIR_PRESSURE), (1, ENV_HUMIDITY), (2, ENV_TEMPERATURE), (6, COOLING_TEMPERATURE),
            (7, COOLING_FLOW), (8, FUEL_FLOW), (9, OXYGEN_FLOW), (10, SHROUD_FLOW),
            (17, PROPANE_TEMPERATURE), (18, AIRJET_FLOW),
        ];
        for (i, ch) in averaged {
            let bound = cfg.channels.iter().find(|c| c.id == ch).unwrap().deadband();
            prop_assert!((coarse.values[i] - fine.values[i]).abs() < bound, "{}", FEATURE_NAMES[i]);
        }
    }
}

#[test]
fn synchronized_table_shape_for_replayed_epoch() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    let ep = epoch_events(&cfg, 0, 10_000, |ch, _| Some(nominal(&cfg, ch)))
        .iter()
        .filter_map(|e| agg.ingest(e))
        .next()
        .unwrap();
    let t = synchronize(&ep.series, ep.start_ms, ep.end_ms, 100).unwrap();
    assert_eq!(t.rows(), 101);
    assert_eq!(t.channels.len(), cfg.channels.len());
    let done = impute(&t, &RegressionReference::default()).unwrap();
    let f = extract_from_table(&done, &StaticParams::default(), &FeatureConfig::default()).unwrap();
    assert_eq!(f.values.len(), 27);
}

#[test]
fn job_events_set_statics_of_next_epoch() {
    let cfg = AggregatorConfig::default();
    let mut agg = Aggregator::new(cfg.clone()).unwrap();
    agg.ingest(&SensorEvent::good(JOB_STAND_OFF_DISTANCE, 0, 210.0));
    agg.ingest(&SensorEvent::good(JOB_POWDER_FEED_RATE, 0, 70.0));
    let ep = epoch_events(&cfg, 100, 3_000, |ch, _| Some(nominal(&cfg, ch)))
        .iter()
        .filter_map(|e| agg.ingest(e))
        .next()
        .unwrap();
    assert_eq!(ep.statics.stand_off_distance, 210.0);
    assert_eq!(ep.statics.powder_feed_rate, 70.0);
    assert_eq!(ep.statics.coating_velocity, StaticParams::default().coating_velocity);
    assert_eq!(agg.stats().unknown_channel + agg.stats().outside_epoch, 0);
}

#[test]
fn live_out_of_band_flags_only_deviating_channels() {
    use sprayq_aggregator::live::{LiveConfig, LiveView};
    let chans = standard_channels();
    let mut v = LiveView::new(LiveConfig::default());
    let now = std::time::Instant::now();
    v.ingest(&SensorEvent::good(AIRJET_FLOW, 0, 90.0), now);
    v.ingest(&SensorEvent::good(FUEL_FLOW, 0, 60.5), now);
    v.ingest(&SensorEvent::missing(OXYGEN_FLOW, 0), now);
    assert_eq!(v.out_of_band(&chans, 5.0), vec![AIRJET_FLOW.to_string()]);
}
