use chrono::NaiveDate;
use hotspot_core::data::{build_grid, EventRecord, TimeWindow};
use hotspot_core::evaluation::{auc, event_area_curve, generate_synthetic_events, SyntheticSpec};
use hotspot_core::forecast::{ClassThresholds, HotspotGrid};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ks_two_sample(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn stationary_single_cluster_weeks_look_alike() {
    let start = NaiveDate::from_ymd_opt(2021, 1, 3).unwrap();
    let mut spec = SyntheticSpec::city(start, 2, 800.0, 21);
    spec.clusters.truncate(1);
    spec.clusters[0].weight = 1.0;
    spec.background = 0.0;
    let events = generate_synthetic_events(&spec).unwrap();
    let week = |w: usize| -> Vec<&EventRecord> { events.iter().filter(|e| spec.week_of(e.date) == w).collect() };
    let (a, b) = (week(0), week(1));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let critical = 1.628 * ((n + m) / (n * m)).sqrt();
    let fields: [fn(&EventRecord) -> f64; 3] = [|e| e.lon, |e| e.lat, |e| e.time_of_day];
    for f in fields {
        let d = ks_two_sample(a.iter().map(|e| f(e)).collect(), b.iter().map(|e| f(e)).collect());
        assert!(d < critical, "D {d} >= {critical}");
    }
}

#[test]
fn true_density_ranking_beats_other_rankings() {
    let start = NaiveDate::from_ymd_opt(2021, 1, 3).unwrap();
    let spec = SyntheticSpec::city_with_flares(start, 3, 4000.0, 5);
    let events = generate_synthetic_events(&spec).unwrap();
    let grid = build_grid(&spec.bbox, 400.0, None).unwrap();
    let window = TimeWindow::new(16.0, 20.0).unwrap();
    let actual: Vec<EventRecord> = events.iter().filter(|e| spec.week_of(e.date) == 2).cloned().collect();
    let map = |ld: Vec<f64>| HotspotGrid::from_log_density(ld, &grid, None, window, "r", ClassThresholds::default()).unwrap();
    let score = |ld: Vec<f64>| auc(&event_area_curve(&map(ld), &grid, &actual, window).unwrap()).unwrap();
    let centres = grid.centers();

    let truth = score(centres.iter().map(|&(x, y)| spec.interval_density(x, y, window, 2).ln()).collect());
    let mut rivals = vec![
        ("last week", centres.iter().map(|&(x, y)| spec.interval_density(x, y, window, 1).ln()).collect()),
        ("whole day", centres.iter().map(|&(x, y)| spec.interval_density(x, y, TimeWindow::FULL_DAY, 2).ln()).collect()),
        ("other window", centres.iter().map(|&(x, y)| spec.interval_density(x, y, TimeWindow::new(4.0, 8.0).unwrap(), 2).ln()).collect::<Vec<f64>>()),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut shuffled: Vec<f64> = (0..grid.len()).map(|i| i as f64).collect();
    shuffled.shuffle(&mut rng);
    rivals.push(("random", shuffled));
    for (name, ld) in rivals {
        let a = score(ld);
        assert!(truth >= a, "{name}: {a} beats the true density {truth}");
    }
}
