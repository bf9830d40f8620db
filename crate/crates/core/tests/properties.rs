use chrono::NaiveDate;
use hotspot_core::data::{build_grid, BoundingBox, EventRecord, TimeWindow};
use hotspot_core::evaluation::{auc, capture_from_curve, curve_from_counts, diff_maps, event_area_curve, transition_matrix};
use hotspot_core::forecast::{ClassThresholds, HotspotClass, HotspotGrid};
use hotspot_core::kernels::{von_mises_interval_mass, Concentration};
use proptest::prelude::*;

proptest! {
    #[test]
    fn interval_masses_partition_the_day(
        centre in 0.0..24.0f64,
        tau in 0.0..5000.0f64,
        mut cuts in prop::collection::vec(0.0..24.0f64, 0..8),
    ) {
        let c = Concentration::new(tau).unwrap();
        cuts.push(0.0);
        cuts.push(24.0);
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let m = von_mises_interval_mass(centre, w[0], w[1], c);
            prop_assert!(m >= -1e-12);
            total += m;
        }
        prop_assert!((total - 1.0).abs() < 1e-7);
    }

    #[test]
    fn curves_are_monotone_and_bounded(counts in prop::collection::vec(0usize..6, 2..60), outside in 0usize..5) {
        let n: usize = counts.iter().sum::<usize>() + outside;
        prop_assume!(n > 0);
        let order: Vec<u32> = (0..counts.len() as u32).rev().collect();
        let curve = curve_from_counts(&order, &counts, n, outside);
        for p in curve.points.windows(2) {
            prop_assert!(p[1].0 >= p[0].0 && p[1].1 >= p[0].1);
        }
        let a = auc(&curve).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let mut prev = 0.0;
        for k in [5.0, 20.0, 40.0, 100.0] {
            let c = capture_from_curve(&curve, k).unwrap();
            prop_assert!(c + 1e-12 >= prev && c <= 1.0 + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn maps_rank_and_classify_consistently(vals in prop::collection::vec(-30.0..0.0f64, 36)) {
        let grid = build_grid(&BoundingBox::around(77.2, 28.6, 3.0, 3.0), 500.0, None).unwrap();
        prop_assume!(grid.len() == 36);
        let t = ClassThresholds::default();
        let m = HotspotGrid::from_log_density(vals.clone(), &grid, None, TimeWindow::FULL_DAY, "p", t).unwrap();
        for w in m.order.windows(2) {
            prop_assert!(vals[w[0] as usize] >= vals[w[1] as usize]);
        }
        let red = m.class_count(HotspotClass::Red);
        prop_assert_eq!(red, (36.0 * t.red_pct / 100.0).ceil() as usize);
        for id in 0..36u32 {
            let r = m.rank[id as usize] as usize;
            prop_assert_eq!(m.class[id as usize] == HotspotClass::Red, r <= red);
        }
        let other = HotspotGrid::from_log_density(vals.iter().rev().cloned().collect(), &grid, None, TimeWindow::FULL_DAY, "q", t).unwrap();
        let tm = transition_matrix(&m, &other).unwrap();
        for row in tm.probs {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rescaling_densities_leaves_metrics_unchanged(
        vals in prop::collection::vec(-30.0..0.0f64, 36),
        shift in -50.0..50.0f64,
        pts in prop::collection::vec((77.18..77.22f64, 28.58..28.62f64, 0.0..24.0f64), 1..40),
    ) {
        let grid = build_grid(&BoundingBox::around(77.2, 28.6, 3.0, 3.0), 500.0, None).unwrap();
        prop_assume!(grid.len() == 36);
        let day = NaiveDate::from_ymd_opt(2021, 3, 21).unwrap();
        let events: Vec<EventRecord> = pts.iter().enumerate().map(|(i, &(x, y, t))| EventRecord::new(i.to_string(), x, y, day, t)).collect();
        let t = ClassThresholds::default();
        let a = HotspotGrid::from_log_density(vals.clone(), &grid, None, TimeWindow::FULL_DAY, "p", t).unwrap();
        let b = HotspotGrid::from_log_density(vals.iter().map(|v| v + shift).collect(), &grid, None, TimeWindow::FULL_DAY, "p", t).unwrap();
        let ca = event_area_curve(&a, &grid, &events, TimeWindow::FULL_DAY).unwrap();
        let cb = event_area_curve(&b, &grid, &events, TimeWindow::FULL_DAY).unwrap();
        prop_assert_eq!(auc(&ca), auc(&cb));
        prop_assert_eq!(capture_from_curve(&ca, 20.0), capture_from_curve(&cb, 20.0));
    }

    #[test]
    fn diff_blue_and_green_balance_under_fixed_quotas(a in prop::collection::vec(-30.0..0.0f64, 36), b in prop::collection::vec(-30.0..0.0f64, 36)) {
        let grid = build_grid(&BoundingBox::around(77.2, 28.6, 3.0, 3.0), 500.0, None).unwrap();
        prop_assume!(grid.len() == 36);
        let t = ClassThresholds::default();
        let ma = HotspotGrid::from_log_density(a, &grid, None, TimeWindow::FULL_DAY, "a", t).unwrap();
        let mb = HotspotGrid::from_log_density(b, &grid, None, TimeWindow::FULL_DAY, "b", t).unwrap();
        let d = diff_maps(&ma, &mb).unwrap();
        prop_assert_eq!(d.n_blue, d.n_green);
    }
}
