use proptest::prelude::*;
use radiomap_core::dataset::{
    aggregate_by_location, pair_nearest_neighbor, sample_std, split_train_test, MeasurementSet, RawSample, Waypoint,
};
use radiomap_core::grid::build_grid;
use radiomap_core::Point;

/// Samples jittered around waypoints on a 0.5 m lattice.
fn campaign() -> impl Strategy<Value = Vec<RawSample>> {
    prop::collection::vec((0u8..12, 0u8..12, -0.05f64..0.05, -0.05f64..0.05, 0.0f64..800.0), 1..300).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (cx, cy, dx, dy, t))| RawSample::new(0.5 * cx as f64 + dx, 0.5 * cy as f64 + dy, i as f64, t))
            .collect()
    })
}

proptest! {
    #[test]
    fn aggregation_preserves_mass_and_stats(samples in campaign()) {
        let set = aggregate_by_location(&samples, 0.2).unwrap();
        let total: usize = set.waypoints().iter().map(|w| w.n_samples).sum();
        prop_assert_eq!(total, samples.len());
        for w in set.waypoints() {
            // Brute force: all samples within 0.2 m of the centroid.
            let members: Vec<f64> = samples
                .iter()
                .filter(|s| s.position().distance(&w.position()) <= 0.2)
                .map(|s| s.throughput)
                .collect();
            prop_assert_eq!(members.len(), w.n_samples);
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            prop_assert!((mean - w.mean_throughput).abs() <= 1e-9 * mean.abs().max(1.0));
            let sd = sample_std(&members);
            prop_assert!((sd - w.std_throughput).abs() <= 1e-9 * sd.max(1.0));
        }
    }

    #[test]
    fn split_is_a_partition(n in 1usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let set = MeasurementSet::new((0..n).map(|i| Waypoint::new(i as f64, 0.0, 1.0, 0.0, 1)).collect()).unwrap();
        let (tr, te) = split_train_test(&set, frac, seed).unwrap();
        prop_assert_eq!(tr.len(), (frac * n as f64).round() as usize);
        let mut ids: Vec<i64> = tr.waypoints().iter().chain(te.waypoints()).map(|w| w.x as i64).collect();
        ids.sort_unstable();
        prop_assert_eq!(ids, (0..n as i64).collect::<Vec<_>>());
    }

    #[test]
    fn pairing_respects_threshold(
        wps in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..50),
        threshold in 0.05f64..1.0,
    ) {
        let mut uniq: Vec<Waypoint> = Vec::new();
        for (x, y) in wps {
            if uniq.iter().all(|w| w.position().distance(&Point::new(x, y)) > 1e-2) {
                uniq.push(Waypoint::new(x, y, 1.0, 0.0, 1));
            }
        }
        let set = MeasurementSet::new(uniq).unwrap();
        let grid = build_grid(Point::new(0.0, 0.0), Point::new(10.0, 10.0), 0.5, &[]).unwrap();
        let map = grid.try_map(|p| Ok(p.x + p.y)).unwrap();
        let pairing = pair_nearest_neighbor(&set, &map, threshold).unwrap();
        prop_assert_eq!(pairing.pairs.len() + pairing.unmatched.len(), set.len());
        for p in &pairing.pairs {
            prop_assert!(p.pairing_distance <= threshold);
            // Brute-force nearest over every cell.
            let best = grid.centers().map(|c| c.distance(&p.measured.position())).fold(f64::INFINITY, f64::min);
            prop_assert!((p.pairing_distance - best).abs() < 1e-12);
        }
    }
}

#[test]
fn different_seeds_give_different_partitions() {
    let set = MeasurementSet::new((0..900).map(|i| Waypoint::new(i as f64, 0.0, 1.0, 0.0, 1)).collect()).unwrap();
    let (a, _) = split_train_test(&set, 0.7, 1).unwrap();
    let (b, _) = split_train_test(&set, 0.7, 2).unwrap();
    let xs = |s: &MeasurementSet| s.waypoints().iter().map(|w| w.x).collect::<Vec<_>>();
    assert_ne!(xs(&a), xs(&b));
}
