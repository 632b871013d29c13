//! Structural properties of the four clustering algorithms on random
//! layouts and NRE statistics.

use gridshare::clustering::{cluster, AssociationMatrix, ClusteringMethod, ClusteringParams, MetricContext, NreTable};
use gridshare::model::{distance, CableModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Layout {
    positions: Vec<[f64; 2]>,
    table: NreTable,
    cable: CableModel,
}

fn layout(seed: u64) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(1..=9);
    let n = rng.random_range(1..=6);
    let positions = (0..k).map(|_| [rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)]).collect();
    let mean = (0..k).map(|_| (0..n).map(|_| rng.random_range(-100.0..100.0)).collect()).collect();
    let std = (0..k).map(|_| (0..n).map(|_| rng.random_range(1.0..60.0)).collect()).collect();
    let cable = CableModel { sharing_range_km: rng.random_range(0.0..4.0), ..CableModel::default() };
    Layout { positions, table: NreTable::new(mean, std), cable }
}

fn run(l: &Layout, method: ClusteringMethod) -> AssociationMatrix {
    let params = ClusteringParams::default();
    let ctx = MetricContext { positions: &l.positions, params: &params, cable: &l.cable, tau: 1.0 };
    cluster(method, &l.table, &ctx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrices_are_symmetric_and_in_range(seed in any::<u64>()) {
        let l = layout(seed);
        for method in ClusteringMethod::ALL {
            let a = run(&l, method);
            let rows = a.rows();
            for i in 0..rows.len() {
                prop_assert_eq!(rows[i][i], 0);
                for j in 0..rows.len() {
                    prop_assert_eq!(rows[i][j], rows[j][i]);
                    if rows[i][j] == 1 {
                        prop_assert!(distance(l.positions[i], l.positions[j]) <= l.cable.sharing_range_km);
                    }
                }
            }
            if method == ClusteringMethod::DivisiveAea || method == ClusteringMethod::DivisiveSea {
                prop_assert!(a.edge_count() < l.positions.len().max(1));
            }
        }
    }

    #[test]
    fn nothing_links_below_the_closest_pair(seed in any::<u64>()) {
        let mut l = layout(seed);
        let k = l.positions.len();
        let closest = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| distance(l.positions[i], l.positions[j]))
            .fold(f64::INFINITY, f64::min);
        l.cable.sharing_range_km = if closest.is_finite() { closest * 0.999 } else { 1.0 };
        for method in ClusteringMethod::ALL {
            prop_assert_eq!(run(&l, method).edge_count(), 0);
        }
    }

    #[test]
    fn aea_never_links_equal_signs(seed in any::<u64>()) {
        let l = layout(seed);
        let avg = &l.table.average;
        for method in [ClusteringMethod::AgglomerativeAea, ClusteringMethod::DivisiveAea] {
            for (i, j) in run(&l, method).edges() {
                prop_assert!(avg[i].signum() != avg[j].signum(), "{method:?} linked {i}-{j}: {} {}", avg[i], avg[j]);
            }
        }
    }
}
