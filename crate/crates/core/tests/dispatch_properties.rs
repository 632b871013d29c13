//! Invariants of every dispatch mode on random small networks.

mod common;

use common::random_instance;
use gridshare::dispatch::{
    audit, battery_trajectory, cost, cumulative_battery, dispatch_perfect, dispatch_zero, DispatchContext,
    DispatchParams, EnergySchedule, SharingMode,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn initial(net: &gridshare::model::NetworkModel) -> Vec<f64> {
    net.stations.iter().map(|s| s.battery.initial_wh).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedules_pass_the_audit(seed in any::<u64>(), strict in any::<bool>()) {
        let (net, links, profiles) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), strict);
        let params = DispatchParams::default();
        for mode in SharingMode::ALL {
            let ctx = DispatchContext { net: &net, links: &links, mode, params: &params };
            for s in [dispatch_zero(&ctx, &profiles).unwrap(), dispatch_perfect(&ctx, &profiles).unwrap()] {
                let report = audit(&ctx, &profiles, &s);
                prop_assert!(report.passes(strict), "{mode:?}: {report:?}");
            }
        }
    }

    #[test]
    fn recursion_equals_cumulative_form(seed in any::<u64>()) {
        let (net, links, profiles) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let params = DispatchParams::default();
        let ctx = DispatchContext { net: &net, links: &links, mode: SharingMode::Hybrid, params: &params };
        let s = dispatch_perfect(&ctx, &profiles).unwrap();
        let b0 = initial(&net);
        let stepped = battery_trajectory(&s, &profiles.generation, &b0).unwrap();
        let summed = cumulative_battery(&s, &profiles.generation, &b0);
        for (a, b) in stepped.iter().flatten().zip(summed.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn sharing_never_costs_more(seed in any::<u64>()) {
        let (net, links, profiles) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let params = DispatchParams::default();
        let run = |mode| {
            let ctx = DispatchContext { net: &net, links: &links, mode, params: &params };
            let s: EnergySchedule = dispatch_perfect(&ctx, &profiles).unwrap();
            cost(&s, &net.prices).total
        };
        let hybrid = run(SharingMode::Hybrid);
        let sg = run(SharingMode::SgOnly);
        let physical = run(SharingMode::PhysicalOnly);
        let none = run(SharingMode::NoSharing);
        prop_assert!(hybrid <= sg + 1e-6 && hybrid <= physical + 1e-6, "{hybrid} {sg} {physical}");
        prop_assert!(sg <= none + 1e-6 && physical <= none + 1e-6, "{sg} {physical} {none}");
    }

    #[test]
    fn foresight_never_costs_more(seed in any::<u64>()) {
        let (net, links, profiles) = random_instance(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let params = DispatchParams::default();
        for mode in SharingMode::ALL {
            let ctx = DispatchContext { net: &net, links: &links, mode, params: &params };
            let perfect = cost(&dispatch_perfect(&ctx, &profiles).unwrap(), &net.prices).total;
            let zero = cost(&dispatch_zero(&ctx, &profiles).unwrap(), &net.prices).total;
            prop_assert!(perfect <= zero + 1e-6, "{mode:?}: {perfect} > {zero}");
        }
    }
}
