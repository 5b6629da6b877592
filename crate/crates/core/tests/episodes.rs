use proptest::prelude::*;
use ris_fbl_core::metrics::{absorption, adaptation, resilience, RateSnapshot, RatioMode, ResilienceWeights};
use ris_fbl_core::model::SystemConfig;
use ris_fbl_core::scenario::{run_episode, sweep, EpisodeOptions, SweepGrid, CSV_HEADER};

fn small() -> SystemConfig {
    let mut c = SystemConfig::reference();
    c.n_aps = 2;
    c.antennas_per_ap = 2;
    c.n_users = 2;
    c.n_ris_elements = 9;
    c.area_half_extent_m = 250.0;
    c.rate_targets_bps = vec![40e6; 2];
    c
}

#[test]
fn scores_stay_in_unit_interval_for_every_policy() {
    for policy in ["decide", "always-recover", "always-ignore"] {
        for branch in ["stale", "reoptimize"] {
            let opts = EpisodeOptions {
                policy: policy.into(),
                ignore_branch: branch.into(),
                ..Default::default()
            };
            for seed in 0..3 {
                let e = run_episode(&small(), seed, &opts);
                assert!(!e.status.is_failed(), "{policy}/{branch}/{seed}: {:?}", e.status);
                for x in [e.r_abs, e.r_ada, e.r_rec, e.r] {
                    assert!((0.0..=1.0).contains(&x), "{policy}/{branch}/{seed}: {x}");
                }
                assert_eq!(e.blocked_links.len(), 1);
            }
        }
    }
}

#[test]
fn sweep_csv_has_one_row_per_cell() {
    let grid = SweepGrid {
        blocklengths: vec![50, 500],
        ris_elements: vec![4, 9],
        seeds: vec![3, 4],
    };
    let table = sweep(&small(), &grid, &EpisodeOptions::default(), Some(2)).unwrap();
    let csv = table.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let keys: Vec<String> = lines
        .map(|l| l.split(',').take(3).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        ["50,4,3", "50,4,4", "50,9,3", "50,9,4", "500,4,3", "500,4,4", "500,9,3", "500,9,4"]
    );
}

proptest! {
    #[test]
    fn capped_resilience_is_a_convex_combination(
        a in prop::collection::vec(0.0f64..100e6, 1..6),
        l1 in 0.0f64..1.0,
        split in 0.0f64..1.0,
    ) {
        let d = vec![37e6; a.len()];
        let snap = RateSnapshot::new(a, d).unwrap();
        let w = ResilienceWeights::new([l1, (1.0 - l1) * split, 1.0 - l1 - (1.0 - l1) * split]).unwrap();
        let ab = absorption(&snap, RatioMode::Capped);
        let ad = adaptation(&snap, RatioMode::Capped);
        let r = resilience(ab, ad, 1.0, &w);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&r));
        prop_assert!(absorption(&snap, RatioMode::Uncapped) >= ab);
    }
}
