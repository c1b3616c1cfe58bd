use lienard_core::bifurcate::{
    continue_cycle, find_fold, staircase_assignment, staircase_construct, staircase_system, BranchEvent, StaircaseOptions, StaircaseShape,
    StepPolicy,
};
use lienard_core::cycles::{find_cycles, return_map, GridSpec, LimitCycle};
use lienard_core::integrate::{next_crossing, Anchor, Crossing, IntegratorConfig, Section};
use lienard_core::polysys::{build_canonical, build_lienard, build_rychkov, linear_center, Entry, Instance, ParameterAssignment, Reversed};
use proptest::prelude::*;

fn side(c: &LimitCycle) -> f64 {
    (c.m() - 1.0).signum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn halving_tolerances_barely_moves_the_period(exp in 6.0f64..9.0, s in 0.1f64..2.0) {
        let inst = Instance::new(&linear_center(), &ParameterAssignment::new()).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let rtol = 10f64.powf(-exp);
        let coarse = IntegratorConfig::verification().with_tolerances(rtol, rtol * 1e-2);
        let fine = coarse.with_tolerances(rtol / 2.0, rtol * 5e-3);
        let a = return_map(&inst, &section, s, &coarse).unwrap();
        let b = return_map(&inst, &section, s, &fine).unwrap();
        let estimate = 10.0 * (coarse.rtol * a.period + coarse.atol);
        prop_assert!((a.period - b.period).abs() <= estimate, "{} vs {}", a.period, b.period);
    }

    #[test]
    fn reversible_flow_retraces_itself(mu2 in -0.5f64..0.5, mu4 in -0.5f64..0.5, s in 0.05f64..0.4) {
        let sys = build_lienard(2, &[Entry::int(0), Entry::int(0), Entry::int(0)], &[Entry::sym("mu2"), Entry::sym("mu4")]).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::from_pairs([("mu2", mu2), ("mu4", mu4)])).unwrap();
        let cfg = IntegratorConfig::verification();
        let left = Section::new(&inst, -10.0, 0.0, 1, Anchor::High).unwrap();
        let Crossing::Hit(half) = next_crossing(&inst, [s, 0.0], &left, &cfg).unwrap() else {
            panic!("no crossing of the negative axis");
        };
        // Time reversal flips the crossing direction on the positive axis.
        let right = Section { a: 0.0, b: 10.0, sign: 1, anchor: Anchor::Low };
        let Crossing::Hit(back) = next_crossing(&Reversed(&inst), half.point, &right, &cfg).unwrap() else {
            panic!("no return in reversed time");
        };
        prop_assert!((back.point[0] - s).abs() <= 10.0 * (cfg.atol + cfg.rtol * s), "{} vs {s}", back.point[0]);
    }

    #[test]
    fn larger_escape_radius_keeps_hits(s in 0.05f64..3.0, r in 3.0f64..50.0, factor in 1.0f64..20.0) {
        let sys = build_canonical(1).unwrap();
        let inst = Instance::new(&sys, &ParameterAssignment::from_pairs([("mu1", 0.05), ("mu3", 0.5)])).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let mut small = IntegratorConfig::verification();
        small.escape_radius = r;
        let mut large = small;
        large.escape_radius = r * factor;
        if let Crossing::Hit(a) = next_crossing(&inst, [s, 0.0], &section, &small).unwrap() {
            let Crossing::Hit(b) = next_crossing(&inst, [s, 0.0], &section, &large).unwrap() else {
                panic!("hit became a stop");
            };
            prop_assert!((a.point[0] - b.point[0]).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn cycles_match_sign_changes_and_alternate(ratio in 8.0f64..40.0, scale in 0.5f64..2.0) {
        let sys = staircase_system(2, StaircaseShape::OddOnly).unwrap();
        let inst = Instance::new(&sys, &staircase_assignment(2, ratio, scale, -1.0)).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let r = find_cycles(&inst, &section, &GridSpec::default(), &IntegratorConfig::verification()).unwrap();
        let ok: Vec<f64> = r.samples.iter().filter(|s| s.is_ok()).map(|s| s.displacement).collect();
        let changes = ok.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        prop_assert_eq!(r.count(), changes);
        for w in r.cycles.windows(2) {
            prop_assert!(w[0].s < w[1].s);
            prop_assert_eq!(side(&w[0]), -side(&w[1]));
        }
        for c in &r.cycles {
            prop_assert_eq!(c.signature_text(), "1");
        }
    }

    #[test]
    fn staircase_results_are_nested(k in 1usize..=2, ratio in 10.0f64..40.0, scale in 0.5f64..3.0) {
        let out = staircase_construct(k, ratio, scale, 1, &StaircaseOptions::default(), &IntegratorConfig::verification()).unwrap();
        if out.achieved {
            prop_assert_eq!(out.cycles.len(), k);
            for w in out.cycles.windows(2) {
                prop_assert!(w[0].s < w[1].s);
                prop_assert_eq!(side(&w[0]), -side(&w[1]));
            }
            prop_assert!(out.cycles.iter().all(|c| c.signature_text() == "1"));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3))]

    #[test]
    fn folds_separate_counts_by_two(mu1 in -2e-3f64..-5e-4) {
        // Leading-order averaging puts the fold at mu3^2 = (40/9)·mu1·mu5.
        let predicted = (40.0 / 9.0 * mu1 * -1.0f64).sqrt();
        let sys = build_rychkov().unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", mu1), ("mu3", predicted), ("mu5", -1.0)]);
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let fold = find_fold(&sys, &a, "mu3", (0.8 * predicted, 1.5 * predicted), &section, &IntegratorConfig::verification()).unwrap();
        prop_assert_eq!(fold.side_counts.0.abs_diff(fold.side_counts.1), 2);
        prop_assert!((fold.m() - 1.0).abs() <= 1e-3);
        prop_assert!((fold.value / predicted - 1.0).abs() < 0.05, "{} vs {predicted}", fold.value);
    }

    #[test]
    fn hopf_branches_end_at_trace_zero(start in 0.03f64..0.1) {
        let sys = build_canonical(1).unwrap();
        let a = ParameterAssignment::from_pairs([("mu1", start), ("mu3", -1.0)]);
        let inst = Instance::new(&sys, &a).unwrap();
        let section = Section::new(&inst, 0.0, 10.0, -1, Anchor::Low).unwrap();
        let cfg = IntegratorConfig::verification();
        let seed = find_cycles(&inst, &section, &GridSpec::default(), &cfg).unwrap().cycles.pop().unwrap();
        let branch = continue_cycle(&sys, &a, "mu1", -0.05, &seed, &StepPolicy::for_range(start, -0.05), &cfg).unwrap();
        let BranchEvent::AmplitudeToZero { hopf, extrapolated } = &branch.termination else {
            panic!("ended with {}", branch.termination.label());
        };
        // The trace at the origin is mu1.
        prop_assert!(hopf.value.abs() <= 1e-6);
        prop_assert!(extrapolated.abs() <= 1e-6);
        let s: Vec<f64> = branch.samples.iter().map(|b| b.cycle.s).collect();
        prop_assert!(s.windows(2).all(|w| w[1] < w[0]));
    }
}
