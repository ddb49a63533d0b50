use proptest::prelude::*;

use clairaut::annulus::{
    count_orbits, find_periodic, iterate_lift, periodic_residual, rotation_number, AnnulusMapSpec,
    SeedGrid, Twist,
};
use clairaut::counting::coprime_count;
use clairaut::numerics::gcd;

fn perturbed() -> AnnulusMapSpec {
    AnnulusMapSpec::new(1.0, Twist::Tan, 0.05).unwrap()
}

#[test]
fn integrable_counts_are_coprime_counts() {
    for twist in [Twist::Tan, Twist::Linear] {
        let map = AnnulusMapSpec::new(1.0, twist, 0.0).unwrap();
        let band = match twist {
            Twist::Tan => (0.0, 1.0),
            Twist::Linear => (0.1, 0.7),
        };
        let c = count_orbits(&map, band, 15, SeedGrid::default(), None).unwrap();
        for &(t, n) in &c.series.points {
            assert_eq!(
                n,
                coprime_count(band.0, band.1, t as usize).unwrap(),
                "{twist:?} at t = {t}"
            );
        }
    }
}

#[test]
fn twist_range_is_checked() {
    let map = AnnulusMapSpec::new(1.0, Twist::Linear, 0.0).unwrap();
    assert!(count_orbits(&map, (0.0, 2.0), 5, SeedGrid::default(), None).is_err());
}

#[test]
fn search_rejects_non_coprime() {
    assert!(find_periodic(&perturbed(), 2, 4, SeedGrid::default()).is_err());
}

#[test]
fn found_orbits_are_distinct_cycles() {
    let map = perturbed();
    let seeds = SeedGrid {
        nx: 24,
        neta: 7,
        width: 2.0,
    };
    for (p, q) in [(1, 1), (1, 2), (2, 3), (1, 3)] {
        let s = find_periodic(&map, p, q, seeds).unwrap();
        assert!(!s.family);
        for (i, a) in s.orbits.iter().enumerate() {
            assert!(periodic_residual(&map, (a.x, a.eta), p, q).unwrap() < 1e-9);
            let cycle = iterate_lift(&map, (a.x, a.eta), q as usize).unwrap();
            for b in &s.orbits[i + 1..] {
                for z in &cycle {
                    let dx = (z.0 - b.x).rem_euclid(map.length);
                    let dx = dx.min(map.length - dx);
                    assert!(
                        dx + (z.1 - b.eta).abs() > 1e-6,
                        "({p}, {q}) orbit listed twice"
                    );
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integrable_rotation_is_the_twist(eta in -0.9..0.9f64) {
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.0).unwrap();
        let rot = rotation_number(&map, (0.3, eta), 200).unwrap();
        prop_assert!((rot.value - map.integrable_rotation(eta)).abs() < 1e-10);
    }

    #[test]
    fn linear_solve_inverts(rho in -0.95..0.95f64) {
        let map = AnnulusMapSpec::new(2.0, Twist::Linear, 0.0).unwrap();
        let eta = map.solve_twist(rho).unwrap();
        prop_assert!((eta + rho).abs() < 1e-12);
    }

    #[test]
    fn integrable_pair_is_a_family(q in 1u64..8, p in 0i64..8) {
        prop_assume!((p as u64) <= q && gcd(p as u64, q) == 1);
        let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.0).unwrap();
        let s = find_periodic(&map, p, q, SeedGrid::default()).unwrap();
        prop_assert!(s.family);
        prop_assert_eq!(s.count(), 1);
    }
}
