//! Exit gate: one line per criterion, then a single assertion over all of them.
//!
//! The table goes to stderr: `cargo test --test acceptance`.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clairaut::annulus::{
    area_defect, count_orbits, find_periodic, AnnulusMapSpec, SeedGrid, Twist, NEWTON_TOL,
};
use clairaut::counting::{coprime_series, geodesic_count, top_decade, totient_sum, GrowthSeries};
use clairaut::linking::{
    satellite_core_linking, satellite_core_prediction, verify_link_table, DEFAULT_SAMPLES,
};
use clairaut::numerics::gcd;
use clairaut::numerics::quadrature::QuadratureConfig;
use clairaut::orbits::{catalog, Catalog, CLOSURE_TOL};
use clairaut::pipeline::{clairaut_drift, summarize_table};
use clairaut::profile::{Profile, ProfileParams};
use clairaut::return_map::{cap_integral, FTable, ReturnMap, TABLE_ODE_TOL};
use clairaut::symplectic::morse_bott::{Kind, PerturbationData, Which};
use clairaut::symplectic::{
    assemble_model_homology, cz_index, gradient_flowlines, maslov_loop, perturbed_pair, Mat2,
    SymplecticPath,
};
use clairaut::Result;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn run(
    id: usize,
    name: &'static str,
    budget_secs: u64,
    check: impl FnOnce() -> Result<(bool, String)>,
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match check() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_secs);
    Outcome {
        id,
        name,
        passed: passed && elapsed <= budget,
        detail,
        elapsed,
        budget,
    }
}

fn default_profile() -> Profile {
    Profile::build(ProfileParams::default()).unwrap()
}

fn clairaut_conservation() -> Result<(bool, String)> {
    let profile = default_profile();
    let drift = clairaut_drift(&profile, Default::default(), 100, 7)?;
    Ok((
        drift < 1e-8,
        format!("max drift {drift:.2e} over 100 starts, horizon 10 M"),
    ))
}

fn return_map_cross_validation() -> Result<(bool, String)> {
    let profile = default_profile();
    let map = ReturnMap::with_tolerances(&profile, TABLE_ODE_TOL, QuadratureConfig::default());
    let rows = map.tabulate(200, 0.99)?;
    let table = FTable::build(&map, 16, 10)?;
    let s = summarize_table(&rows, &map, &table)?;
    let passed = rows.len() == 200
        && s.max_w_residual < 1e-7
        && s.max_tau_relative_residual < 1e-5
        && s.f_strictly_decreasing
        && s.f_margin > 0.0
        && s.max_f_odd_residual < 1e-8
        && s.max_tau_even_residual < 1e-8;
    Ok((
        passed,
        format!(
            "W {:.1e}, tau rel {:.1e}, f margin {:.2e}, odd {:.1e}, even {:.1e}",
            s.max_w_residual,
            s.max_tau_relative_residual,
            s.f_margin,
            s.max_f_odd_residual,
            s.max_tau_even_residual
        ),
    ))
}

fn cap_identity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for c in [0.1, 0.25, 0.5, 0.9] {
        worst = worst.max((cap_integral(c, QuadratureConfig::default())? - PI / 2.0).abs());
    }
    Ok((worst < 1e-10, format!("max |I(c) - pi/2| = {worst:.1e}")))
}

fn census(cat: &Catalog) -> (bool, String) {
    let expected: usize = (1..=12u64)
        .map(|q| (1..q).filter(|&p| gcd(p, q) == 1).count())
        .sum();
    let worst = cat
        .records
        .iter()
        .map(|r| r.closure_residual)
        .fold(0.0, f64::max);
    let winding = cat
        .records
        .iter()
        .all(|r| r.winding_total == r.p + r.q as i64);
    let bound = cat
        .records
        .iter()
        .all(|r| r.lift_action <= 2.0 * r.q as f64 * cat.band_tau);
    let classes: HashSet<[i64; 4]> = cat.records.iter().map(|r| r.homology.to_array()).collect();
    let primitive = cat.records.iter().all(|r| {
        let a = r.homology.to_array();
        a.iter().fold(0, |g, &x| gcd(g, x.unsigned_abs())) == 1
    });
    let passed = expected == 45
        && cat.records.len() == 45
        && cat.failures.is_empty()
        && worst < CLOSURE_TOL
        && winding
        && bound
        && classes.len() == 45
        && primitive;
    (
        passed,
        format!(
            "{} records, closure {worst:.1e}, winding {winding}, action bound {bound}, {} distinct classes, primitive {primitive}",
            cat.records.len(),
            classes.len()
        ),
    )
}

fn link_table() -> Result<(bool, String)> {
    let report = verify_link_table(DEFAULT_SAMPLES)?;
    let mut values: Vec<i64> = report.pairs.iter().map(|p| p.computed).collect();
    values.sort();
    let signed: Vec<i64> = {
        let s = if values.iter().filter(|&&v| v == 1).count() == 2 {
            1
        } else {
            -1
        };
        let mut v: Vec<i64> = values.iter().map(|x| s * x).collect();
        v.sort();
        v
    };
    let table_ok = signed == vec![-1, -1, -1, -1, 1, 1];
    let mut worst: f64 = report.pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
    let mut satellites = 0;
    let mut satellites_ok = true;
    for p in 1..=5i64 {
        for q in 1..=5i64 {
            if gcd(p as u64, q as u64) != 1 {
                continue;
            }
            let (first, second) = satellite_core_linking(p, q, 0.5, DEFAULT_SAMPLES)?;
            let (e1, e2) = satellite_core_prediction(p, q, report.sigma);
            worst = worst.max(first.residual).max(second.residual);
            satellites_ok &= first.value.abs() == e1.abs() && second.value.abs() == e2.abs();
            satellites += 1;
        }
    }
    let passed = report.passed && table_ok && satellites_ok && worst < 0.05;
    Ok((
        passed,
        format!("pairs {signed:?}, {satellites} satellites match {satellites_ok}, max residual {worst:.1e}"),
    ))
}

fn counting(cat: &Catalog) -> Result<(bool, String)> {
    // Oracle: pairs 1 <= a <= n <= 10 with gcd 1, by brute force.
    let brute = (1..=10u64)
        .flat_map(|n| (1..=n).map(move |a| (a, n)))
        .filter(|&(a, n)| gcd(a, n) == 1)
        .count();
    let small = totient_sum(10);
    let ratio = totient_sum(10_000) as f64 / (3.0 / (PI * PI) * 1e8);
    let ts: Vec<usize> = (10..=100).map(|k| 10 * k).collect();
    let coprime = GrowthSeries::with_window(coprime_series(0.0, 1.0, &ts)?, (100.0, 1000.0))?;
    let lts: Vec<f64> = (1..=200)
        .map(|k| cat.complete_up_to * k as f64 / 200.0)
        .collect();
    let points = geodesic_count(&cat.lengths(), &lts);
    let window = top_decade(&points)?;
    let geodesics = GrowthSeries::with_window(points, window)?;
    let passed = small == 32
        && brute == 32
        && (0.99..=1.01).contains(&ratio)
        && (1.95..=2.05).contains(&coprime.exponent)
        && geodesics.exponent >= 1.8;
    Ok((
        passed,
        format!(
            "Phi(10) = {small}, ratio {ratio:.4}, coprime slope {:.3}, geodesic exponent {:.3}",
            coprime.exponent, geodesics.exponent
        ),
    ))
}

fn annulus() -> Result<(bool, String)> {
    let integrable = AnnulusMapSpec::new(1.0, Twist::Tan, 0.0)?;
    let p10 = count_orbits(&integrable, (0.0, 1.0), 10, SeedGrid::default(), None)?
        .series
        .points
        .last()
        .map_or(0, |p| p.1);

    let map = AnnulusMapSpec::new(1.0, Twist::Tan, 0.05)?;
    let seeds = SeedGrid {
        nx: 16,
        neta: 5,
        width: 2.0,
    };
    let pair = find_periodic(&map, 1, 1, seeds)?;
    let isolated = !pair.family
        && pair.orbits.len() >= 2
        && pair.orbits.iter().all(|o| o.residual < NEWTON_TOL);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<(f64, f64)> = (0..50)
        .map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(-0.95..0.95)))
        .collect();
    let area = area_defect(&map, &pts)?;

    let count = count_orbits(&map, (0.0, 1.0), 30, seeds, None)?;
    let passed = p10 == 31 && isolated && area < 1e-8 && count.series.exponent >= 1.8;
    Ok((
        passed,
        format!(
            "P^10 = {p10}, (1,1) orbits {}, area {area:.1e}, perturbed exponent {:.3} ({} pairs missed)",
            pair.orbits.len(),
            count.series.exponent,
            count.missing.len()
        ),
    ))
}

fn rotation_path(turns: f64) -> SymplecticPath {
    SymplecticPath::from_fn(|t| Mat2::rotation(turns * PI * t), 64).unwrap()
}

fn random_sl2(rng: &mut ChaCha8Rng, scale: f64) -> Mat2 {
    let (a, b, c) = (
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    );
    Mat2::new(a, b, c, -a)
}

/// A random path from the identity whose endpoint has no eigenvalue one.
fn random_path(rng: &mut ChaCha8Rng) -> SymplecticPath {
    loop {
        let a = random_sl2(rng, 3.0);
        let b = random_sl2(rng, 1.0);
        let f = |t: f64| Mat2::exp(&a.scale(t)).mul(&Mat2::exp(&b.scale((PI * t).sin())));
        if f(1.0).det_minus_identity().abs() > 1e-2 {
            return SymplecticPath::from_fn(f, 400).unwrap();
        }
    }
}

fn cz_battery() -> Result<(bool, String)> {
    let normalization = cz_index(&rotation_path(1.0))?;
    let inverse = cz_index(&rotation_path(-1.0))?;
    let triple = cz_index(&rotation_path(3.0))?;
    let hyperbolic = cz_index(&SymplecticPath::exponential(&Mat2::diag(1.0, -1.0), 16)?)?;
    let fixed = normalization == 1 && inverse == -1 && triple == 3 && hyperbolic == 0;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut loop_ok = 0;
    for _ in 0..50 {
        let psi = random_path(&mut rng);
        let k = rng.gen_range(-2i32..=2);
        let conj = random_sl2(&mut rng, 0.8);
        let phi = SymplecticPath::from_fn(
            |t| {
                let p = Mat2::exp(&conj.scale((TAU * t).sin()));
                p.mul(&Mat2::rotation(TAU * k as f64 * t)).mul(&p.inverse())
            },
            400,
        )?;
        let lhs = cz_index(&psi.left_multiply(&phi)?)?;
        if maslov_loop(&phi)? == k && lhs == cz_index(&psi)? + 2 * k {
            loop_ok += 1;
        }
    }

    let mut homotopy_ok = 0;
    for _ in 0..20 {
        let psi = random_path(&mut rng);
        let a = rng.gen_range(-0.9..0.9);
        let m = rng.gen_range(1..4) as f64;
        let rho = move |t: f64| t + a * (m * TAU * t).sin() / (m * TAU);
        if cz_index(&psi.reparametrize(rho, 600)?)? == cz_index(&psi)? {
            homotopy_ok += 1;
        }
    }
    let passed = fixed && loop_ok == 50 && homotopy_ok == 20;
    Ok((
        passed,
        format!(
            "normalization {normalization}, inverse {inverse}, triple {triple}, hyperbolic {hyperbolic}, loop {loop_ok}/50, homotopy {homotopy_ok}/20"
        ),
    ))
}

fn morse_bott() -> Result<(bool, String)> {
    let t = 1.0;
    let mut ok = true;
    let mut cases = 0;
    for c in [0.5, -0.5, 2.0, -2.0] {
        for delta in [0.01, 0.1] {
            let d = PerturbationData::new(t, delta, c)?;
            let pair = perturbed_pair(&d)?;
            let expected_max = if d.b(Which::Max) * c > 0.0 {
                Kind::Hyperbolic
            } else {
                Kind::Elliptic
            };
            let expected_min = if d.b(Which::Min) * c > 0.0 {
                Kind::Hyperbolic
            } else {
                Kind::Elliptic
            };
            ok &= pair.action_max == (1.0 + delta) * t
                && pair.action_min == (1.0 - delta) * t
                && pair.mu_max - pair.mu_min == 1
                && pair.kind_max == expected_max
                && pair.kind_min == expected_min
                && pair.kind_max != pair.kind_min;
            let h = assemble_model_homology(
                pair.mu_min,
                pair.mu_max,
                gradient_flowlines(delta)?.len(),
            )?;
            ok &= h.ranks.iter().map(|r| r.1).collect::<Vec<_>>() == vec![1, 1];
            cases += 1;
        }
    }
    let flowlines = gradient_flowlines(0.1)?.len();
    Ok((
        ok && flowlines == 2,
        format!("{cases} cases, flowlines {flowlines}, ranks (1,1)"),
    ))
}

#[test]
fn acceptance() {
    let profile = default_profile();
    let map = ReturnMap::new(&profile);
    let cat_start = Instant::now();
    let cat = catalog(&map, 0.0, 1.0, 12);
    let cat_time = cat_start.elapsed();

    let mut outcomes = vec![
        run(1, "Clairaut conservation", 30, clairaut_conservation),
        run(
            2,
            "return-map cross-validation",
            300,
            return_map_cross_validation,
        ),
        run(3, "cap integral identity", 60, cap_identity),
    ];
    let mut census_outcome = run(4, "orbit census", 600, || {
        cat.as_ref()
            .map(census)
            .map_err(|e| clairaut::Error::InvalidParams(e.to_string()))
    });
    census_outcome.elapsed += cat_time;
    census_outcome.passed &= census_outcome.elapsed <= census_outcome.budget;
    outcomes.push(census_outcome);
    outcomes.push(run(5, "linking table", 300, link_table));
    outcomes.push(run(6, "counting", 120, || match &cat {
        Ok(c) => counting(c),
        Err(e) => Ok((false, format!("no catalog: {e}"))),
    }));
    outcomes.push(run(7, "annulus harness", 300, annulus));
    outcomes.push(run(8, "Conley-Zehnder battery", 120, cz_battery));
    outcomes.push(run(9, "Morse-Bott pair", 60, morse_bott));

    // Written to the stderr handle directly so the table shows up even when
    // the harness captures output.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for o in &outcomes {
        writeln!(
            err,
            "[{}] {} {}: {} ({:.2} s of {} s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.detail,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        )
        .unwrap();
    }
    let failed: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id)
        .collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
