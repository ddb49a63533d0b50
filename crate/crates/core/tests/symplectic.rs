use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use clairaut::symplectic::{
    cz_index, maslov_loop, z2_homology, Mat2, SymplecticPath, Z2ChainComplex,
};

fn sl2(a: f64, b: f64, c: f64) -> Mat2 {
    Mat2::new(a, b, c, -a)
}

/// `exp(t A) exp(sin(pi t) B)`: starts at the identity, ends at `exp(A)`.
fn path_fn(a: Mat2, b: Mat2) -> impl Fn(f64) -> Mat2 {
    move |t| Mat2::exp(&a.scale(t)).mul(&Mat2::exp(&b.scale((PI * t).sin())))
}

/// Index from the winding interval: track the angle swept by `Psi(t) v` for
/// many unit vectors `v`. If an integer lies inside the range of windings
/// (in turns) the index is twice it, otherwise `2k + 1` for the integer `k`
/// just below the range.
fn winding_oracle<F: Fn(f64) -> Mat2>(f: F) -> Option<i32> {
    let (nv, nt) = (360, 4000);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..nv {
        let phi = PI * i as f64 / nv as f64;
        let v = [phi.cos(), phi.sin()];
        let mut total = 0.0;
        let mut prev = phi;
        for k in 1..=nt {
            let w = f(k as f64 / nt as f64).apply(v);
            let ang = w[1].atan2(w[0]);
            let mut d = ang - prev;
            d -= TAU * (d / TAU).round();
            total += d;
            prev = ang;
        }
        lo = lo.min(total / TAU);
        hi = hi.max(total / TAU);
    }
    let k = lo.floor();
    if (lo - lo.round()).abs() < 1e-3 || (hi - hi.round()).abs() < 1e-3 {
        return None;
    }
    if hi.floor() > k {
        Some(2 * hi.floor() as i32)
    } else {
        Some(2 * k as i32 + 1)
    }
}

#[test]
fn oracle_agrees_on_axiom_paths() {
    assert_eq!(winding_oracle(|t| Mat2::rotation(PI * t)), Some(1));
    assert_eq!(winding_oracle(|t| Mat2::rotation(-PI * t)), Some(-1));
    assert_eq!(winding_oracle(|t| Mat2::rotation(3.0 * PI * t)), Some(3));
    assert_eq!(winding_oracle(|t| Mat2::diag(t.exp(), (-t).exp())), Some(0));
}

#[test]
fn maslov_of_rotation_loops() {
    for k in -3..=3 {
        let p = SymplecticPath::from_fn(|t| Mat2::rotation(TAU * k as f64 * t), 200).unwrap();
        assert_eq!(maslov_loop(&p).unwrap(), k);
    }
}

fn gf2_rank(m: &[Vec<bool>]) -> usize {
    let mut rows: Vec<Vec<bool>> = m.to_vec();
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        if let Some(p) = (rank..rows.len()).find(|&r| rows[r][c]) {
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && rows[r][c] {
                    let pivot = rows[rank].clone();
                    for (x, y) in rows[r].iter_mut().zip(pivot) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
    }
    rank
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cz_matches_winding_interval(
        a in (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64),
        b in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64),
    ) {
        let (a, b) = (sl2(a.0, a.1, a.2), sl2(b.0, b.1, b.2));
        let f = path_fn(a, b);
        prop_assume!(f(1.0).det_minus_identity().abs() > 1e-2);
        if let Some(expected) = winding_oracle(&f) {
            let path = SymplecticPath::from_fn(&f, 600).unwrap();
            prop_assert_eq!(cz_index(&path).unwrap(), expected);
        }
    }

    #[test]
    fn inverse_path_negates_index(a in (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64)) {
        let a = sl2(a.0, a.1, a.2);
        prop_assume!(Mat2::exp(&a).det_minus_identity().abs() > 1e-2);
        let path = SymplecticPath::exponential(&a, 64).unwrap();
        prop_assert_eq!(cz_index(&path.inverse()).unwrap(), -cz_index(&path).unwrap());
    }

    #[test]
    fn euler_characteristic_of_random_complexes(
        x in prop::collection::vec(any::<bool>(), 12),
        y in prop::collection::vec(any::<bool>(), 12),
        ops in prop::collection::vec((0usize..7, 0usize..7), 0..20),
    ) {
        // C2 (dim 3) -> C1 = U (dim 4) + V (dim 3) -> C0 (dim 4), with the
        // first map into U and the second killing U, then a random basis change
        // of C1 by elementary row operations.
        let mut d2 = vec![vec![false; 3]; 7];
        for i in 0..4 {
            for j in 0..3 {
                d2[i][j] = x[3 * i + j];
            }
        }
        let mut d1 = vec![vec![false; 7]; 4];
        for i in 0..4 {
            for j in 0..3 {
                d1[i][4 + j] = y[3 * i + j];
            }
        }
        for &(i, j) in ops.iter().filter(|(i, j)| i != j) {
            // P = E_k ... E_1 with E = I + e_i e_j^T, so d2 -> P d2 and d1 -> d1 P^{-1}.
            let row = d2[j].clone();
            for (a, b) in d2[i].iter_mut().zip(row) {
                *a ^= b;
            }
        }
        for &(i, j) in ops.iter().filter(|(i, j)| i != j) {
            for r in d1.iter_mut() {
                r[j] ^= r[i];
            }
        }
        let mut c = Z2ChainComplex::new();
        c.set_generators(0, 4);
        c.set_generators(1, 7);
        c.set_generators(2, 3);
        c.set_boundary(1, d1.clone()).unwrap();
        c.set_boundary(2, d2.clone()).unwrap();
        prop_assert!(c.check().is_ok());
        let h = z2_homology(&c).unwrap();
        let chi_h: i64 = h.iter().map(|&(k, r)| if k % 2 == 0 { r as i64 } else { -(r as i64) }).sum();
        prop_assert_eq!(chi_h, 4 - 7 + 3);
        prop_assert_eq!(c.euler_characteristic(), 0);
        let (r1, r2) = (gf2_rank(&d1), gf2_rank(&d2));
        let expected = vec![(0, 4 - r1), (1, 7 - r1 - r2), (2, 3 - r2)];
        prop_assert_eq!(h, expected);
    }
}
