use proptest::prelude::*;
use rayon::prelude::*;
use spinlight_core::angular::{clebsch_gordan, wigner_3j, wigner_6j};
use spinlight_core::HalfInt;

fn h(twice: i32) -> HalfInt {
    HalfInt::from_twice(twice)
}

fn fact(n: i32) -> f64 {
    (1..=n).map(f64::from).product()
}

// Racah's explicit 3j sum with plain factorials, doubled arguments.
fn oracle_3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1 + m2 + m3 != 0 || j3 > j1 + j2 || j3 < (j1 - j2).abs() || (j1 + j2 + j3) % 2 != 0 {
        return 0.0;
    }
    if m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    let d = |x: i32| x / 2;
    let tri = fact(d(j1 + j2 - j3)) * fact(d(j1 - j2 + j3)) * fact(d(-j1 + j2 + j3)) / fact(d(j1 + j2 + j3) + 1);
    let pref = (tri
        * fact(d(j1 + m1))
        * fact(d(j1 - m1))
        * fact(d(j2 + m2))
        * fact(d(j2 - m2))
        * fact(d(j3 + m3))
        * fact(d(j3 - m3)))
    .sqrt();
    let mut sum = 0.0;
    for k in 0..=d(j1 + j2 + j3) {
        let args = [
            k,
            d(j3 - j2 + m1) + k,
            d(j3 - j1 - m2) + k,
            d(j1 + j2 - j3) - k,
            d(j1 - m1) - k,
            d(j2 + m2) - k,
        ];
        if args.iter().any(|&a| a < 0) {
            continue;
        }
        let s = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += s / args.iter().map(|&a| fact(a)).product::<f64>();
    }
    let phase = if (d(j1 - j2 - m3)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * pref * sum
}

fn projections(j: i32) -> impl Iterator<Item = i32> {
    (-j..=j).step_by(2)
}

// 6j by brute-force recoupling of four 3j symbols.
fn oracle_6j(j: [i32; 6]) -> f64 {
    let [j1, j2, j3, j4, j5, j6] = j;
    let mut total = 0.0;
    for m1 in projections(j1) {
        for m2 in projections(j2) {
            let m3 = -m1 - m2;
            if m3.abs() > j3 {
                continue;
            }
            for m5 in projections(j5) {
                let m6 = m5 - m1;
                if m6.abs() > j6 {
                    continue;
                }
                let m4 = m6 - m2;
                if m4.abs() > j4 {
                    continue;
                }
                let exp: i32 = [j1 - m1, j2 - m2, j3 - m3, j4 - m4, j5 - m5, j6 - m6].iter().sum::<i32>() / 2;
                let s = if exp % 2 == 0 { 1.0 } else { -1.0 };
                total += s
                    * oracle_3j(j1, j2, j3, -m1, -m2, -m3)
                    * oracle_3j(j1, j5, j6, m1, -m5, m6)
                    * oracle_3j(j4, j2, j6, m4, m2, -m6)
                    * oracle_3j(j4, j5, j3, -m4, m5, m3);
            }
        }
    }
    total
}

fn six(j: [i32; 6]) -> f64 {
    wigner_6j(h(j[0]), h(j[1]), h(j[2]), h(j[3]), h(j[4]), h(j[5])).unwrap()
}

#[test]
fn three_j_matches_explicit_sum() {
    for j1 in 0..=8 {
        for j2 in 0..=8 {
            for j3 in 0..=8 {
                for m1 in projections(j1) {
                    for m2 in projections(j2) {
                        let m3 = -m1 - m2;
                        if m3.abs() > j3 || (j3 - m3) % 2 != 0 {
                            continue;
                        }
                        let v = wigner_3j(h(j1), h(j2), h(j3), h(m1), h(m2), h(m3)).unwrap();
                        assert!((v - oracle_3j(j1, j2, j3, m1, m2, m3)).abs() < 1e-13);
                    }
                }
            }
        }
    }
}

#[test]
fn six_j_matches_recoupling() {
    assert!((oracle_6j([2, 2, 2, 1, 1, 1]) + 1.0 / 3.0).abs() < 1e-14);
    assert!((six([2, 2, 2, 1, 1, 1]) + 1.0 / 3.0).abs() < 1e-14);
    for a in 0..=4 {
        for b in 0..=4 {
            for c in 0..=4 {
                for d in 0..=4 {
                    for e in 0..=4 {
                        for f in 0..=4 {
                            let j = [a, b, c, d, e, f];
                            assert!((six(j) - oracle_6j(j)).abs() < 1e-13, "{j:?}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn clebsch_gordan_orthogonality_to_2j_24() {
    let pairs: Vec<(i32, i32)> = (0..=24).flat_map(|a| (0..=24).map(move |b| (a, b))).collect();
    let worst = pairs
        .par_iter()
        .map(|&(j1, j2)| {
            let mut worst: f64 = 0.0;
            let js: Vec<i32> = ((j1 - j2).abs()..=j1 + j2).step_by(2).collect();
            for m in projections(j1 + j2) {
                let ms: Vec<i32> = projections(j1).filter(|m1| (m - m1).abs() <= j2).collect();
                let cols: Vec<i32> = js.iter().copied().filter(|j| m.abs() <= *j).collect();
                let c: Vec<Vec<f64>> = ms
                    .iter()
                    .map(|&m1| {
                        cols.iter()
                            .map(|&j| clebsch_gordan(h(j1), h(m1), h(j2), h(m - m1), h(j), h(m)).unwrap())
                            .collect()
                    })
                    .collect();
                for x in 0..cols.len() {
                    for y in 0..cols.len() {
                        let dot: f64 = c.iter().map(|row| row[x] * row[y]).sum();
                        let target = if x == y { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                    }
                }
                for x in 0..ms.len() {
                    for y in 0..ms.len() {
                        let dot: f64 = (0..cols.len()).map(|k| c[x][k] * c[y][k]).sum();
                        let target = if x == y { 1.0 } else { 0.0 };
                        worst = worst.max((dot - target).abs());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst < 1e-12, "worst deviation {worst}");
}

#[test]
fn six_j_orthogonality_to_2j_24() {
    let tri = |x: i32, y: i32, z: i32| z <= x + y && z >= (x - y).abs() && (x + y + z) % 2 == 0;
    let quads: Vec<[i32; 4]> = (0..=24)
        .flat_map(|a| (0..=24).flat_map(move |b| (0..=24).flat_map(move |c| (0..=24).map(move |d| [a, b, c, d]))))
        .filter(|&[a, b, c, d]| (a + b + c + d) % 2 == 0)
        .collect();
    let worst = quads
        .par_iter()
        .map(|&[a, b, c, d]| {
            // x couples (a, b) and (c, d); f couples (a, d) and (c, b).
            let xs: Vec<i32> = (0..=48).filter(|&x| tri(a, b, x) && tri(c, d, x)).collect();
            let fs: Vec<i32> = (0..=48).filter(|&f| tri(a, d, f) && tri(c, b, f)).collect();
            assert_eq!(xs.len(), fs.len(), "{a} {b} {c} {d}");
            let w: Vec<Vec<f64>> = xs
                .iter()
                .map(|&x| fs.iter().map(|&f| f64::from((x + 1) * (f + 1)).sqrt() * six([a, b, x, c, d, f])).collect())
                .collect();
            let n = xs.len();
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let target = if i == k { 1.0 } else { 0.0 };
                    let cols: f64 = (0..n).map(|r| w[r][i] * w[r][k]).sum();
                    let rows: f64 = (0..n).map(|r| w[i][r] * w[k][r]).sum();
                    worst = worst.max((cols - target).abs()).max((rows - target).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    assert!(worst < 1e-12, "worst deviation {worst}");
}

#[test]
fn zero_argument_closed_forms() {
    for j in 0..=24 {
        for m in projections(j) {
            let v = wigner_3j(h(j), h(j), h(0), h(m), h(-m), h(0)).unwrap();
            let s = if ((j - m) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            assert!((v - s / f64::from(j + 1).sqrt()).abs() < 1e-14);
        }
    }
    for a in 0..=24i32 {
        for b in 0..=24 {
            for c in ((a - b).abs()..=(a + b).min(24)).step_by(2) {
                let v = six([a, b, c, 0, c, b]);
                let s = if ((a + b + c) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let expected = s / f64::from((b + 1) * (c + 1)).sqrt();
                assert!((v - expected).abs() < 1e-14, "{a} {b} {c}");
            }
        }
    }
}

fn momentum() -> impl Strategy<Value = i32> {
    0..=24i32
}

// Projection of doubled momentum `j` at fraction `t` of its range.
fn pick(j: i32, t: f64) -> i32 {
    -j + 2 * ((t * f64::from(j + 1)) as i32).min(j)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, cases: 512, ..ProptestConfig::default() })]

    #[test]
    fn three_j_symmetries(j1 in momentum(), j2 in momentum(), u in 0.0..1.0f64, v in 0.0..1.0f64, r in 0.0..1.0f64) {
        let m1 = pick(j1, u);
        let m2 = pick(j2, v);
        let m3 = -m1 - m2;
        // j3 ranges over the triangle of (j1, j2) above |m3|, same parity as m3.
        let lo = (j1 - j2).abs().max(m3.abs());
        let steps = (j1 + j2 - lo) / 2;
        let j3 = lo + 2 * ((r * f64::from(steps + 1)) as i32).min(steps);
        let w = |a: [i32; 6]| wigner_3j(h(a[0]), h(a[1]), h(a[2]), h(a[3]), h(a[4]), h(a[5])).unwrap();
        let base = w([j1, j2, j3, m1, m2, m3]);
        let odd = if ((j1 + j2 + j3) / 2) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((w([j2, j3, j1, m2, m3, m1]) - base).abs() < 1e-12);
        prop_assert!((w([j3, j1, j2, m3, m1, m2]) - base).abs() < 1e-12);
        prop_assert!((w([j2, j1, j3, m2, m1, m3]) - odd * base).abs() < 1e-12);
        prop_assert!((w([j1, j3, j2, m1, m3, m2]) - odd * base).abs() < 1e-12);
        prop_assert!((w([j1, j2, j3, -m1, -m2, -m3]) - odd * base).abs() < 1e-12);
    }

    #[test]
    fn six_j_tetrahedral_symmetry(j in prop::array::uniform6(momentum())) {
        let base = six(j);
        let [a, b, c, d, e, f] = j;
        for p in [
            [b, a, c, e, d, f],
            [a, c, b, d, f, e],
            [c, b, a, f, e, d],
            [d, e, c, a, b, f],
            [a, e, f, d, b, c],
            [d, b, f, a, e, c],
        ] {
            prop_assert!((six(p) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn clebsch_gordan_selection_rules(j1 in momentum(), j2 in momentum(), j in momentum(), u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let m1 = pick(j1, u);
        let m2 = pick(j2, v);
        let m = m1 + m2;
        let j = ((j / 2) * 2 + (j1 + j2) % 2).max(m.abs());
        let v = clebsch_gordan(h(j1), h(m1), h(j2), h(m2), h(j), h(m)).unwrap();
        let tri = j <= j1 + j2 && j >= (j1 - j2).abs() && (j1 + j2 + j) % 2 == 0;
        if !tri {
            prop_assert_eq!(v, 0.0);
        }
        prop_assert!(v.abs() <= 1.0 + 1e-14);
    }
}

#[test]
fn malformed_input_is_an_error() {
    assert!(wigner_3j(h(2), h(2), h(2), h(3), h(-1), h(-2)).is_err());
    assert!(wigner_6j(h(-2), h(2), h(2), h(2), h(2), h(2)).is_err());
    assert_eq!(wigner_6j(h(2), h(2), h(8), h(2), h(2), h(2)).unwrap(), 0.0);
}
