//! Angular-momentum coupling coefficients.
//!
//! Clebsch-Gordan coefficients, Wigner 3j and 6j symbols for arbitrary
//! half-integer arguments. Momenta are carried as doubled integers
//! ([`HalfInt`]) so selection rules are decided exactly; only the final
//! Racah sums are evaluated in floating point.
//!
//! The Racah series are summed with the first term taken from a table of
//! `ln n!` and every following term generated by its exact rational ratio to
//! the previous one. The (small) error of the leading term is then common to
//! the whole sum and is not amplified by cancellation between terms.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported doubled momentum.
pub const MAX_TWICE_J: i32 = 200;

// Largest factorial argument reached by a 6j Racah sum with 2j <= MAX_TWICE_J.
const LOG_FACTORIAL_LEN: usize = 2 * MAX_TWICE_J as usize + 2;

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct HalfInt(i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub const HALF: HalfInt = HalfInt(1);
    pub const ONE: HalfInt = HalfInt(2);

    pub const fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }

    pub const fn from_int(value: i32) -> Self {
        HalfInt(2 * value)
    }

    /// Twice the value, `2j`.
    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Multiplicity `2j + 1`.
    pub const fn multiplicity(self) -> i32 {
        self.0 + 1
    }

    /// `(-1)^self`; only defined for integer values.
    pub fn phase(self) -> Result<f64> {
        if !self.is_integer() {
            return Err(Error::Input(format!("phase (-1)^{self} of a half-odd value")));
        }
        Ok(if (self.0 / 2) % 2 == 0 { 1.0 } else { -1.0 })
    }

    /// Projections `-j, -j+1, ..., j`.
    pub fn projections(self) -> impl Iterator<Item = HalfInt> {
        let j = self.0;
        (0..=j).map(move |k| HalfInt(-j + 2 * k))
    }

    /// Checks that `self` is a valid momentum magnitude.
    pub fn check_momentum(self) -> Result<()> {
        if self.0 < 0 {
            return Err(Error::Input(format!("negative angular momentum {self}")));
        }
        if self.0 > MAX_TWICE_J {
            return Err(Error::Input(format!(
                "angular momentum {self} exceeds supported maximum {}",
                HalfInt(MAX_TWICE_J)
            )));
        }
        Ok(())
    }

    /// Checks that `m` is a valid projection of the momentum `self`.
    pub fn check_projection(self, m: HalfInt) -> Result<()> {
        self.check_momentum()?;
        if m.0.abs() > self.0 || (self.0 - m.0) % 2 != 0 {
            return Err(Error::Input(format!("projection {m} is not allowed for j = {self}")));
        }
        Ok(())
    }
}

impl std::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 + rhs.0)
    }
}

impl std::ops::Sub for HalfInt {
    type Output = HalfInt;
    fn sub(self, rhs: HalfInt) -> HalfInt {
        HalfInt(self.0 - rhs.0)
    }
}

impl std::ops::Neg for HalfInt {
    type Output = HalfInt;
    fn neg(self) -> HalfInt {
        HalfInt(-self.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for HalfInt {
    type Err = Error;

    /// Accepts `"3"`, `"-2"`, `"7/2"`, `"-1/2"` and decimal halves like `"3.5"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Input(format!("cannot parse half-integer from {s:?}"));
        if let Some((num, den)) = s.split_once('/') {
            let num: i32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "2" => Ok(HalfInt(num)),
                "1" => Ok(HalfInt(2 * num)),
                _ => Err(bad()),
            }
        } else if let Ok(v) = s.parse::<i32>() {
            Ok(HalfInt(2 * v))
        } else {
            let v: f64 = s.parse().map_err(|_| bad())?;
            let twice = 2.0 * v;
            if (twice - twice.round()).abs() > 1e-12 {
                return Err(bad());
            }
            Ok(HalfInt(twice.round() as i32))
        }
    }
}

impl Serialize for HalfInt {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HalfInt {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(v) => v.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

fn log_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Neumaier-compensated running sum of ln k.
        let mut table = Vec::with_capacity(LOG_FACTORIAL_LEN + 1);
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        table.push(0.0);
        for k in 1..=LOG_FACTORIAL_LEN {
            let x = (k as f64).ln();
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
            table.push(sum + comp);
        }
        table
    })
}

/// `ln n!` for `0 <= n <= 2 * MAX_TWICE_J + 2`.
pub fn ln_factorial(n: i32) -> f64 {
    log_factorials()[usize::try_from(n).expect("negative factorial argument")]
}

/// Triangle rule on doubled momenta, including integer perimeter.
fn triangle(a: i32, b: i32, c: i32) -> bool {
    a >= 0 && b >= 0 && c >= 0 && c <= a + b && c >= (a - b).abs() && (a + b + c) % 2 == 0
}

/// `ln Δ(abc)` for doubled momenta satisfying the triangle rule.
fn ln_triangle_coefficient(a: i32, b: i32, c: i32) -> f64 {
    ln_factorial((a + b - c) / 2) + ln_factorial((a - b + c) / 2) + ln_factorial((-a + b + c) / 2)
        - ln_factorial((a + b + c) / 2 + 1)
}

fn sign(exponent: i32) -> f64 {
    if exponent.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
pub fn wigner_3j(
    j1: HalfInt,
    j2: HalfInt,
    j3: HalfInt,
    m1: HalfInt,
    m2: HalfInt,
    m3: HalfInt,
) -> Result<f64> {
    j1.check_projection(m1)?;
    j2.check_projection(m2)?;
    j3.check_projection(m3)?;
    let (j1, j2, j3, m1, m2, m3) = (j1.0, j2.0, j3.0, m1.0, m2.0, m3.0);
    if m1 + m2 + m3 != 0 || !triangle(j1, j2, j3) {
        return Ok(0.0);
    }
    // Everything below in ordinary (undoubled) integers.
    let a1 = (j1 + j2 - j3) / 2;
    let a2 = (j1 - m1) / 2;
    let a3 = (j2 + m2) / 2;
    let b1 = (j3 - j2 + m1) / 2;
    let b2 = (j3 - j1 - m2) / 2;
    let k_min = 0.max(-b1).max(-b2);
    let k_max = a1.min(a2).min(a3);
    if k_min > k_max {
        return Ok(0.0);
    }
    let ln_pref = 0.5
        * (ln_triangle_coefficient(j1, j2, j3)
            + ln_factorial((j1 + m1) / 2)
            + ln_factorial((j1 - m1) / 2)
            + ln_factorial((j2 + m2) / 2)
            + ln_factorial((j2 - m2) / 2)
            + ln_factorial((j3 + m3) / 2)
            + ln_factorial((j3 - m3) / 2));
    let k = k_min;
    let ln_first = ln_pref
        - (ln_factorial(k)
            + ln_factorial(b1 + k)
            + ln_factorial(b2 + k)
            + ln_factorial(a1 - k)
            + ln_factorial(a2 - k)
            + ln_factorial(a3 - k));
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in k_min..k_max {
        let k = f64::from(k);
        let num = (f64::from(a1) - k) * (f64::from(a2) - k) * (f64::from(a3) - k);
        let den = (k + 1.0) * (f64::from(b1) + k + 1.0) * (f64::from(b2) + k + 1.0);
        term *= -num / den;
        sum += term;
    }
    let phase = sign((j1 - j2 - m3) / 2 + k_min);
    Ok(phase * ln_first.exp() * sum)
}

/// Clebsch-Gordan coefficient `C^{JM}_{j1 m1, j2 m2}`.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64> {
    j1.check_projection(m1)?;
    j2.check_projection(m2)?;
    j.check_projection(m)?;
    if m1 + m2 != m {
        return Ok(0.0);
    }
    let three_j = wigner_3j(j1, j2, j, m1, m2, -m)?;
    let phase = sign((j1.0 - j2.0 + m.0) / 2);
    Ok(phase * f64::from(j.multiplicity()).sqrt() * three_j)
}

/// Wigner 6j symbol `{a b c; d e f}`.
pub fn wigner_6j(
    a: HalfInt,
    b: HalfInt,
    c: HalfInt,
    d: HalfInt,
    e: HalfInt,
    f: HalfInt,
) -> Result<f64> {
    for x in [a, b, c, d, e, f] {
        x.check_momentum()?;
    }
    let (a, b, c, d, e, f) = (a.0, b.0, c.0, d.0, e.0, f.0);
    let triads = [(a, b, c), (a, e, f), (d, b, f), (d, e, c)];
    if triads.iter().any(|&(x, y, z)| !triangle(x, y, z)) {
        return Ok(0.0);
    }
    let alphas = triads.map(|(x, y, z)| (x + y + z) / 2);
    let betas = [(a + b + d + e) / 2, (a + c + d + f) / 2, (b + c + e + f) / 2];
    let k_min = *alphas.iter().max().unwrap();
    let k_max = *betas.iter().min().unwrap();
    if k_min > k_max {
        return Ok(0.0);
    }
    let ln_pref: f64 = 0.5
        * triads
            .iter()
            .map(|&(x, y, z)| ln_triangle_coefficient(x, y, z))
            .sum::<f64>();
    let ln_first = ln_pref + ln_factorial(k_min + 1)
        - alphas.iter().map(|&al| ln_factorial(k_min - al)).sum::<f64>()
        - betas.iter().map(|&be| ln_factorial(be - k_min)).sum::<f64>();
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in k_min..k_max {
        let num = f64::from(k + 2) * betas.iter().map(|&be| f64::from(be - k)).product::<f64>();
        let den: f64 = alphas.iter().map(|&al| f64::from(k + 1 - al)).product();
        term *= -num / den;
        sum += term;
    }
    Ok(sign(k_min) * ln_first.exp() * sum)
}

/// Prefactor relating the rank-1 irreducible tensor to the spin vector,
/// `T_{1Q} = c * j_Q` with `c = sqrt(3 / (j0 (j0+1) (2 j0+1)))`.
pub fn orientation_factor(j0: HalfInt) -> Result<f64> {
    j0.check_momentum()?;
    if j0.0 == 0 {
        return Err(Error::Domain("orientation of a j0 = 0 level".into()));
    }
    let j = j0.value();
    Ok((3.0 / (j * (j + 1.0) * (2.0 * j + 1.0))).sqrt())
}

/// Prefactor of the rank-2 tensor built from symmetrised spin products,
/// `sqrt(15 / (2 j0 (j0+1) (2j0-1) (2j0+1) (2j0+3)))`. Undefined for `j0 < 1`.
pub fn alignment_factor(j0: HalfInt) -> Result<f64> {
    j0.check_momentum()?;
    if j0.0 < 2 {
        return Err(Error::Domain(format!("alignment tensor does not exist for j0 = {j0}")));
    }
    let j = j0.value();
    Ok((15.0 / (2.0 * j * (j + 1.0) * (2.0 * j - 1.0) * (2.0 * j + 1.0) * (2.0 * j + 3.0))).sqrt())
}

/// Spherical (cyclic) components `(j_{-1}, j_0, j_{+1})` of a Cartesian vector.
pub fn cyclic_from_cartesian(x: Complex64, y: Complex64, z: Complex64) -> [Complex64; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    [(x - i * y) * r, z, -(x + i * y) * r]
}

/// Inverse of [`cyclic_from_cartesian`].
pub fn cartesian_from_cyclic(q: [Complex64; 3]) -> [Complex64; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    let [m, z, p] = q;
    [(m - p) * r, i * (m + p) * r, z]
}

/// Rank-2 spherical tensor `T_{2Q}` (Q = -2..2) built from a classical spin
/// vector through `sum C^{2Q}_{1q 1q'} (j_q j_q' + j_q' j_q - (-1)^q δ_{q,-q'} 2/3 j0(j0+1))`,
/// scaled by [`alignment_factor`].
pub fn alignment_tensor(j0: HalfInt, cyclic: [Complex64; 3]) -> Result<[Complex64; 5]> {
    let norm = alignment_factor(j0)?;
    let j = j0.value();
    let casimir = 2.0 / 3.0 * j * (j + 1.0);
    let mut out = [Complex64::new(0.0, 0.0); 5];
    for (slot, big_q) in (-2..=2).enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for q in -1..=1 {
            let qp = big_q - q;
            if !(-1..=1).contains(&qp) {
                continue;
            }
            let cg = clebsch_gordan(
                HalfInt::ONE,
                HalfInt::from_int(q),
                HalfInt::ONE,
                HalfInt::from_int(qp),
                HalfInt::from_int(2),
                HalfInt::from_int(big_q),
            )?;
            let jq = cyclic[(q + 1) as usize];
            let jqp = cyclic[(qp + 1) as usize];
            let mut pair = jq * jqp * 2.0;
            if q == -qp {
                pair -= Complex64::new(sign(q) * casimir, 0.0);
            }
            acc += pair * cg;
        }
        out[slot] = acc * norm;
    }
    Ok(out)
}
