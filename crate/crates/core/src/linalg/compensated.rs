//! Double-double accumulation for sums that cancel heavily.

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    /// `self + a b` with the product formed exactly.
    pub fn add_product(self, a: f64, b: f64) -> Self {
        let (p, e) = two_prod(a, b);
        self + DoubleDouble { hi: p, lo: e }
    }

    /// `self + a (b.hi + b.lo)`.
    pub fn add_scaled(self, a: f64, b: DoubleDouble) -> Self {
        let (p, e) = two_prod(a, b.hi);
        self + DoubleDouble { hi: p, lo: e + a * b.lo }
    }

    pub fn scale(self, a: f64) -> Self {
        DoubleDouble::ZERO.add_scaled(a, self)
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = DoubleDouble;

    fn add(self, x: DoubleDouble) -> Self {
        let (s, e) = two_sum(self.hi, x.hi);
        let (hi, lo) = two_sum(s, e + self.lo + x.lo);
        DoubleDouble { hi, lo }
    }
}

impl std::ops::Neg for DoubleDouble {
    type Output = DoubleDouble;

    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

/// `xᵀy` accumulated in double-double.
pub fn dot_dd(x: &[f64], y: &[f64]) -> DoubleDouble {
    x.iter()
        .zip(y)
        .fold(DoubleDouble::ZERO, |acc, (&a, &b)| acc.add_product(a, b))
}

/// `Σ_k c_k v_k`, rounded once at the end.
pub fn combine_dd(coefficients: &[DoubleDouble], vectors: &[&[f64]], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            coefficients
                .iter()
                .zip(vectors)
                .fold(DoubleDouble::ZERO, |acc, (c, v)| acc.add_scaled(v[i], *c))
                .value()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_sum() {
        let x = [1e16, 1.0, -1e16];
        let y = [1.0, 1.0, 1.0];
        assert_eq!(dot_dd(&x, &y).value(), 1.0);
        let naive: f64 = x.iter().sum();
        assert_ne!(naive, 1.0);
    }

    #[test]
    fn exact_products() {
        let a = 1.0 + f64::EPSILON;
        let s = DoubleDouble::ZERO.add_product(a, a) + DoubleDouble::from_f64(-1.0 - 2.0 * f64::EPSILON);
        assert_eq!(s.value(), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn combination_matches_exact_rational() {
        let third = DoubleDouble::ZERO.add_product(1.0, 1.0 / 3.0);
        let v1 = [3.0, 6.0];
        let v2 = [-1.0, -2.0];
        let out = combine_dd(&[third, DoubleDouble::from_f64(1.0)], &[&v1, &v2], 2);
        assert!(out[0].abs() <= 1e-16 && out[1].abs() <= 2e-16);
    }
}
