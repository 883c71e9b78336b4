//! Small numeric helpers shared across modules.

/// Pairwise (tree) summation; the result does not depend on worker count.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// C-infinity step: 0 for u <= 0, 1 for u >= 1.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let f = |x: f64| (-1.0 / x).exp();
    let a = f(u);
    a / (a + f(1.0 - u))
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a * b * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / ((a + b) * (a + b))
}

/// C^1 ramp from 0 at `a` to 1 at `b`: quadratic ends of width `w` around a linear middle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct C1Ramp {
    pub a: f64,
    pub b: f64,
    pub w: f64,
}

impl C1Ramp {
    pub fn new(a: f64, b: f64, w: f64) -> Self {
        debug_assert!(b > a && w > 0.0 && 2.0 * w <= b - a);
        C1Ramp { a, b, w }
    }

    /// Peak slope, attained on the linear part.
    pub fn slope(&self) -> f64 {
        1.0 / (self.b - self.a - self.w)
    }

    pub fn value(&self, x: f64) -> f64 {
        let (a, b, w, s) = (self.a, self.b, self.w, self.slope());
        if x <= a {
            0.0
        } else if x < a + w {
            0.5 * s * (x - a).powi(2) / w
        } else if x <= b - w {
            0.5 * s * w + s * (x - a - w)
        } else if x < b {
            1.0 - 0.5 * s * (b - x).powi(2) / w
        } else {
            1.0
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (a, b, w, s) = (self.a, self.b, self.w, self.slope());
        if x <= a || x >= b {
            0.0
        } else if x < a + w {
            s * (x - a) / w
        } else if x <= b - w {
            s
        } else {
            s * (b - x) / w
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_is_c1_and_monotone() {
        let r = C1Ramp::new(0.2, 1.0, 0.1);
        assert_eq!(r.value(0.2), 0.0);
        assert!((r.value(1.0) - 1.0).abs() < 1e-15);
        let h = 1e-7;
        for k in 1..200 {
            let x = 0.2 + 0.8 * k as f64 / 200.0;
            let fd = (r.value(x + h) - r.value(x - h)) / (2.0 * h);
            assert!((fd - r.derivative(x)).abs() < 1e-6);
            assert!(r.derivative(x) <= r.slope() + 1e-15);
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-12);
    }
}
