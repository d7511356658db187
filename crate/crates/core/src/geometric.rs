//! Closed forms for geometrically distributed attempt gaps.
//!
//! A gap `i ≥ 0` has weight `w^i` with `w = (1 - p)^c`, optionally truncated
//! at `i ≤ max`. Everything is expressed through `u = -ln w` and `expm1`, so
//! the forms stay accurate when `p` is tiny and the expected gap is huge.

#[derive(Debug, Clone, Copy)]
pub(crate) struct Gap {
    /// `-ln w`, in `(0, ∞]`.
    u: f64,
    max: Option<u64>,
}

/// `1/expm1(z) - 1/z`, smooth at 0.
fn inv_expm1_excess(z: f64) -> f64 {
    if z < 1e-3 {
        let z2 = z * z;
        -0.5 + z / 12.0 - z * z2 / 720.0
    } else if z.is_infinite() {
        0.0
    } else {
        1.0 / z.exp_m1() - 1.0 / z
    }
}

impl Gap {
    /// Gap while `free` slots each fail with probability `1 - p` per attempt.
    pub(crate) fn new(p: f64, free: u32, max: Option<u64>) -> Self {
        let u = -f64::from(free) * (-p).ln_1p();
        Self { u, max }
    }

    /// `1 - w`: probability that at least one free slot succeeds.
    pub(crate) fn hit(&self) -> f64 {
        -(-self.u).exp_m1()
    }

    /// `Σ_{i ≤ max} w^i`.
    pub(crate) fn mass(&self) -> f64 {
        let head = 1.0 / self.hit();
        match self.max {
            None => head,
            Some(m) => head * -(-(m as f64 + 1.0) * self.u).exp_m1(),
        }
    }

    /// `E[i]` under the normalized weights.
    pub(crate) fn mean(&self) -> f64 {
        if self.u.is_infinite() {
            return 0.0;
        }
        match self.max {
            None => 1.0 / self.u.exp_m1(),
            Some(m) => {
                let n = m as f64 + 1.0;
                inv_expm1_excess(self.u) - n * inv_expm1_excess(n * self.u)
            }
        }
    }

    /// `E[exp(-s (i + 1))]` under the normalized weights, `s ≥ 0`.
    pub(crate) fn laplace(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        let v = self.u + s;
        let base = (-s).exp() * (-self.u).exp_m1() / (-v).exp_m1();
        match self.max {
            None => base,
            Some(m) => {
                let n = m as f64 + 1.0;
                base * (-n * v).exp_m1() / (-n * self.u).exp_m1()
            }
        }
    }
}
