//! Smooth step, plateau bumps and the cutoff ψ used by the localisation.

/// Smooth function with two derivatives available in closed form.
pub trait Profile: Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
    /// Points where the function changes regime; quadrature splits there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Profile assembled from closures.
pub struct FnProfile<F, G, H> {
    pub f: F,
    pub df: G,
    pub d2f: H,
    pub breaks: Vec<f64>,
}

impl<F, G, H> FnProfile<F, G, H>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
    H: Fn(f64) -> f64 + Sync,
{
    pub fn new(f: F, df: G, d2f: H) -> Self {
        Self {
            f,
            df,
            d2f,
            breaks: Vec::new(),
        }
    }
}

impl<F, G, H> Profile for FnProfile<F, G, H>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
    H: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn d1(&self, x: f64) -> f64 {
        (self.df)(x)
    }
    fn d2(&self, x: f64) -> f64 {
        (self.d2f)(x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }
}

/// C∞ step: 0 for s ≤ 0, 1 for s ≥ 1, strictly increasing between.
/// Returns (h, h', h'').
pub fn step(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let q = 1.0 / (1.0 - s) - 1.0 / s;
    let e = (-q.abs()).exp();
    let sig = if q >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    // σ(1-σ) without cancellation
    let sp = e / ((1.0 + e) * (1.0 + e));
    if sp == 0.0 {
        return (sig, 0.0, 0.0);
    }
    let u = 1.0 - s;
    let dq = 1.0 / (u * u) + 1.0 / (s * s);
    let d2q = 2.0 / (u * u * u) - 2.0 / (s * s * s);
    let d1 = sp * dq;
    let d2 = sp * ((1.0 - 2.0 * sig) * dq * dq + d2q);
    (sig, d1, d2)
}

/// Smooth bump equal to 1 on `[lo_in, hi_in]` and 0 outside `(lo_out, hi_out)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plateau {
    pub lo_out: f64,
    pub lo_in: f64,
    pub hi_in: f64,
    pub hi_out: f64,
}

impl Plateau {
    pub fn new(lo_out: f64, lo_in: f64, hi_in: f64, hi_out: f64) -> crate::Result<Self> {
        if !(lo_out < lo_in && lo_in <= hi_in && hi_in < hi_out) {
            return Err(crate::error::domain(format!(
                "plateau needs lo_out < lo_in <= hi_in < hi_out, got {lo_out}, {lo_in}, {hi_in}, {hi_out}"
            )));
        }
        Ok(Self {
            lo_out,
            lo_in,
            hi_in,
            hi_out,
        })
    }

    fn eval(&self, x: f64) -> (f64, f64, f64) {
        if x <= self.lo_out || x >= self.hi_out {
            (0.0, 0.0, 0.0)
        } else if x < self.lo_in {
            let w = self.lo_in - self.lo_out;
            let (h, d1, d2) = step((x - self.lo_out) / w);
            (h, d1 / w, d2 / (w * w))
        } else if x <= self.hi_in {
            (1.0, 0.0, 0.0)
        } else {
            let w = self.hi_out - self.hi_in;
            let (h, d1, d2) = step((self.hi_out - x) / w);
            (h, -d1 / w, d2 / (w * w))
        }
    }
}

impl Profile for Plateau {
    fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
    fn d1(&self, x: f64) -> f64 {
        self.eval(x).1
    }
    fn d2(&self, x: f64) -> f64 {
        self.eval(x).2
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.lo_out, self.lo_in, self.hi_in, self.hi_out]
    }
}

/// Base cutoff: 1 on [0, 1/2], 0 on [1, ∞), smooth and nonincreasing.
pub fn psi0(x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        1.0 - step(2.0 * x - 1.0).0
    }
}

pub fn psi0_derivative(x: f64) -> f64 {
    if x <= 0.5 || x >= 1.0 {
        0.0
    } else {
        -2.0 * step(2.0 * x - 1.0).1
    }
}

/// ψ(x) = ψ0(x/R).
pub fn psi(x: f64, r: f64) -> f64 {
    psi0(x / r)
}

pub fn psi_derivative(x: f64, r: f64) -> f64 {
    psi0_derivative(x / r) / r
}

/// ψ evaluated at `exp(log_x)` with cutoff `exp(log_r)`; avoids overflow
/// when both live far outside the f64 range.
pub fn psi_log(log_x: f64, log_r: f64) -> f64 {
    if log_x == f64::NEG_INFINITY {
        return 1.0;
    }
    let d = log_x - log_r;
    if d <= -std::f64::consts::LN_2 {
        1.0
    } else if d >= 0.0 {
        0.0
    } else {
        psi0(d.exp())
    }
}
