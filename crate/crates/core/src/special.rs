//! Special functions and summation helpers used by the scalar formulas.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
///
/// Power series below 1, modified Lentz continued fraction above.
/// `E1(∞) = 0`.
pub fn exp_int_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument, got {x}");
    if x.is_infinite() {
        return 0.0;
    }
    if x < 1.0 {
        // E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
        let mut sum = CompensatedSum::new();
        let mut term = 1.0;
        for k in 1..200u32 {
            term *= -x / k as f64;
            let contrib = term / k as f64;
            sum.add(contrib);
            if contrib.abs() < 1e-18 * sum.value().abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum.value()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000u32 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln((n)_i) = ln(n (n-1) ... (n-i+1))` for `i ≤ n`.
///
/// Small `i` sums logs directly; otherwise the Stirling series is differenced
/// so that `n` and `n - i` never cancel in absolute terms.
pub fn ln_falling(n: u64, i: u64) -> f64 {
    assert!(i <= n, "falling factorial requires i <= n");
    if i == 0 {
        return 0.0;
    }
    if i <= 32 {
        let nf = n as f64;
        let mut acc = CompensatedSum::new();
        for q in 0..i {
            acc.add(nf.ln() + (-(q as f64) / nf).ln_1p());
        }
        return acc.value();
    }
    let m = n - i;
    if m < 16 {
        return ln_gamma(n as f64 + 1.0) - ln_gamma(m as f64 + 1.0);
    }
    // ln Γ(x+1) = (x+½)ln x − x + ½ln 2π + s(x), s(x) = 1/(12x) − 1/(360x³) + 1/(1260x⁵)
    let nf = n as f64;
    let mf = m as f64;
    let fi = i as f64;
    let s = |x: f64| {
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
    };
    let mut acc = CompensatedSum::new();
    acc.add(fi * nf.ln());
    acc.add(-(mf + 0.5) * (-fi / nf).ln_1p());
    acc.add(-fi);
    acc.add(s(nf) - s(mf));
    acc.value()
}

/// `ln C(n, i)`.
pub fn ln_binomial(n: u64, i: u64) -> f64 {
    assert!(i <= n, "binomial requires i <= n");
    let i = i.min(n - i);
    if i == 0 {
        return 0.0;
    }
    ln_falling(n, i) - ln_gamma(i as f64 + 1.0)
}
