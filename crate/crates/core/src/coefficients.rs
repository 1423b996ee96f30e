//! Coefficient triples `(b, g = g1 + g2, σ)`, their growth/Lipschitz checks,
//! the truncation gate `κ_R` and the mollifier producing `b_n`, `g_n`, `σ_n`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Hypothesis, Result, SpdeError};

pub type CoefFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A scalar coefficient `(t, x, r) ↦ value`.
///
/// `Zero`, `Const` and `Poly` are kept symbolic so mollification and
/// derivatives of them stay exact and cheap.
#[derive(Clone)]
pub enum ScalarCoef {
    Zero,
    Const(f64),
    /// `c0 + c1 r + c2 r² + c3 r³`
    Poly([f64; 4]),
    Func(CoefFn),
    /// Convolution in `r` with the scaled bump, `n ∫ φ(n(r - y)) base(y) dy`.
    Mollified { base: Box<ScalarCoef>, n: f64 },
}

impl fmt::Debug for ScalarCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarCoef::Zero => f.write_str("Zero"),
            ScalarCoef::Const(c) => write!(f, "Const({c})"),
            ScalarCoef::Poly(c) => write!(f, "Poly({c:?})"),
            ScalarCoef::Func(_) => f.write_str("Func(..)"),
            ScalarCoef::Mollified { base, n } => write!(f, "Mollified({base:?}, n={n})"),
        }
    }
}

impl ScalarCoef {
    pub fn func(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarCoef::Func(Arc::new(f))
    }

    /// Autonomous coefficient depending on `r` only.
    pub fn of_r(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarCoef::Func(Arc::new(move |_, _, r| f(r)))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarCoef::Zero)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64, r: f64) -> f64 {
        match self {
            ScalarCoef::Zero => 0.0,
            ScalarCoef::Const(c) => *c,
            ScalarCoef::Poly(c) => c[0] + r * (c[1] + r * (c[2] + r * c[3])),
            ScalarCoef::Func(f) => f(t, x, r),
            ScalarCoef::Mollified { base, n } => {
                let m = mollifier();
                m.nodes
                    .iter()
                    .zip(&m.weights)
                    .map(|(z, w)| w * base.eval(t, x, r - z / n))
                    .sum()
            }
        }
    }

    /// `∂_r` of the coefficient; central differences for raw closures.
    pub fn deriv(&self, t: f64, x: f64, r: f64) -> f64 {
        self.eval_with_deriv(t, x, r).1
    }

    pub fn eval_with_deriv(&self, t: f64, x: f64, r: f64) -> (f64, f64) {
        match self {
            ScalarCoef::Zero => (0.0, 0.0),
            ScalarCoef::Const(c) => (*c, 0.0),
            ScalarCoef::Poly(c) => (
                c[0] + r * (c[1] + r * (c[2] + r * c[3])),
                c[1] + r * (2.0 * c[2] + 3.0 * r * c[3]),
            ),
            ScalarCoef::Func(f) => {
                let h = 1e-6 * (1.0 + r.abs());
                (f(t, x, r), (f(t, x, r + h) - f(t, x, r - h)) / (2.0 * h))
            }
            ScalarCoef::Mollified { base, n } => {
                // differentiate the discrete rule itself, so value and
                // derivative stay consistent to round-off
                let m = mollifier();
                let mut v = 0.0;
                let mut d = 0.0;
                for (z, w) in m.nodes.iter().zip(&m.weights) {
                    let (b, db) = base.eval_with_deriv(t, x, r - z / n);
                    v += w * b;
                    d += w * db;
                }
                (v, d)
            }
        }
    }

    pub fn mollified(&self, n: usize) -> Self {
        match self {
            ScalarCoef::Zero | ScalarCoef::Const(_) => self.clone(),
            // the bump is even, so only the second moment survives
            ScalarCoef::Poly(c) => {
                let m2 = mollifier().second_moment / (n as f64 * n as f64);
                ScalarCoef::Poly([c[0] + c[2] * m2, c[1] + 3.0 * c[3] * m2, c[2], c[3]])
            }
            _ => ScalarCoef::Mollified {
                base: Box::new(self.clone()),
                n: n as f64,
            },
        }
    }
}

/// Growth and Lipschitz constants declared for a coefficient set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// `K` in the linear/quadratic growth bounds on `b`, `g1`, `g2`
    pub growth: f64,
    /// `L`, Lipschitz constant of `σ` in `r`
    pub lipschitz: f64,
    /// `k1`, lower bound on `|σ|`; `None` when non-degeneracy is not asserted
    pub sigma_lower: Option<f64>,
    /// `k2`, upper bound on `|σ|`
    pub sigma_upper: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientSet {
    pub b: ScalarCoef,
    pub g1: ScalarCoef,
    pub g2: ScalarCoef,
    pub sigma: ScalarCoef,
    pub constants: Constants,
    pub label: String,
}

impl CoefficientSet {
    /// Builds and validates a set from closures.
    pub fn custom(b: ScalarCoef, g1: ScalarCoef, g2: ScalarCoef, sigma: ScalarCoef, constants: Constants) -> Result<Self> {
        let set = Self::unchecked(b, g1, g2, sigma, constants, "custom");
        set.validate()?;
        Ok(set)
    }

    pub fn unchecked(b: ScalarCoef, g1: ScalarCoef, g2: ScalarCoef, sigma: ScalarCoef, constants: Constants, label: &str) -> Self {
        Self {
            b,
            g1,
            g2,
            sigma,
            constants,
            label: label.to_string(),
        }
    }

    /// Zero drift, zero flux and constant `σ`; the linear stochastic heat equation.
    pub fn additive_heat(sigma: f64) -> Self {
        let sigma_coef = if sigma == 0.0 { ScalarCoef::Zero } else { ScalarCoef::Const(sigma) };
        Self::unchecked(
            ScalarCoef::Zero,
            ScalarCoef::Zero,
            ScalarCoef::Zero,
            sigma_coef,
            Constants {
                growth: 0.0,
                lipschitz: 0.0,
                sigma_lower: (sigma != 0.0).then(|| sigma.abs()),
                sigma_upper: sigma.abs(),
            },
            "additive_heat",
        )
    }

    pub fn has_flux(&self) -> bool {
        !(self.g1.is_zero() && self.g2.is_zero())
    }

    #[inline]
    pub fn g(&self, t: f64, x: f64, r: f64) -> f64 {
        self.g1.eval(t, x, r) + self.g2.eval(t, x, r)
    }

    pub fn g_with_deriv(&self, t: f64, x: f64, r: f64) -> (f64, f64) {
        let (a, da) = self.g1.eval_with_deriv(t, x, r);
        let (b, db) = self.g2.eval_with_deriv(t, x, r);
        (a + b, da + db)
    }

    /// Same set with `σ` multiplied by `factor` (constants rescaled accordingly).
    pub fn with_sigma_scaled(&self, factor: f64) -> Self {
        let sigma = match &self.sigma {
            ScalarCoef::Zero => ScalarCoef::Zero,
            ScalarCoef::Const(c) => ScalarCoef::Const(c * factor),
            ScalarCoef::Poly(c) => ScalarCoef::Poly(c.map(|v| v * factor)),
            other => {
                let inner = other.clone();
                ScalarCoef::func(move |t, x, r| factor * inner.eval(t, x, r))
            }
        };
        let c = self.constants;
        Self {
            sigma,
            constants: Constants {
                lipschitz: c.lipschitz * factor.abs(),
                sigma_lower: c.sigma_lower.map(|k| k * factor.abs()),
                sigma_upper: c.sigma_upper * factor.abs(),
                ..c
            },
            ..self.clone()
        }
    }

    /// Checks (H1)–(H4) on the sampling lattice; reports the first failing point.
    pub fn validate(&self) -> Result<()> {
        let c = self.constants;
        let k = c.growth;
        let rs = validation_r_lattice();
        let slack = |bound: f64| bound * (1.0 + 1e-9) + 1e-12;
        for &t in &VALIDATION_T {
            for &x in &VALIDATION_X {
                for &r in &rs {
                    let b = self.b.eval(t, x, r);
                    if !(b.abs() <= slack(k * (1.0 + r.abs()))) {
                        return Err(violation(Hypothesis::H1, t, x, r, format!("|b| = {} > K(1+|r|) with K = {k}", b.abs())));
                    }
                    let g1 = self.g1.eval(t, x, r);
                    if !(g1.abs() <= slack(k * (1.0 + r.abs()))) {
                        return Err(violation(Hypothesis::H2, t, x, r, format!("|g1| = {} > K(1+|r|) with K = {k}", g1.abs())));
                    }
                    let g2 = self.g2.eval(t, x, r);
                    if !(g2.abs() <= slack(k * (1.0 + r * r))) {
                        return Err(violation(Hypothesis::H2, t, x, r, format!("|g2| = {} > K(1+r²) with K = {k}", g2.abs())));
                    }
                    let s = self.sigma.eval(t, x, r).abs();
                    if !(s <= slack(c.sigma_upper)) {
                        return Err(violation(Hypothesis::H3, t, x, r, format!("|σ| = {s} > k2 = {}", c.sigma_upper)));
                    }
                    if let Some(k1) = c.sigma_lower {
                        if !(s >= k1 * (1.0 - 1e-9) - 1e-12) {
                            return Err(violation(Hypothesis::H4, t, x, r, format!("|σ| = {s} < k1 = {k1}")));
                        }
                    }
                }
                let fine = lipschitz_r_lattice();
                for pair in fine.windows(2) {
                    let (p, q) = (pair[0], pair[1]);
                    let d = (self.sigma.eval(t, x, p) - self.sigma.eval(t, x, q)).abs();
                    if !(d <= slack(c.lipschitz * (p - q).abs())) {
                        return Err(violation(
                            Hypothesis::H3,
                            t,
                            x,
                            p,
                            format!("|σ(p) - σ(q)| = {d} > L|p - q| with L = {}, q = {q}", c.lipschitz),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// `(min |σ|, max |σ|)` over the validation lattice.
    pub fn scan_sigma_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &t in &VALIDATION_T {
            for &x in &VALIDATION_X {
                for r in validation_r_lattice().into_iter().chain(lipschitz_r_lattice()) {
                    let s = self.sigma.eval(t, x, r).abs();
                    lo = lo.min(s);
                    hi = hi.max(s);
                }
            }
        }
        (lo, hi)
    }
}

fn violation(hypothesis: Hypothesis, t: f64, x: f64, r: f64, detail: String) -> SpdeError {
    SpdeError::Hypothesis {
        hypothesis,
        t,
        x,
        r,
        detail,
    }
}

const VALIDATION_T: [f64; 3] = [0.0, 1.0, 10.0];
const VALIDATION_X: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// `0` and `±10^{j/4}` for `j = -12..=8`, i.e. `|r|` from 1e-3 to 100, ascending in `|r|`.
fn validation_r_lattice() -> Vec<f64> {
    let mut rs = vec![0.0];
    for j in -12..=8 {
        let r = 10f64.powf(j as f64 / 4.0);
        rs.push(r);
        rs.push(-r);
    }
    rs
}

fn lipschitz_r_lattice() -> Vec<f64> {
    (0..=4000).map(|j| -20.0 + j as f64 * 0.01).collect()
}

/// Named presets understood by the config layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Burgers,
    ReactionDiffusion,
    Custom,
}

impl std::str::FromStr for Preset {
    type Err = SpdeError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "burgers" => Ok(Preset::Burgers),
            "reaction_diffusion" => Ok(Preset::ReactionDiffusion),
            "custom" => Ok(Preset::Custom),
            other => Err(SpdeError::config(format!(
                "coefficients.preset must be one of burgers, reaction_diffusion, custom (got {other})"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Burgers => "burgers",
            Preset::ReactionDiffusion => "reaction_diffusion",
            Preset::Custom => "custom",
        })
    }
}

/// Parametric family behind the presets:
///
/// * `b(r)  = alpha·r + beta·sin r + cubic·r³`
/// * `g1(r) = g_lin·r`, `g2(r) = g_quad·r²`
/// * `σ(r)  = sigma + sigma_amp·sin r`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientParams {
    pub alpha: f64,
    pub beta: f64,
    pub cubic: f64,
    pub g_lin: f64,
    pub g_quad: f64,
    pub sigma: f64,
    pub sigma_amp: f64,
    pub growth: Option<f64>,
    pub lipschitz: Option<f64>,
    pub sigma_lower: Option<f64>,
    pub sigma_upper: Option<f64>,
}

impl Default for CoefficientParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            cubic: 0.0,
            g_lin: 0.0,
            g_quad: 0.0,
            sigma: 1.0,
            sigma_amp: 0.0,
            growth: None,
            lipschitz: None,
            sigma_lower: None,
            sigma_upper: None,
        }
    }
}

impl CoefficientParams {
    pub fn burgers(sigma: f64) -> Self {
        Self {
            g_quad: 0.5,
            sigma,
            ..Self::default()
        }
    }

    pub fn reaction_diffusion(alpha: f64, sigma: f64, sigma_amp: f64) -> Self {
        Self {
            alpha,
            sigma,
            sigma_amp,
            ..Self::default()
        }
    }

    fn derived_constants(&self) -> Constants {
        let growth = self
            .growth
            .unwrap_or_else(|| (self.alpha.abs() + self.beta.abs()).max(self.g_lin.abs()).max(self.g_quad.abs()));
        let lipschitz = self.lipschitz.unwrap_or(self.sigma_amp.abs());
        let sigma_upper = self.sigma_upper.unwrap_or(self.sigma.abs() + self.sigma_amp.abs());
        let sigma_lower = self.sigma_lower.or_else(|| {
            let k1 = self.sigma.abs() - self.sigma_amp.abs();
            (k1 > 0.0).then_some(k1)
        });
        Constants {
            growth,
            lipschitz,
            sigma_lower,
            sigma_upper,
        }
    }
}

/// Builds and validates a preset coefficient set.
pub fn make_preset(preset: Preset, params: &CoefficientParams) -> Result<CoefficientSet> {
    let p = *params;
    let has_b = p.alpha != 0.0 || p.beta != 0.0 || p.cubic != 0.0;
    let has_g = p.g_lin != 0.0 || p.g_quad != 0.0;
    match preset {
        Preset::Burgers if has_b || p.g_lin != 0.0 => {
            return Err(SpdeError::config(
                "burgers preset fixes b ≡ 0 and g1 ≡ 0; use preset = custom to add them",
            ))
        }
        Preset::ReactionDiffusion if has_g => {
            return Err(SpdeError::config("reaction_diffusion preset fixes g ≡ 0; use preset = custom"))
        }
        _ => {}
    }

    let b = if p.beta != 0.0 {
        ScalarCoef::of_r(move |r| p.alpha * r + p.beta * r.sin() + p.cubic * r * r * r)
    } else if has_b {
        ScalarCoef::Poly([0.0, p.alpha, 0.0, p.cubic])
    } else {
        ScalarCoef::Zero
    };
    let g1 = if p.g_lin != 0.0 {
        ScalarCoef::Poly([0.0, p.g_lin, 0.0, 0.0])
    } else {
        ScalarCoef::Zero
    };
    let g2 = if p.g_quad != 0.0 {
        ScalarCoef::Poly([0.0, 0.0, p.g_quad, 0.0])
    } else {
        ScalarCoef::Zero
    };
    let sigma = if p.sigma_amp != 0.0 {
        ScalarCoef::of_r(move |r| p.sigma + p.sigma_amp * r.sin())
    } else if p.sigma != 0.0 {
        ScalarCoef::Const(p.sigma)
    } else {
        ScalarCoef::Zero
    };
    let set = CoefficientSet::unchecked(b, g1, g2, sigma, p.derived_constants(), &preset.to_string());
    set.validate()?;
    Ok(set)
}

/// Smooth cutoff `κ_R` in the squared H-norm.
///
/// Equal to 1 on `|r| ≤ R`, 0 on `|r| ≥ R + 1`, and a quintic smoothstep in
/// between; the maximum slope is `15/8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationGate {
    pub level: f64,
}

impl TruncationGate {
    pub fn new(level: f64) -> Result<Self> {
        if !(level > 0.0) {
            return Err(SpdeError::config(format!("truncation.R must be positive (got {level})")));
        }
        Ok(Self { level })
    }

    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        let a = r.abs();
        if a <= self.level {
            1.0
        } else if a >= self.level + 1.0 {
            0.0
        } else {
            let s = a - self.level;
            1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
        }
    }

    /// `dκ_R/dr`, analytic.
    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        let a = r.abs();
        if a <= self.level || a >= self.level + 1.0 {
            0.0
        } else {
            let s = a - self.level;
            -30.0 * s * s * (1.0 - s) * (1.0 - s) * r.signum()
        }
    }
}

pub fn gate(gate: &TruncationGate, r: f64) -> f64 {
    gate.value(r)
}

/// Quadrature rule for convolution with the normalized bump
/// `φ(z) ∝ exp(-1/(1 - z²))` on `(-1, 1)`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    /// `∫ exp(-1/(1 - z²)) dz`, by adaptive Simpson
    pub raw_mass: f64,
    /// `Σ w_j z_j²`, the rule's own second moment
    pub second_moment: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MOLLIFIER_NODES: usize = 48;

fn bump(z: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - z * z)).exp()
    }
}

impl Mollifier {
    fn build(q: usize) -> Self {
        let raw_mass = adaptive_simpson(&bump, -1.0, 1.0, 1e-13, 40);
        let h = 2.0 / (q + 1) as f64;
        let nodes: Vec<f64> = (1..=q).map(|j| -1.0 + j as f64 * h).collect();
        // Trapezoid on a function flat to all orders at ±1, renormalised so the
        // discrete rule has unit mass and reproduces constants exactly.
        let mass: f64 = nodes.iter().map(|&z| bump(z) * h).sum();
        let weights: Vec<f64> = nodes.iter().map(|&z| bump(z) * h / mass).collect();
        let second_moment = nodes.iter().zip(&weights).map(|(z, w)| z * z * w).sum();
        Self {
            raw_mass,
            second_moment,
            nodes,
            weights,
        }
    }

    /// Normalized density `φ(z)`.
    pub fn phi(&self, z: f64) -> f64 {
        bump(z) / self.raw_mass
    }
}

pub fn mollifier() -> &'static Mollifier {
    static RULE: OnceLock<Mollifier> = OnceLock::new();
    RULE.get_or_init(|| Mollifier::build(MOLLIFIER_NODES))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, whole: f64, m: f64, fm: f64, tol: f64, depth: u32) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1) + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, depth)
}

/// Mollifies every coefficient in `r` with index `n`, holding `(t, x)` fixed.
pub fn mollify(set: &CoefficientSet, n: usize) -> Result<CoefficientSet> {
    if n == 0 {
        return Err(SpdeError::config("mollification index must be at least 1"));
    }
    Ok(CoefficientSet {
        b: set.b.mollified(n),
        g1: set.g1.mollified(n),
        g2: set.g2.mollified(n),
        sigma: set.sigma.mollified(n),
        constants: set.constants,
        label: format!("{}/mollified({n})", set.label),
    })
}
