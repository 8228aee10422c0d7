//! Scenario inputs: the 1-periodic potential V and the analytic decaying
//! perturbation W.
//!
//! V is a finite cosine series, which makes the period exact, complex
//! continuation trivial, and gives a clean plane-wave oracle. W is a sum of
//! Lorentzian terms a/(1+((z-c)/w)²); rational form means the strip bound Y
//! comes from the pole locations instead of being user-asserted, and the
//! derivatives are exact closed forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cosine harmonic a·cos(2πnx).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Harmonic {
    pub n: u32,
    pub a: f64,
}

/// Real 1-periodic potential V(x) = Σ a_n cos(2πnx).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct PeriodicPotential {
    pub series: Vec<Harmonic>,
}

impl PeriodicPotential {
    pub fn cosine(n: u32, a: f64) -> Self {
        PeriodicPotential {
            series: vec![Harmonic { n, a }],
        }
    }

    pub fn free() -> Self {
        PeriodicPotential::default()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        self.series
            .iter()
            .map(|h| h.a * (two_pi * h.n as f64 * x).cos())
            .sum()
    }

    /// Σ|a_n|, a bound on |V| used for spectral brackets.
    pub fn sup_norm_bound(&self) -> f64 {
        self.series.iter().map(|h| h.a.abs()).sum()
    }

    /// Fourier coefficient of e^{2πimx} (for the plane-wave oracle): a_{|m|}/2.
    pub fn fourier_coefficient(&self, m: i64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        self.series
            .iter()
            .filter(|h| h.n as i64 == m.abs())
            .map(|h| 0.5 * h.a)
            .sum()
    }
}

/// One rational term a/(1+((z-c)/w)²). A well is a < 0, a bump a > 0.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LorentzianTerm {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl LorentzianTerm {
    fn eval(&self, z: Complex64) -> Complex64 {
        let u = (z - self.center) / self.width;
        self.amplitude / (1.0 + u * u)
    }

    fn eval_prime(&self, z: Complex64) -> Complex64 {
        let u = (z - self.center) / self.width;
        let d = 1.0 + u * u;
        -2.0 * self.amplitude * u / (self.width * d * d)
    }

    fn eval_second(&self, z: Complex64) -> Complex64 {
        let u = (z - self.center) / self.width;
        let d = 1.0 + u * u;
        self.amplitude * (6.0 * u * u - 2.0) / (self.width * self.width * d * d * d)
    }
}

/// Serialized form of W in scenario files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationSpec {
    /// -alpha/(1+x²)
    LorentzianWell { alpha: f64 },
    /// The two-extremum example 2/(1+x²) - 1/(1+(x-5)²).
    LorentzianDouble,
    /// General sum of Lorentzian terms.
    Lorentzians { terms: Vec<LorentzianTerm> },
}

/// Analytic decaying perturbation W, Schwarz-symmetric on the strip
/// |Im z| ≤ Y, |W(z)| ≤ C/(1+|z|^s) with s = 2.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPerturbation {
    terms: Vec<LorentzianTerm>,
    /// Half-width of the analyticity strip actually used; strictly below the
    /// nearest pole.
    strip_half_width: f64,
    /// Decay exponent of the rational form.
    decay_exponent: f64,
}

/// Safety factor between the nearest pole and the default strip.
const POLE_MARGIN: f64 = 0.98;

/// Non-degeneracy floor for |W''| at an extremum.
pub const EXTREMUM_DEGENERACY_TOL: f64 = 1e-10;

impl AnalyticPerturbation {
    pub fn from_spec(spec: &PerturbationSpec, strip_override: Option<f64>) -> Result<Self> {
        let terms = match spec {
            PerturbationSpec::LorentzianWell { alpha } => vec![LorentzianTerm {
                amplitude: -alpha,
                center: 0.0,
                width: 1.0,
            }],
            PerturbationSpec::LorentzianDouble => vec![
                LorentzianTerm {
                    amplitude: 2.0,
                    center: 0.0,
                    width: 1.0,
                },
                LorentzianTerm {
                    amplitude: -1.0,
                    center: 5.0,
                    width: 1.0,
                },
            ],
            PerturbationSpec::Lorentzians { terms } => terms.clone(),
        };
        Self::new(terms, strip_override)
    }

    pub fn new(terms: Vec<LorentzianTerm>, strip_override: Option<f64>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Config("perturbation needs at least one term".into()));
        }
        for t in &terms {
            if t.width <= 0.0 {
                return Err(Error::Config(format!("Lorentzian width {} <= 0", t.width)));
            }
            if t.amplitude == 0.0 {
                return Err(Error::Config("Lorentzian amplitude must be nonzero".into()));
            }
        }
        // poles of a/(1+((z-c)/w)²) sit at c ± iw
        let pole_bound = terms.iter().map(|t| t.width).fold(f64::INFINITY, f64::min);
        let strip = match strip_override {
            Some(y) => {
                if y >= pole_bound {
                    return Err(Error::Config(format!(
                        "requested strip {y} reaches the nearest pole at Im z = {pole_bound}"
                    )));
                }
                y
            }
            None => POLE_MARGIN * pole_bound,
        };
        Ok(AnalyticPerturbation {
            terms,
            strip_half_width: strip,
            decay_exponent: 2.0,
        })
    }

    pub fn lorentzian_well(alpha: f64) -> Result<Self> {
        Self::from_spec(&PerturbationSpec::LorentzianWell { alpha }, None)
    }

    pub fn strip_half_width(&self) -> f64 {
        self.strip_half_width
    }

    pub fn decay_exponent(&self) -> f64 {
        self.decay_exponent
    }

    pub fn terms(&self) -> &[LorentzianTerm] {
        &self.terms
    }

    fn check_strip(&self, z: Complex64) -> Result<()> {
        if z.im.abs() > self.strip_half_width + 1e-14 {
            return Err(Error::Domain(format!(
                "z = {z} outside strip |Im z| <= {}",
                self.strip_half_width
            )));
        }
        Ok(())
    }

    /// W(z) on the strip.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.check_strip(z)?;
        Ok(self.eval_unchecked(z))
    }

    /// W'(z) on the strip (exact closed form, not finite differences).
    pub fn eval_prime(&self, z: Complex64) -> Result<Complex64> {
        self.check_strip(z)?;
        Ok(self.eval_prime_unchecked(z))
    }

    /// W''(z) on the strip.
    pub fn eval_second(&self, z: Complex64) -> Result<Complex64> {
        self.check_strip(z)?;
        Ok(self.terms.iter().map(|t| t.eval_second(z)).sum())
    }

    pub fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(z)).sum()
    }

    pub fn eval_prime_unchecked(&self, z: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval_prime(z)).sum()
    }

    /// W on the real axis.
    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval_unchecked(Complex64::new(x, 0.0)).re
    }

    pub fn eval_prime_real(&self, x: f64) -> f64 {
        self.eval_prime_unchecked(Complex64::new(x, 0.0)).re
    }

    /// sup |W| on the real axis estimate: Σ|a| (attained near centers).
    pub fn sup_norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.abs()).sum()
    }

    /// All real critical points of W in `window`, with value and W''.
    ///
    /// Scan for sign changes of W' then bisect; an extremum with
    /// |W''| below the degeneracy floor is rejected (the theory assumes
    /// non-degenerate extrema).
    pub fn real_extrema(&self, window: (f64, f64)) -> Result<Vec<Extremum>> {
        let (lo, hi) = window;
        if !(hi > lo) {
            return Err(Error::Config("empty extremum search window".into()));
        }
        let n_scan = (((hi - lo) / 0.01).ceil() as usize).clamp(64, 2_000_000);
        let step = (hi - lo) / n_scan as f64;
        let mut out = Vec::new();
        let mut x_prev = lo;
        let mut f_prev = self.eval_prime_real(lo);
        for i in 1..=n_scan {
            let x = lo + i as f64 * step;
            let f = self.eval_prime_real(x);
            if f_prev == 0.0 || f_prev * f < 0.0 {
                let root = bisect(|t| self.eval_prime_real(t), x_prev, x, 1e-14)?;
                let second = self.eval_second(Complex64::new(root, 0.0))?.re;
                if second.abs() < EXTREMUM_DEGENERACY_TOL {
                    return Err(Error::Assumption(format!(
                        "degenerate extremum at x = {root}: |W''| = {:.3e} < {EXTREMUM_DEGENERACY_TOL:.0e}",
                        second.abs()
                    )));
                }
                out.push(Extremum {
                    position: root,
                    value: self.eval_real(root),
                    second_derivative: second,
                });
            }
            x_prev = x;
            f_prev = f;
        }
        Ok(out)
    }
}

/// A non-degenerate real critical point of W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub position: f64,
    pub value: f64,
    pub second_derivative: f64,
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    if fa == 0.0 {
        return Ok(a);
    }
    let fb = f(b);
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::Numeric(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() < tol {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_v_examples() {
        assert_eq!(PeriodicPotential::free().eval(0.37), 0.0);
        let v = PeriodicPotential::cosine(1, 2.0);
        assert_abs_diff_eq!(v.eval(0.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.eval(0.25), 0.0, epsilon = 1e-15);
        // exact periodicity
        for x in [0.1, 0.63, -4.2] {
            assert_abs_diff_eq!(v.eval(x + 1.0), v.eval(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn eval_w_closed_forms() {
        let w = AnalyticPerturbation::lorentzian_well(0.5).unwrap();
        assert_abs_diff_eq!(w.eval(c(0.0, 0.0)).unwrap().re, -0.5, epsilon = 1e-15);
        let at_i_half = w.eval(c(0.0, 0.5)).unwrap();
        assert_abs_diff_eq!(at_i_half.re, -0.5 / 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(at_i_half.im, 0.0, epsilon = 1e-15);
        // Schwarz symmetry at a specific point
        let a = w.eval(c(1.0, 0.2)).unwrap();
        let b = w.eval(c(1.0, -0.2)).unwrap();
        assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-15);
    }

    #[test]
    fn strip_violation_is_domain_error() {
        let w = AnalyticPerturbation::lorentzian_well(0.5).unwrap();
        let y = w.strip_half_width();
        assert!(w.eval(c(0.0, y + 0.1)).is_err());
        assert!(w.eval_prime(c(0.0, -y - 0.1)).is_err());
    }

    #[test]
    fn w_prime_examples_and_fd_oracle() {
        let w = AnalyticPerturbation::lorentzian_well(0.5).unwrap();
        assert_abs_diff_eq!(w.eval_prime(c(0.0, 0.0)).unwrap().re, 0.0, epsilon = 1e-15);
        // closed form 2*alpha*z/(1+z^2)^2 at z = 1
        assert_abs_diff_eq!(w.eval_prime(c(1.0, 0.0)).unwrap().re, 0.25, epsilon = 1e-15);

        // central differences at h = 1e-6 agree to 1e-8 relative, 100 random strip points
        let double = AnalyticPerturbation::from_spec(&PerturbationSpec::LorentzianDouble, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for w in [&w, &double] {
            let y = w.strip_half_width() * 0.9;
            for _ in 0..100 {
                let z = c(rng.gen_range(-8.0..8.0), rng.gen_range(-y..y));
                let h = 1e-6;
                let fd = (w.eval_unchecked(z + h) - w.eval_unchecked(z - h)) / (2.0 * h);
                let exact = w.eval_prime_unchecked(z);
                assert!(
                    (fd - exact).norm() <= 1e-8 * exact.norm().max(1.0),
                    "z={z} fd={fd} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn schwarz_symmetry_random_points() {
        for spec in [
            PerturbationSpec::LorentzianWell { alpha: 9.0 },
            PerturbationSpec::LorentzianDouble,
        ] {
            let w = AnalyticPerturbation::from_spec(&spec, None).unwrap();
            let y = w.strip_half_width();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for _ in 0..1000 {
                let z = c(rng.gen_range(-20.0..20.0), rng.gen_range(-y..y));
                let diff = (w.eval_unchecked(z.conj()) - w.eval_unchecked(z).conj()).norm();
                assert!(diff <= 1e-12, "Schwarz residual {diff:.2e} at {z}");
            }
        }
    }

    #[test]
    fn decay_bound_holds() {
        let w = AnalyticPerturbation::lorentzian_well(9.0).unwrap();
        let s = w.decay_exponent();
        // |W(x)| * (1+|x|^s) stays bounded out to 1e4
        let mut sup: f64 = 0.0;
        let mut x = -1.0e4;
        while x <= 1.0e4 {
            sup = sup.max(w.eval_real(x).abs() * (1.0 + x.abs().powf(s)));
            x += 37.0;
        }
        assert!(sup <= 2.0 * 9.0, "decay product {sup}");
    }

    #[test]
    fn extrema_single_well() {
        let w = AnalyticPerturbation::lorentzian_well(0.5).unwrap();
        let ex = w.real_extrema((-10.0, 10.0)).unwrap();
        assert_eq!(ex.len(), 1);
        assert_abs_diff_eq!(ex[0].position, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(ex[0].value, -0.5, epsilon = 1e-12);
        // W'' (0) = 2*alpha
        assert_abs_diff_eq!(ex[0].second_derivative, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn extrema_double_example() {
        let w = AnalyticPerturbation::from_spec(&PerturbationSpec::LorentzianDouble, None).unwrap();
        let ex = w.real_extrema((-10.0, 15.0)).unwrap();
        assert_eq!(ex.len(), 2, "{ex:?}");
        // one max near 0, one min near 5
        assert!(ex[0].position.abs() < 0.2 && ex[0].second_derivative < 0.0);
        assert!((ex[1].position - 5.0).abs() < 0.2 && ex[1].second_derivative > 0.0);
        assert!(ex[0].value > 0.0 && ex[1].value < 0.0);
    }

    #[test]
    fn extrema_negation_flips_values() {
        let base = vec![
            LorentzianTerm { amplitude: 2.0, center: 0.0, width: 1.0 },
            LorentzianTerm { amplitude: -1.0, center: 5.0, width: 1.0 },
        ];
        let flipped: Vec<_> = base
            .iter()
            .map(|t| LorentzianTerm { amplitude: -t.amplitude, ..*t })
            .collect();
        let w1 = AnalyticPerturbation::new(base, None).unwrap();
        let w2 = AnalyticPerturbation::new(flipped, None).unwrap();
        let e1 = w1.real_extrema((-10.0, 15.0)).unwrap();
        let e2 = w2.real_extrema((-10.0, 15.0)).unwrap();
        assert_eq!(e1.len(), e2.len());
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert_abs_diff_eq!(a.position, b.position, epsilon = 1e-8);
            assert_abs_diff_eq!(a.value, -b.value, epsilon = 1e-10);
            assert_abs_diff_eq!(a.second_derivative, -b.second_derivative, epsilon = 1e-8);
        }
    }
}
