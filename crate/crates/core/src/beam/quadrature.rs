use std::f64::consts::PI;
use std::sync::OnceLock;

use super::BeamParams;
use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Settings for the aperture integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Nodes per dimension and panel; the error estimate reruns with half as many.
    pub nodes: usize,
    /// Absolute tolerance on the transmittance.
    pub tolerance: f64,
    /// Largest number of panels per dimension tried before giving up.
    pub max_panels: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 64,
            tolerance: 1e-8,
            max_panels: 16,
        }
    }
}

/// Tensor-product Gauss-Legendre integrator for the elliptic-beam aperture integral.
#[derive(Debug, Clone)]
pub struct ApertureIntegrator {
    spec: QuadratureSpec,
    fine: GaussLegendre,
    coarse: GaussLegendre,
}

impl ApertureIntegrator {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        if spec.nodes < 4 || !spec.nodes.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "quadrature nodes must be an even number >= 4, got {}",
                spec.nodes
            )));
        }
        if !(spec.tolerance > 0.0) || spec.max_panels == 0 {
            return Err(Error::Config(
                "quadrature tolerance must be positive and max_panels >= 1".into(),
            ));
        }
        Ok(Self {
            spec,
            fine: GaussLegendre::new(spec.nodes),
            coarse: GaussLegendre::new(spec.nodes / 2),
        })
    }

    pub fn with_nodes(nodes: usize) -> Result<Self> {
        Self::new(QuadratureSpec {
            nodes,
            ..QuadratureSpec::default()
        })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    /// Fraction of the beam power collected by a centered circular aperture of
    /// radius `r`, including the extinction factor.
    pub fn transmittance(&self, v: &BeamParams, r: f64, chi_ext: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("aperture radius {r} must be non-negative")));
        }
        if !(chi_ext > 0.0 && chi_ext <= 1.0) {
            return Err(Error::domain(format!("extinction {chi_ext} outside (0, 1]")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let shape = EllipseFrame::new(v);
        let prefactor = 2.0 * chi_ext / (PI * v.w1_m() * v.w2_m());

        let mut panels = 1;
        loop {
            let fine = shape.integrate(&self.fine, r, panels);
            let coarse = shape.integrate(&self.coarse, r, panels);
            let estimate = prefactor * (fine - coarse).abs();
            if estimate <= self.spec.tolerance {
                return Ok((prefactor * fine).clamp(0.0, chi_ext));
            }
            if panels >= self.spec.max_panels {
                return Err(Error::Quadrature {
                    estimate,
                    tolerance: self.spec.tolerance,
                    panels,
                    nodes: self.spec.nodes,
                    beam: format!("{v:?}, r = {r}"),
                });
            }
            panels *= 2;
        }
    }
}

fn default_integrator() -> &'static ApertureIntegrator {
    static INTEGRATOR: OnceLock<ApertureIntegrator> = OnceLock::new();
    INTEGRATOR.get_or_init(|| {
        ApertureIntegrator::new(QuadratureSpec::default()).expect("default quadrature spec is valid")
    })
}

/// Aperture transmittance with the default 64 x 64 node rule.
pub fn aperture_transmittance(v: &BeamParams, r: f64, chi_ext: f64) -> Result<f64> {
    default_integrator().transmittance(v, r, chi_ext)
}

/// Centered circular beam: `chi (1 - exp(-2 r^2 / w^2))`.
pub fn circular_beam_transmittance(w: f64, r: f64, chi_ext: f64) -> f64 {
    -chi_ext * (-2.0 * r * r / (w * w)).exp_m1()
}

// Ellipse quadratic form in the frame where the centroid sits on the x axis.
struct EllipseFrame {
    rho0: f64,
    a1: f64,
    a2: f64,
    a3: f64,
}

impl EllipseFrame {
    fn new(v: &BeamParams) -> Self {
        let rho0 = v.x0_m().hypot(v.y0_m());
        let theta0 = if rho0 > 0.0 { v.y0_m().atan2(v.x0_m()) } else { 0.0 };
        let psi = v.orient_rad() - theta0;
        let (s, c) = psi.sin_cos();
        let i1 = 1.0 / (v.w1_m() * v.w1_m());
        let i2 = 1.0 / (v.w2_m() * v.w2_m());
        Self {
            rho0,
            a1: c * c * i1 + s * s * i2,
            a2: s * s * i1 + c * c * i2,
            a3: (i1 - i2) * (2.0 * psi).sin(),
        }
    }

    fn integrand(&self, rho: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let x = rho * c - self.rho0;
        let y = rho * s;
        (-2.0 * (self.a1 * x * x + self.a2 * y * y + self.a3 * x * y)).exp()
    }

    fn integrate(&self, rule: &GaussLegendre, r: f64, panels: usize) -> f64 {
        let dr = r / panels as f64;
        let dt = 2.0 * PI / panels as f64;
        let mut total = 0.0;
        for i in 0..panels {
            let r_lo = i as f64 * dr;
            for (rho, wr) in rule.mapped(r_lo, r_lo + dr) {
                let mut ring = 0.0;
                for j in 0..panels {
                    let t_lo = j as f64 * dt;
                    for (theta, wt) in rule.mapped(t_lo, t_lo + dt) {
                        ring += wt * self.integrand(rho, theta);
                    }
                }
                total += wr * rho * ring;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let rule = GaussLegendre::new(8);
        let weights: f64 = rule.weights.iter().sum();
        assert!((weights - 2.0).abs() < 1e-14);
        // degree 15 is the highest integrated exactly by 8 nodes
        let got = rule.integrate(0.0, 1.0, |x| x.powi(15));
        assert!((got - 1.0 / 16.0).abs() < 1e-15);
        let got = GaussLegendre::new(64).integrate(0.0, PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn circular_examples() {
        assert_eq!(circular_beam_transmittance(0.5, 0.0, 1.0), 0.0);
        assert!((circular_beam_transmittance(0.5, 1e3, 0.9) - 0.9).abs() < 1e-15);
        assert!((circular_beam_transmittance(0.5, 0.5, 1.0) - 0.864665).abs() < 1e-6);
    }

    #[test]
    fn centered_circle_matches_radial_oracle() {
        // independent 1-D oracle: 4/w^2 * int_0^r rho exp(-2 rho^2/w^2) d rho, by Simpson
        let (w, r, chi) = (0.8, 0.5, 0.7);
        let n = 20_000;
        let h = r / n as f64;
        let f = |rho: f64| 4.0 / (w * w) * rho * (-2.0 * rho * rho / (w * w)).exp();
        let mut simpson = f(0.0) + f(r);
        for i in 1..n {
            simpson += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = chi * simpson * h / 3.0;
        let v = BeamParams::new(0.0, 0.0, w, w, 0.3).unwrap();
        let got = aperture_transmittance(&v, r, chi).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        assert!((got - circular_beam_transmittance(w, r, chi)).abs() < 1e-12);
    }

    #[test]
    fn limits() {
        let v = BeamParams::new(0.0, 0.0, 0.4, 0.4, 0.0).unwrap();
        assert!((aperture_transmittance(&v, 20.0 * 0.4, 0.8).unwrap() - 0.8).abs() < 1e-9);
        assert_eq!(aperture_transmittance(&v, 0.0, 0.8).unwrap(), 0.0);
        assert!(aperture_transmittance(&v, -1.0, 0.8).is_err());
    }

    #[test]
    fn narrow_offset_beam_needs_panels_or_fails_loudly() {
        let v = BeamParams::new(0.45, 0.0, 0.01, 0.004, 0.2).unwrap();
        match aperture_transmittance(&v, 0.5, 1.0) {
            Ok(t) => assert!((t - 1.0).abs() < 1e-6, "{t}"),
            Err(Error::Quadrature { .. }) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    proptest! {
        #[test]
        fn swap_axes_with_quarter_turn(
            x0 in -0.6f64..0.6, y0 in -0.6f64..0.6,
            w1 in 0.3f64..2.0, w2 in 0.3f64..2.0, orient in 0.0f64..3.2,
        ) {
            let a = BeamParams::new(x0, y0, w1, w2, orient).unwrap();
            let b = BeamParams::new(x0, y0, w2, w1, orient + std::f64::consts::FRAC_PI_2).unwrap();
            let ta = aperture_transmittance(&a, 0.5, 1.0).unwrap();
            let tb = aperture_transmittance(&b, 0.5, 1.0).unwrap();
            prop_assert!((ta - tb).abs() < 1e-8);
        }

        #[test]
        fn monotone_in_radius_and_bounded(
            x0 in -1.0f64..1.0, y0 in -1.0f64..1.0,
            w1 in 0.3f64..2.5, w2 in 0.3f64..2.5, orient in 0.0f64..3.2,
            chi in 0.1f64..=1.0,
        ) {
            let v = BeamParams::new(x0, y0, w1, w2, orient).unwrap();
            let mut last = 0.0;
            for i in 1..=20 {
                let t = aperture_transmittance(&v, 0.05 * i as f64, chi).unwrap();
                prop_assert!((0.0..=chi).contains(&t));
                prop_assert!(t >= last - 1e-9);
                last = t;
            }
        }
    }
}
