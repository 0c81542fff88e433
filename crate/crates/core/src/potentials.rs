//! Potentials with closed-form derivatives, the local quadratic expansion,
//! the classical flow and the linearized flow generator `F(alpha)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scales::{HamiltonianModel, ScaleReport};

/// A potential energy `V(x)` on `R^d` with exact derivatives.
pub trait Potential: Send + Sync + fmt::Debug {
    fn dims(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    /// `sum_{abc} d_a d_b d_c V(x) w^a w^b w^c`.
    fn third_directional(&self, x: &[f64], w: &[f64]) -> f64;
    /// Suprema of `|V''|_op` and of the unit-direction third derivative over
    /// the box `[lo, hi]`.
    fn sup_bounds(&self, lo: &[f64], hi: &[f64]) -> (f64, f64);
    /// Short name used in reports.
    fn label(&self) -> String;
}

/// One-dimensional built-in profiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `k x^2 / 2`, with `k = m omega^2`.
    Harmonic { stiffness: f64 },
    /// `a (x^2 - b^2)^2`.
    DoubleWell { a: f64, b: f64 },
    /// `-v0 cos(k x)`.
    Cosine { v0: f64, k: f64 },
    /// `k x^2 / 2 + eps x^3`.
    Cubic { stiffness: f64, epsilon: f64 },
}

impl Profile {
    pub fn harmonic(mass: f64, omega: f64) -> Self {
        Profile::Harmonic { stiffness: mass * omega * omega }
    }

    /// Builds a profile from a config name and parameter list.
    ///
    /// * `harmonic [omega]`
    /// * `double-well [a, b]`
    /// * `cosine [v0, k]`
    /// * `cubic [epsilon]` or `cubic [stiffness, epsilon]`
    pub fn from_name(name: &str, params: &[f64], mass: f64) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() != n {
                return Err(Error::InvalidModel(format!(
                    "potential '{name}' takes {n} parameter(s), got {}",
                    params.len()
                )));
            }
            Ok(())
        };
        let p = match name {
            "harmonic" => {
                want(1)?;
                Profile::harmonic(mass, params[0])
            }
            "double-well" => {
                want(2)?;
                Profile::DoubleWell { a: params[0], b: params[1] }
            }
            "cosine" => {
                want(2)?;
                Profile::Cosine { v0: params[0], k: params[1] }
            }
            "cubic" => match params.len() {
                1 => Profile::Cubic { stiffness: 1.0, epsilon: params[0] },
                _ => {
                    want(2)?;
                    Profile::Cubic { stiffness: params[0], epsilon: params[1] }
                }
            },
            other => return Err(Error::InvalidModel(format!("unknown potential '{other}'"))),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::Harmonic { .. } => "harmonic",
            Profile::DoubleWell { .. } => "double-well",
            Profile::Cosine { .. } => "cosine",
            Profile::Cubic { .. } => "cubic",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Profile::Harmonic { stiffness } => vec![stiffness],
            Profile::DoubleWell { a, b } => vec![a, b],
            Profile::Cosine { v0, k } => vec![v0, k],
            Profile::Cubic { stiffness, epsilon } => vec![stiffness, epsilon],
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.params().iter().all(|v| v.is_finite())
            && match *self {
                Profile::Harmonic { stiffness } => stiffness > 0.0,
                Profile::DoubleWell { a, .. } => a > 0.0,
                Profile::Cosine { v0, k } => v0 > 0.0 && k != 0.0,
                Profile::Cubic { .. } => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad parameters for {:?}", self)))
        }
    }

    pub fn v(&self, x: f64) -> f64 {
        match *self {
            Profile::Harmonic { stiffness } => 0.5 * stiffness * x * x,
            Profile::DoubleWell { a, b } => a * (x * x - b * b).powi(2),
            Profile::Cosine { v0, k } => -v0 * (k * x).cos(),
            Profile::Cubic { stiffness, epsilon } => 0.5 * stiffness * x * x + epsilon * x * x * x,
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Profile::Harmonic { stiffness } => stiffness * x,
            Profile::DoubleWell { a, b } => 4.0 * a * x * (x * x - b * b),
            Profile::Cosine { v0, k } => v0 * k * (k * x).sin(),
            Profile::Cubic { stiffness, epsilon } => stiffness * x + 3.0 * epsilon * x * x,
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Profile::Harmonic { stiffness } => stiffness,
            Profile::DoubleWell { a, b } => 4.0 * a * (3.0 * x * x - b * b),
            Profile::Cosine { v0, k } => v0 * k * k * (k * x).cos(),
            Profile::Cubic { stiffness, epsilon } => stiffness + 6.0 * epsilon * x,
        }
    }

    pub fn d3(&self, x: f64) -> f64 {
        match *self {
            Profile::Harmonic { .. } => 0.0,
            Profile::DoubleWell { a, .. } => 24.0 * a * x,
            Profile::Cosine { v0, k } => -v0 * k * k * k * (k * x).sin(),
            Profile::Cubic { epsilon, .. } => 6.0 * epsilon,
        }
    }

    /// `sup |V''|` on `[lo, hi]`.
    pub fn sup2(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Profile::Harmonic { stiffness } => stiffness.abs(),
            Profile::DoubleWell { .. } => {
                let mut m = self.d2(lo).abs().max(self.d2(hi).abs());
                if lo <= 0.0 && hi >= 0.0 {
                    m = m.max(self.d2(0.0).abs());
                }
                m
            }
            Profile::Cosine { v0, k } => v0 * k * k * max_abs_trig(k * lo, k * hi, 0.0),
            Profile::Cubic { .. } => self.d2(lo).abs().max(self.d2(hi).abs()),
        }
    }

    /// `sup |V'''|` on `[lo, hi]`.
    pub fn sup3(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            Profile::Harmonic { .. } => 0.0,
            Profile::DoubleWell { a, .. } => 24.0 * a * lo.abs().max(hi.abs()),
            Profile::Cosine { v0, k } => {
                v0 * (k * k * k).abs() * max_abs_trig(k * lo, k * hi, FRAC_PI_2)
            }
            Profile::Cubic { epsilon, .. } => 6.0 * epsilon.abs(),
        }
    }
}

/// `max |cos(u - shift)|` for `u` between `u0` and `u1`.
fn max_abs_trig(u0: f64, u1: f64, shift: f64) -> f64 {
    let (lo, hi) = if u0 <= u1 { (u0 - shift, u1 - shift) } else { (u1 - shift, u0 - shift) };
    if (hi / PI).floor() >= (lo / PI).ceil() {
        1.0
    } else {
        lo.cos().abs().max(hi.cos().abs())
    }
}

/// A built-in profile applied to every coordinate: `V(x) = sum_k v(x_k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separable {
    pub profile: Profile,
    pub dims: usize,
}

impl Potential for Separable {
    fn dims(&self) -> usize {
        self.dims
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| self.profile.v(xi)).sum()
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|&xi| self.profile.d1(xi)))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(x.len(), x.iter().map(|&xi| self.profile.d2(xi))))
    }

    fn third_directional(&self, x: &[f64], w: &[f64]) -> f64 {
        x.iter().zip(w).map(|(&xi, &wi)| self.profile.d3(xi) * wi * wi * wi).sum()
    }

    fn sup_bounds(&self, lo: &[f64], hi: &[f64]) -> (f64, f64) {
        // The Hessian is diagonal and sum |w_k|^3 <= 1 on the unit sphere, so
        // both suprema are the worst coordinate's one-dimensional values.
        lo.iter().zip(hi).fold((0.0_f64, 0.0_f64), |(s2, s3), (&l, &h)| {
            (s2.max(self.profile.sup2(l, h)), s3.max(self.profile.sup3(l, h)))
        })
    }

    fn label(&self) -> String {
        let p: Vec<String> = self.profile.params().iter().map(|v| format!("{v}")).collect();
        format!("{}[{}]", self.profile.name(), p.join(","))
    }
}

/// `V^{[a,2]}`: value, gradient and Hessian of `V` frozen at `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticExpansion {
    pub base: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl QuadraticExpansion {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - &self.base;
        self.value + self.gradient.dot(&dx) + 0.5 * dx.dot(&(&self.hessian * &dx))
    }

    /// `V(x) - V^{[a,2]}(x)`.
    pub fn remainder(&self, model: &HamiltonianModel, x: &[f64]) -> f64 {
        model.potential.value(x) - self.eval(x)
    }
}

pub fn harmonic_expansion(model: &HamiltonianModel, a_x: &[f64]) -> Result<QuadraticExpansion> {
    model.check_dims(a_x.len())?;
    if !model.in_domain(a_x) {
        return Err(Error::OutsideDomain { x: a_x.to_vec() });
    }
    Ok(expansion_unchecked(model, a_x))
}

/// Same as [`harmonic_expansion`] without the domain check.
pub fn expansion_unchecked(model: &HamiltonianModel, a_x: &[f64]) -> QuadraticExpansion {
    QuadraticExpansion {
        base: DVector::from_column_slice(a_x),
        value: model.potential.value(a_x),
        gradient: model.potential.gradient(a_x),
        hessian: model.potential.hessian(a_x),
    }
}

/// `sup3 |dx|^3 / 6`.
pub fn taylor_remainder_bound(model: &HamiltonianModel, dx: &[f64]) -> f64 {
    let r = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    model.sup3 * r.powi(3) / 6.0
}

/// `(alpha_p / m, -grad V(alpha_x))`. Positions outside the domain are
/// evaluated by extension; callers check [`HamiltonianModel::in_domain`].
pub fn flow_vector(model: &HamiltonianModel, alpha: &DVector<f64>) -> DVector<f64> {
    let d = model.dims();
    let x = alpha.rows(0, d);
    let g = model.potential.gradient(x.as_slice());
    let mut out = DVector::zeros(2 * d);
    for k in 0..d {
        out[k] = alpha[d + k] / model.mass;
        out[d + k] = -g[k];
    }
    out
}

/// Jacobian of [`flow_vector`], `F(alpha) = [[0, I/m], [-V''(alpha_x), 0]]`;
/// a Gaussian centered at `alpha` skews as `dsigma/dt = F sigma + sigma F^T`.
pub fn hamiltonian_matrix(model: &HamiltonianModel, alpha: &DVector<f64>) -> DMatrix<f64> {
    let d = model.dims();
    let h = model.potential.hessian(alpha.rows(0, d).as_slice());
    let mut f = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        f[(i, d + i)] = 1.0 / model.mass;
        for j in 0..d {
            f[(d + i, j)] = -h[(i, j)];
        }
    }
    f
}

/// `sigma*^{-1/2} F sigma*^{1/2}`.
pub fn whitened_hamiltonian_matrix(
    model: &HamiltonianModel,
    alpha: &DVector<f64>,
    scales: &ScaleReport,
) -> DMatrix<f64> {
    let f = hamiltonian_matrix(model, alpha);
    crate::linalg::scale_lr(&f, &scales.whiten_diag(), &scales.unwhiten_diag())
}
