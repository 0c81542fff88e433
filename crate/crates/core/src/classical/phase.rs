use crate::error::{Error, Result};

/// Cell-centered `(x, p)` grid: `x_i = x_min + (i + 1/2) dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseGrid {
    pub nx: usize,
    pub np: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl PhaseGrid {
    pub fn new(nx: usize, np: usize, x: (f64, f64), p: (f64, f64)) -> Result<Self> {
        if nx < 2 || np < 2 || !(x.0 < x.1) || !(p.0 < p.1) {
            return Err(Error::InvalidArgument(format!("bad phase grid {nx}x{np} on {x:?} x {p:?}")));
        }
        Ok(Self { nx, np, x_min: x.0, x_max: x.1, p_min: p.0, p_max: p.1 })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn p(&self, k: usize) -> f64 {
        self.p_min + (k as f64 + 0.5) * self.dp()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell containing `(x, p)`, if any.
    pub fn locate(&self, x: f64, p: f64) -> Option<(usize, usize)> {
        let i = ((x - self.x_min) / self.dx()).floor();
        let k = ((p - self.p_min) / self.dp()).floor();
        if i < 0.0 || k < 0.0 || i >= self.nx as f64 || k >= self.np as f64 {
            return None;
        }
        Some((i as usize, k as usize))
    }

    /// The same box with `factor` times fewer cells per axis.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.nx % factor != 0 || self.np % factor != 0 {
            return Err(Error::InvalidArgument(format!("cannot coarsen {}x{} by {factor}", self.nx, self.np)));
        }
        Ok(Self { nx: self.nx / factor, np: self.np / factor, ..*self })
    }

    /// The same box with `factor` times more cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self { nx: self.nx * factor, np: self.np * factor, ..*self }
    }
}

/// A density on a [`PhaseGrid`], stored with `p` fastest: `values[i * np + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseField {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl PhaseField {
    pub fn zeros(grid: PhaseGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: PhaseGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nx {
            let x = grid.x(i);
            for k in 0..grid.np {
                values.push(f(x, grid.p(k)));
            }
        }
        Self { grid, values, time: 0.0 }
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.grid.np + k]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `int f g dx dp`.
    pub fn integrate_with(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.grid.nx {
            let x = self.grid.x(i);
            for k in 0..self.grid.np {
                s += self.at(i, k) * g(x, self.grid.p(k));
            }
        }
        s * self.grid.cell_area()
    }

    /// Position marginal `int f dp` at each `x_i`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = self.grid.dp();
        self.values.chunks(self.grid.np).map(|row| row.iter().sum::<f64>() * dp).collect()
    }

    /// Mass in the outer `frac` of each axis.
    pub fn edge_mass(&self, frac: f64) -> f64 {
        let wx = ((self.grid.nx as f64 * frac).ceil() as usize).max(1);
        let wp = ((self.grid.np as f64 * frac).ceil() as usize).max(1);
        let mut s = 0.0;
        for i in 0..self.grid.nx {
            for k in 0..self.grid.np {
                if i < wx || i >= self.grid.nx - wx || k < wp || k >= self.grid.np - wp {
                    s += self.at(i, k).abs();
                }
            }
        }
        s * self.grid.cell_area()
    }

    /// Block averages over `factor x factor` cells.
    pub fn coarse_grain(&self, factor: usize) -> Result<Self> {
        let g = self.grid.coarsened(factor)?;
        let mut out = Self::zeros(g);
        out.time = self.time;
        let w = 1.0 / (factor * factor) as f64;
        for i in 0..self.grid.nx {
            for k in 0..self.grid.np {
                out.values[(i / factor) * g.np + k / factor] += self.at(i, k) * w;
            }
        }
        Ok(out)
    }
}

/// `sum |f1 - f2| * cell area`.
pub fn l1_distance(f1: &PhaseField, f2: &PhaseField) -> Result<f64> {
    if f1.grid != f2.grid {
        return Err(Error::GridMismatch);
    }
    Ok(f1.values.iter().zip(&f2.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * f1.grid.cell_area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn gauss(mx: f64, s: f64) -> impl Fn(f64, f64) -> f64 {
        move |x, p| (-(x - mx).powi(2) / (2.0 * s * s) - p * p / 2.0).exp() / (2.0 * PI * s)
    }

    #[test]
    fn l1_examples() {
        let g = PhaseGrid::new(200, 200, (-8.0, 8.0), (-8.0, 8.0)).unwrap();
        let f = PhaseField::from_fn(g, gauss(0.0, 1.0));
        assert_eq!(l1_distance(&f, &f).unwrap(), 0.0);
        assert_relative_eq!(f.mass(), 1.0, epsilon = 1e-9);

        let left = PhaseField::from_fn(g, |x, _| if x < 0.0 { 1.0 / 128.0 } else { 0.0 });
        let right = PhaseField::from_fn(g, |x, _| if x > 0.0 { 1.0 / 128.0 } else { 0.0 });
        assert_relative_eq!(l1_distance(&left, &right).unwrap(), 2.0, epsilon = 1e-12);

        let delta = 0.01;
        let shifted = PhaseField::from_fn(g, gauss(delta, 1.0));
        let d = l1_distance(&f, &shifted).unwrap();
        assert_relative_eq!(d, (2.0 / PI).sqrt() * delta, max_relative = 1e-3);

        let other = PhaseGrid::new(100, 200, (-8.0, 8.0), (-8.0, 8.0)).unwrap();
        assert!(l1_distance(&f, &PhaseField::zeros(other)).is_err());
    }

    #[test]
    fn indicator_bound() {
        // |int Q (f1 - f2)| <= ||f1 - f2||_1 for indicator functions Q.
        let g = PhaseGrid::new(64, 64, (-6.0, 6.0), (-6.0, 6.0)).unwrap();
        let a = PhaseField::from_fn(g, gauss(0.0, 1.0));
        let b = PhaseField::from_fn(g, gauss(0.7, 1.3));
        let d = l1_distance(&a, &b).unwrap();
        for (x0, x1, p0, p1) in [(-1.0, 0.5, -2.0, 2.0), (0.0, 6.0, -6.0, 6.0), (-3.0, 3.0, 0.0, 1.0)] {
            let q = |x: f64, p: f64| if x >= x0 && x < x1 && p >= p0 && p < p1 { 1.0 } else { 0.0 };
            assert!((a.integrate_with(q) - b.integrate_with(q)).abs() <= d + 1e-15);
        }
    }

    #[test]
    fn coarse_grain_preserves_mass() {
        let g = PhaseGrid::new(64, 32, (-6.0, 6.0), (-5.0, 5.0)).unwrap();
        let f = PhaseField::from_fn(g, gauss(0.3, 0.8));
        let c = f.coarse_grain(4).unwrap();
        assert_eq!((c.grid.nx, c.grid.np), (16, 8));
        assert_relative_eq!(c.mass(), f.mass(), epsilon = 1e-12);
        assert!(f.coarse_grain(3).is_err());
        assert_eq!(g.locate(-6.0, -5.0), Some((0, 0)));
        assert_eq!(g.locate(6.0, 0.0), None);
    }
}
