//! Closed contours in the λ-plane and argument-principle winding numbers
//! with adaptive refinement.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ContourShape {
    Circle {
        center: Complex64,
        radius: f64,
    },
    /// Closed polygon through the vertices (last joins first), positively oriented.
    Polygon(Vec<Complex64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralContour {
    pub shape: ContourShape,
    /// Initial number of samples.
    pub n: usize,
    /// Refinement cap.
    pub max_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContourSample {
    pub s: f64,
    pub lambda: Complex64,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Winding {
    pub winding: i32,
    /// Net phase change divided by 2π before rounding.
    pub raw: f64,
    pub samples: Vec<ContourSample>,
}

impl SpectralContour {
    pub fn circle(center: Complex64, radius: f64, n: usize) -> Self {
        Self { shape: ContourShape::Circle { center, radius }, n, max_samples: 4096 }
    }

    pub fn polygon(vertices: Vec<Complex64>, n: usize) -> Self {
        Self { shape: ContourShape::Polygon(vertices), n, max_samples: 4096 }
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rectangle(lo: Complex64, hi: Complex64, n: usize) -> Self {
        Self::polygon(vec![lo, Complex64::new(hi.re, lo.im), hi, Complex64::new(lo.re, hi.im)], n)
    }

    /// Point at parameter `s ∈ [0, 1)`.
    pub fn point(&self, s: f64) -> Complex64 {
        let s = s.rem_euclid(1.0);
        match &self.shape {
            ContourShape::Circle { center, radius } => center + Complex64::from_polar(*radius, 2.0 * PI * s),
            ContourShape::Polygon(v) => {
                let lens: Vec<f64> = (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).norm()).collect();
                let total: f64 = lens.iter().sum();
                let mut d = s * total;
                for (i, l) in lens.iter().enumerate() {
                    if d <= *l || i == v.len() - 1 {
                        let a = v[i];
                        let b = v[(i + 1) % v.len()];
                        return a + (b - a) * (d / l).min(1.0);
                    }
                    d -= l;
                }
                v[0]
            }
        }
    }

    /// Winding number of `f` around 0 along the contour (zeros minus poles
    /// inside). Samples are refined until every phase step is below π/2 and
    /// the total is within 0.2 of an integer.
    pub fn winding<F>(&self, f: F) -> Result<Winding>
    where
        F: Fn(Complex64) -> Result<Complex64> + Sync,
    {
        let eval = |s: f64| -> Result<ContourSample> {
            let lambda = self.point(s);
            let value = f(lambda)?;
            if !value.is_finite() || value.norm() == 0.0 {
                return Err(Error::ContourRefinement);
            }
            Ok(ContourSample { s, lambda, value })
        };
        let n0 = self.n.max(8);
        let mut samples: Vec<ContourSample> =
            (0..n0).into_par_iter().map(|i| eval(i as f64 / n0 as f64)).collect::<Result<_>>()?;
        loop {
            let m = samples.len();
            let steps: Vec<f64> = (0..m).map(|i| (samples[(i + 1) % m].value / samples[i].value).arg()).collect();
            let coarse: Vec<usize> = (0..m).filter(|&i| steps[i].abs() >= PI / 2.0).collect();
            let raw = steps.iter().sum::<f64>() / (2.0 * PI);
            let near_int = (raw - raw.round()).abs() <= 0.2;
            if coarse.is_empty() && near_int {
                return Ok(Winding { winding: raw.round() as i32, raw, samples });
            }
            let refine: Vec<usize> = if coarse.is_empty() { (0..m).collect() } else { coarse };
            if m + refine.len() > self.max_samples {
                return Err(Error::ContourRefinement);
            }
            let mids: Vec<f64> = refine
                .iter()
                .map(|&i| {
                    let a = samples[i].s;
                    let b = if i + 1 == m { 1.0 } else { samples[i + 1].s };
                    0.5 * (a + b)
                })
                .collect();
            let new: Vec<ContourSample> = mids.into_par_iter().map(eval).collect::<Result<_>>()?;
            samples.extend(new);
            samples.sort_by(|a, b| a.s.total_cmp(&b.s));
        }
    }
}
