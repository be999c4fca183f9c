//! Cantilevered composite beam: closed-form tip deflection and a 1D finite-element proxy.
//!
//! Inputs are in table units (q kN/m, E1/E2 MPa, E3 kPa) and converted to SI
//! before any stiffness is assembled. Deflections are in metres, negative downward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LENGTH: f64 = 50.0;
pub const WIDTH: f64 = 1.0;
pub const H1: f64 = 0.1;
pub const H2: f64 = 0.1;
pub const H3: f64 = 5.0;
pub const HOLE_RADIUS: f64 = 1.5;
pub const HOLE_CENTERS: [f64; 5] = [5.0, 15.0, 25.0, 35.0, 45.0];

pub const Q_TO_SI: f64 = 1e3;
pub const E12_TO_SI: f64 = 1e6;
pub const E3_TO_SI: f64 = 1e3;

/// Sampling ranges in table units.
pub const Q_RANGE: (f64, f64) = (9.0, 11.0);
pub const E1_RANGE: (f64, f64) = (0.9, 1.1);
pub const E2_RANGE: (f64, f64) = (0.9, 1.1);
pub const E3_RANGE: (f64, f64) = (9.0, 11.0);

pub const MIN_ELEMENTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BeamSample {
    pub q: f64,
    pub E1: f64,
    pub E2: f64,
    pub E3: f64,
    pub tip_deflection: f64,
}

impl BeamSample {
    pub fn inputs(&self) -> [f64; 4] {
        [self.q, self.E1, self.E2, self.E3]
    }
}

/// Layer of a layered cross-section: modulus (Pa), bottom coordinate and height (m).
#[derive(Debug, Clone, Copy)]
struct Strip {
    e: f64,
    y0: f64,
    h: f64,
}

/// Transformed-section bending stiffness about the modulus-weighted centroid.
fn section_ei(strips: &[Strip]) -> f64 {
    let ea: f64 = strips.iter().map(|s| s.e * WIDTH * s.h).sum();
    let ybar = strips.iter().map(|s| s.e * WIDTH * s.h * (s.y0 + 0.5 * s.h)).sum::<f64>() / ea;
    strips
        .iter()
        .map(|s| {
            let d = s.y0 + 0.5 * s.h - ybar;
            s.e * (WIDTH * s.h.powi(3) / 12.0 + WIDTH * s.h * d * d)
        })
        .sum()
}

/// Section stiffness with a centred gap of height `gap` cut from the web.
fn section_ei_with_gap(e1: f64, e2: f64, e3: f64, gap: f64) -> f64 {
    let web_mid = H1 + 0.5 * H3;
    let half = 0.5 * gap.clamp(0.0, H3);
    let strips = [
        Strip { e: e1, y0: 0.0, h: H1 },
        Strip { e: e3, y0: H1, h: web_mid - half - H1 },
        Strip { e: e3, y0: web_mid + half, h: H1 + H3 - web_mid - half },
        Strip { e: e2, y0: H1 + H3, h: H2 },
    ];
    section_ei(&strips)
}

fn check_moduli(e1: f64, e2: f64, e3: f64) -> Result<()> {
    if !(e1 > 0.0 && e2 > 0.0 && e3 > 0.0) {
        return Err(Error::input(format!("moduli must be positive, got E1={e1}, E2={e2}, E3={e3}")));
    }
    Ok(())
}

/// Homogenized `EI` of the intact section, inputs in table units.
pub fn beam_ei(e1: f64, e2: f64, e3: f64) -> Result<f64> {
    check_moduli(e1, e2, e3)?;
    Ok(section_ei_with_gap(e1 * E12_TO_SI, e2 * E12_TO_SI, e3 * E3_TO_SI, 0.0))
}

/// Closed-form deflection `u_l(x)` of the intact beam.
pub fn beam_lofi_profile(q: f64, e1: f64, e2: f64, e3: f64, x: f64) -> Result<f64> {
    let ei = beam_ei(e1, e2, e3)?;
    let s = x / LENGTH;
    let q = q * Q_TO_SI;
    Ok(-q * LENGTH.powi(4) / (24.0 * ei) * (s.powi(4) - 4.0 * s.powi(3) + 6.0 * s * s))
}

/// Tip value of [`beam_lofi_profile`], `−qL⁴/(8EI)`.
pub fn beam_lofi_deflection(q: f64, e1: f64, e2: f64, e3: f64) -> Result<f64> {
    beam_lofi_profile(q, e1, e2, e3, LENGTH)
}

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let (p, pm) = if n == 1 { (z, 1.0) } else { (p1, p0) };
            let dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

const QUAD_POINTS: usize = 12;

/// Finite-element proxy for the perforated beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamFe {
    pub n_elems: usize,
    pub holes: bool,
}

impl BeamFe {
    pub fn new(n_elems: usize, holes: bool) -> Result<Self> {
        if n_elems < MIN_ELEMENTS {
            return Err(Error::config(format!("beam mesh needs at least {MIN_ELEMENTS} elements, got {n_elems}")));
        }
        Ok(Self { n_elems, holes })
    }

    /// Tip deflection for inputs in table units.
    pub fn tip_deflection(&self, q: f64, e1: f64, e2: f64, e3: f64) -> Result<f64> {
        check_moduli(e1, e2, e3)?;
        let (e1, e2, e3) = (e1 * E12_TO_SI, e2 * E12_TO_SI, e3 * E3_TO_SI);
        let q = q * Q_TO_SI;
        let ei_at = |x: f64| {
            let gap = if self.holes { hole_chord(x) } else { 0.0 };
            section_ei_with_gap(e1, e2, e3, gap)
        };
        let (gx, gw) = gauss_legendre(QUAD_POINTS);

        let n = self.n_elems;
        let le = LENGTH / n as f64;
        // Consistent nodal loads for a uniform downward load.
        let mut f_w = vec![0.0; n + 1];
        let mut f_t = vec![0.0; n + 1];
        for e in 0..n {
            f_w[e] -= q * le / 2.0;
            f_t[e] -= q * le * le / 12.0;
            f_w[e + 1] -= q * le / 2.0;
            f_t[e + 1] += q * le * le / 12.0;
        }
        // Unknowns per element are the right-node motion relative to the left
        // node's rigid motion. The stiffness is block diagonal in these, and the
        // right-hand side is the shear and moment from loads further out.
        let (mut shear, mut moment) = (0.0, 0.0);
        let mut tip = 0.0;
        for e in (0..n).rev() {
            shear += f_w[e + 1];
            moment += f_t[e + 1];
            let k = element_stiffness(e as f64 * le, le, &ei_at, &gx, &gw);
            let (a, b, d) = (k[2][2], k[2][3], k[3][3]);
            let det = a * d - b * b;
            if !(det > 0.0) {
                return Err(Error::input("element stiffness is not positive definite"));
            }
            let dw = (d * shear - b * moment) / det;
            let dt = (a * moment - b * shear) / det;
            tip += dw + dt * (n - e - 1) as f64 * le;
            moment += le * shear;
        }
        Ok(tip)
    }
}

/// Height of web removed at station `x`: the chord of whichever hole covers it.
pub fn hole_chord(x: f64) -> f64 {
    HOLE_CENTERS
        .iter()
        .map(|&c| {
            let s = x - c;
            let r2 = HOLE_RADIUS * HOLE_RADIUS - s * s;
            if r2 > 0.0 {
                2.0 * r2.sqrt()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Hermite-cubic bending stiffness `∫ EI N_a'' N_b''` over one element.
///
/// The element is split at hole edges. Inside a hole the station is mapped
/// through `x = c + r sin φ`, which removes the square-root behaviour of the
/// chord at the edges.
fn element_stiffness(x0: f64, le: f64, ei_at: &dyn Fn(f64) -> f64, gx: &[f64], gw: &[f64]) -> [[f64; 4]; 4] {
    let x1 = x0 + le;
    let mut cuts = vec![x0, x1];
    for &c in &HOLE_CENTERS {
        for edge in [c - HOLE_RADIUS, c, c + HOLE_RADIUS] {
            if edge > x0 && edge < x1 {
                cuts.push(edge);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);

    let mut k = [[0.0; 4]; 4];
    let mut accumulate = |x: f64, wt: f64| {
        let xi = (x - x0) / le;
        let b = [
            (-6.0 + 12.0 * xi) / (le * le),
            (-4.0 + 6.0 * xi) / le,
            (6.0 - 12.0 * xi) / (le * le),
            (-2.0 + 6.0 * xi) / le,
        ];
        let ei = ei_at(x);
        for i in 0..4 {
            for j in 0..4 {
                k[i][j] += wt * ei * b[i] * b[j];
            }
        }
    };
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let mid = 0.5 * (a + b);
        let hole = HOLE_CENTERS.iter().find(|&&c| (mid - c).abs() < HOLE_RADIUS);
        match hole {
            Some(&c) => {
                let pa = ((a - c) / HOLE_RADIUS).clamp(-1.0, 1.0).asin();
                let pb = ((b - c) / HOLE_RADIUS).clamp(-1.0, 1.0).asin();
                let (half, centre) = (0.5 * (pb - pa), 0.5 * (pa + pb));
                for (t, w) in gx.iter().zip(gw) {
                    let phi = centre + half * t;
                    accumulate(c + HOLE_RADIUS * phi.sin(), w * half * HOLE_RADIUS * phi.cos());
                }
            }
            None => {
                let (half, centre) = (0.5 * (b - a), 0.5 * (a + b));
                for (t, w) in gx.iter().zip(gw) {
                    accumulate(centre + half * t, w * half);
                }
            }
        }
    }
    k
}

/// Tip deflection of the perforated beam on an `n_elems` mesh.
pub fn beam_hifi_proxy(q: f64, e1: f64, e2: f64, e3: f64, n_elems: usize) -> Result<f64> {
    BeamFe::new(n_elems, true)?.tip_deflection(q, e1, e2, e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(QUAD_POINTS);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let i22: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert!((i22 - 2.0 / 23.0).abs() < 1e-14);
    }

    #[test]
    fn chord_profile() {
        assert!((hole_chord(5.0) - 3.0).abs() < 1e-15);
        assert_eq!(hole_chord(10.0), 0.0);
        assert_eq!(hole_chord(6.5), 0.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(beam_lofi_deflection(10.0, 0.0, 1.0, 10.0), Err(Error::Input(_))));
        assert!(matches!(BeamFe::new(49, true), Err(Error::Config(_))));
    }
}
