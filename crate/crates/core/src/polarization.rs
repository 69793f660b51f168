//! Jones calculus for the QWP/HWP stack and projection of the resulting
//! polarization onto the spherical basis of the ion.
//!
//! Two independent routes produce a [`SphericalPolarization`]:
//!
//! * the matrix pipeline: [`apply_waveplates`] → [`embed_lab`] →
//!   [`spherical_components`] in the frame of [`ion_frame_basis`];
//! * the closed form [`polarization_closed_form`].
//!
//! They agree to rounding, including the global phase.
//!
//! Conventions. The beam propagates along x̂ with horizontal polarization on
//! ŷ and vertical on ẑ. Spherical components are the covariant projections
//! ε_q = ê_q · ε with ê_± = (x̂′ ± iŷ′)/√2 and ê_π = ẑ′, so the vector is
//! rebuilt as ε = Σ_q ε_q ê_q* (see [`SphericalPolarization::reconstruct`]).
//! With this convention circular light (x̂ + iŷ)/√2 in an unrotated frame has
//! all of its weight in ε₋.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

use nalgebra::{Matrix2, Vector2, Vector3};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A 2×2 Jones transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix(pub Matrix2<Complex64>);

impl JonesMatrix {
    pub fn apply(&self, v: &JonesVector) -> JonesVector {
        let out = self.0 * Vector2::new(v.e_h, v.e_v);
        JonesVector {
            e_h: out[0],
            e_v: out[1],
        }
    }

    pub fn then(&self, next: &JonesMatrix) -> JonesMatrix {
        JonesMatrix(next.0 * self.0)
    }

    /// Largest entry of |M†M − 1|.
    pub fn unitarity_error(&self) -> f64 {
        let m = self.0.adjoint() * self.0 - Matrix2::identity();
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Distance from being proportional to the identity, after removing the
    /// global phase.
    pub fn distance_from_identity_up_to_phase(&self) -> f64 {
        let m = &self.0;
        let phase = m[(0, 0)] / m[(0, 0)].norm();
        let scaled = m.map(|z| z / phase);
        (scaled - Matrix2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Horizontal/vertical complex field amplitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesVector {
    pub e_h: Complex64,
    pub e_v: Complex64,
}

impl JonesVector {
    pub const HORIZONTAL: JonesVector = JonesVector {
        e_h: Complex64::new(1.0, 0.0),
        e_v: Complex64::new(0.0, 0.0),
    };

    pub fn norm(&self) -> f64 {
        (self.e_h.norm_sqr() + self.e_v.norm_sqr()).sqrt()
    }
}

/// Quarter-wave plate with its fast axis at `phi` from horizontal.
pub fn qwp_matrix(phi: f64) -> JonesMatrix {
    let (s, c) = phi.sin_cos();
    let off = (re(1.0) - I) * (s * c);
    let m = Matrix2::new(re(c * c) + I * (s * s), off, off, re(s * s) + I * (c * c));
    JonesMatrix(m * Complex64::from_polar(1.0, -FRAC_PI_4))
}

/// Half-wave plate with its fast axis at `theta` from horizontal.
pub fn hwp_matrix(theta: f64) -> JonesMatrix {
    let (s, c) = theta.sin_cos();
    let m = Matrix2::new(
        re(c * c - s * s),
        re(2.0 * c * s),
        re(2.0 * c * s),
        re(s * s - c * c),
    );
    JonesMatrix(m * Complex64::from_polar(1.0, -FRAC_PI_2))
}

/// Horizontal input through a QWP at `phi`, then a HWP at `theta`.
pub fn apply_waveplates(phi: f64, theta: f64) -> JonesVector {
    qwp_matrix(phi)
        .then(&hwp_matrix(theta))
        .apply(&JonesVector::HORIZONTAL)
}

/// Polarization as a complex 3-vector in lab coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabPolarization(pub Vector3<Complex64>);

impl LabPolarization {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Embed a transverse Jones vector for a beam travelling along x̂.
pub fn embed_lab(j: &JonesVector) -> LabPolarization {
    LabPolarization(Vector3::new(re(0.0), j.e_h, j.e_v))
}

/// Orthonormal frame whose ẑ′ axis lies along the magnetic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IonFrameBasis {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
}

impl IonFrameBasis {
    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let v = [self.x, self.y, self.z];
        let mut worst: f64 = 0.0;
        for (i, a) in v.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((a.dot(b) - target).abs());
            }
        }
        worst
    }
}

/// Frame for a field at polar angle `alpha`, azimuth `beta`.
pub fn ion_frame_basis(alpha: f64, beta: f64) -> IonFrameBasis {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    IonFrameBasis {
        x: Vector3::new(ca * cb, ca * sb, -sa),
        y: Vector3::new(-sb, cb, 0.0),
        z: Vector3::new(sa * cb, sa * sb, ca),
    }
}

/// Components (ε₋, ε_π, ε₊) of a polarization in the ion frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalPolarization {
    pub minus: Complex64,
    pub pi: Complex64,
    pub plus: Complex64,
}

impl SphericalPolarization {
    pub fn norm(&self) -> f64 {
        (self.minus.norm_sqr() + self.pi.norm_sqr() + self.plus.norm_sqr()).sqrt()
    }

    pub fn as_array(&self) -> [Complex64; 3] {
        [self.minus, self.pi, self.plus]
    }

    /// Rebuild the lab vector: ε = ε₋ ê₋* + ε_π ê_π + ε₊ ê₊*.
    pub fn reconstruct(&self, basis: &IonFrameBasis) -> LabPolarization {
        let x = basis.x.map(re);
        let y = basis.y.map(re);
        let z = basis.z.map(re);
        let e_plus = (x + y * I) * re(FRAC_1_SQRT_2);
        let e_minus = (x - y * I) * re(FRAC_1_SQRT_2);
        let v = e_minus.map(|c| c.conj()) * self.minus
            + z * self.pi
            + e_plus.map(|c| c.conj()) * self.plus;
        LabPolarization(v)
    }

    /// Componentwise distance to `other` after removing the single global
    /// phase that best aligns them.
    pub fn distance_up_to_phase(&self, other: &SphericalPolarization) -> f64 {
        max_deviation_up_to_phase(&self.as_array(), &other.as_array())
    }
}

/// max_i |a_i − e^{iχ} b_i| with χ chosen to align the two vectors.
pub fn max_deviation_up_to_phase(a: &[Complex64], b: &[Complex64]) -> f64 {
    let overlap: Complex64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        re(1.0)
    };
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

fn dot(axis: &Vector3<f64>, v: &Vector3<Complex64>) -> Complex64 {
    axis.iter().zip(v.iter()).map(|(a, z)| z * *a).sum()
}

/// Project a lab polarization onto the spherical basis of `basis`.
pub fn spherical_components(lab: &LabPolarization, basis: &IonFrameBasis) -> SphericalPolarization {
    let ex = dot(&basis.x, &lab.0);
    let ey = dot(&basis.y, &lab.0);
    let ez = dot(&basis.z, &lab.0);
    SphericalPolarization {
        minus: (ex - I * ey) * FRAC_1_SQRT_2,
        pi: ez,
        plus: (ex + I * ey) * FRAC_1_SQRT_2,
    }
}

/// Full matrix route from waveplate and field angles to ion-frame components.
pub fn polarization_pipeline(alpha: f64, beta: f64, theta: f64, phi: f64) -> SphericalPolarization {
    let lab = embed_lab(&apply_waveplates(phi, theta));
    spherical_components(&lab, &ion_frame_basis(alpha, beta))
}

/// Closed-form ion-frame components for a horizontally polarized input
/// beam after a QWP at `phi` and a HWP at `theta`, with the field at polar
/// angle `alpha` and azimuth `beta`.
pub fn polarization_closed_form(
    alpha: f64,
    beta: f64,
    theta: f64,
    phi: f64,
) -> SphericalPolarization {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (s2t, c2t) = (2.0 * theta).sin_cos();
    let (sd, cd) = (2.0 * phi - 2.0 * theta).sin_cos();
    // Both terms are shared by all three components.
    let a = Complex64::new(cd, c2t);
    let b = Complex64::new(sd, -s2t);

    let minus = -0.5 * (Complex64::new(ca * sb, -cb) * a + b * sa);
    let pi = -FRAC_1_SQRT_2 * (a * (sa * sb) - b * ca);
    let plus = -0.5 * (Complex64::new(ca * sb, cb) * a + b * sa);
    SphericalPolarization { minus, pi, plus }
}
