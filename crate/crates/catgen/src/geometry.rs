//! Lattice algebra and minimum-image geometry on periodic cells.
//!
//! Convention: lattice vector a lies along Cartesian x and b lies in the
//! x-y plane. Minimum-image searches cover the 27 offsets in {-1,0,1}^3,
//! which suffices for slab-like cells; pathological aspect ratios where a
//! farther image would win are out of contract.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements;
use crate::structio::Structure;

/// Conversion factor from amu/A^3 to g/cm^3.
pub const AMU_PER_A3: f64 = 1.66053907;

/// Gram determinants at or below this count as a collapsed cell.
pub const GRAM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("degenerate cell: gram determinant {gram:.3e} <= 1e-12")]
    DegenerateCell { gram: f64 },
    #[error("lattice parameter {name}={value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("structure has no sites")]
    EmptyStructure,
    #[error("unknown element {0:?}")]
    UnknownElement(String),
}

/// Cell lengths in Angstrom and angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Lattice {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self, GeomError> {
        let lat = Lattice { a, b, c, alpha, beta, gamma };
        lat.validate()?;
        Ok(lat)
    }

    /// Checks the field ranges and the Gram determinant.
    pub fn validate(&self) -> Result<(), GeomError> {
        let lengths = [("a", self.a), ("b", self.b), ("c", self.c)];
        for (name, v) in lengths {
            if !v.is_finite() || v <= 0.0 {
                return Err(GeomError::BadParameter { name, value: v });
            }
        }
        let angles = [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)];
        for (name, v) in angles {
            if !v.is_finite() || v <= 0.0 || v >= 180.0 {
                return Err(GeomError::BadParameter { name, value: v });
            }
        }
        let gram = self.gram();
        if gram <= GRAM_EPS {
            return Err(GeomError::DegenerateCell { gram });
        }
        Ok(())
    }

    /// 1 - cos^2(alpha) - cos^2(beta) - cos^2(gamma) + 2 cos(alpha) cos(beta) cos(gamma).
    pub fn gram(&self) -> f64 {
        let ca = self.alpha.to_radians().cos();
        let cb = self.beta.to_radians().cos();
        let cg = self.gamma.to_radians().cos();
        1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg
    }

    pub fn lengths(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn angles(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }
}

/// Fractional coordinate, wrapped into [0, 1) on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct FracCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl FracCoord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        FracCoord { x: wrap01(x), y: wrap01(y), z: wrap01(z) }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for FracCoord {
    fn from(v: [f64; 3]) -> Self {
        FracCoord::new(v[0], v[1], v[2])
    }
}

impl From<FracCoord> for [f64; 3] {
    fn from(f: FracCoord) -> Self {
        f.as_array()
    }
}

/// Wraps a finite value into [0, 1).
pub fn wrap01(v: f64) -> f64 {
    let w = v.rem_euclid(1.0);
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Lattice vectors precomputed for repeated geometry queries.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Rows are the lattice vectors a, b, c in Angstrom.
    pub m: [[f64; 3]; 3],
    pub volume: f64,
}

impl Cell {
    pub fn new(lat: &Lattice) -> Result<Self, GeomError> {
        lat.validate()?;
        let gram = lat.gram();
        let sq = gram.sqrt();
        let (ca, cb) = (lat.alpha.to_radians().cos(), lat.beta.to_radians().cos());
        let (cg, sg) = (lat.gamma.to_radians().cos(), lat.gamma.to_radians().sin());
        let m = [
            [lat.a, 0.0, 0.0],
            [lat.b * cg, lat.b * sg, 0.0],
            [lat.c * cb, lat.c * (ca - cb * cg) / sg, lat.c * sq / sg],
        ];
        Ok(Cell { m, volume: lat.a * lat.b * lat.c * sq })
    }

    pub fn to_cart(&self, f: &FracCoord) -> [f64; 3] {
        let m = &self.m;
        [
            f.x * m[0][0] + f.y * m[1][0] + f.z * m[2][0],
            f.x * m[0][1] + f.y * m[1][1] + f.z * m[2][1],
            f.x * m[0][2] + f.y * m[1][2] + f.z * m[2][2],
        ]
    }

    /// Inverts to_cart by back-substitution (the matrix is triangular) and wraps.
    pub fn cart_to_frac(&self, p: [f64; 3]) -> FracCoord {
        let m = &self.m;
        let z = p[2] / m[2][2];
        let y = (p[1] - z * m[2][1]) / m[1][1];
        let x = (p[0] - y * m[1][0] - z * m[2][0]) / m[0][0];
        FracCoord::new(x, y, z)
    }

    /// Minimum Cartesian distance over the 27 image offsets in {-1,0,1}^3.
    pub fn min_image_distance(&self, p: &FracCoord, q: &FracCoord) -> f64 {
        let d = [q.x - p.x, q.y - p.y, q.z - p.z];
        let m = &self.m;
        let mut best = f64::INFINITY;
        for nx in -1i32..=1 {
            for ny in -1i32..=1 {
                for nz in -1i32..=1 {
                    let fx = d[0] + nx as f64;
                    let fy = d[1] + ny as f64;
                    let fz = d[2] + nz as f64;
                    let vx = fx * m[0][0] + fy * m[1][0] + fz * m[2][0];
                    let vy = fx * m[0][1] + fy * m[1][1] + fz * m[2][1];
                    let vz = fx * m[0][2] + fy * m[1][2] + fz * m[2][2];
                    let n2 = vx * vx + vy * vy + vz * vz;
                    if n2 < best {
                        best = n2;
                    }
                }
            }
        }
        best.sqrt()
    }
}

/// Rows are the lattice vectors in Angstrom.
pub fn cell_matrix(lat: &Lattice) -> Result<[[f64; 3]; 3], GeomError> {
    Ok(Cell::new(lat)?.m)
}

pub fn cell_volume(lat: &Lattice) -> Result<f64, GeomError> {
    Ok(Cell::new(lat)?.volume)
}

pub fn min_image_distance(lat: &Lattice, p: &FracCoord, q: &FracCoord) -> Result<f64, GeomError> {
    Ok(Cell::new(lat)?.min_image_distance(p, q))
}

/// Mass density in g/cm^3: sum of atomic masses (amu) times 1.66053907
/// over the cell volume in A^3.
pub fn density(s: &Structure) -> Result<f64, GeomError> {
    if s.sites.is_empty() {
        return Err(GeomError::EmptyStructure);
    }
    let mut mass = 0.0;
    for site in &s.sites {
        let rec = elements::element_properties(&site.element)
            .map_err(|e| GeomError::UnknownElement(e.0))?;
        mass += rec.mass;
    }
    Ok(mass * AMU_PER_A3 / cell_volume(&s.lattice)?)
}
