//! Embedded elemental property table.
//!
//! Sources, frozen here for reproducibility:
//! - atomic masses: CIAAW standard atomic weights (conventional values);
//!   elements without a standard weight carry the mass number of the
//!   longest-lived isotope
//! - electronegativity: Pauling scale; 0.0 where no accepted value exists
//! - covalent radii: Cordero et al. (2008); Pyykko single-bond values for
//!   Z > 96
//! - first ionization energies: NIST ASD, eV; 0.0 where unmeasured
//! - group/period: IUPAC 18-column table, lanthanoids and actinoids
//!   assigned group 3
//!
//! `is_adsorbate_species` marks elements that typically appear as adsorbate
//! atoms (H, C, N, O).

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("unknown element {0:?}")]
pub struct UnknownElement(pub String);

#[derive(Debug, Clone, PartialEq)]
pub struct ElementRecord {
    pub symbol: &'static str,
    pub atomic_number: u8,
    /// amu
    pub mass: f64,
    /// Pauling electronegativity, 0.0 if undefined
    pub electronegativity: f64,
    /// Angstrom
    pub covalent_radius: f64,
    pub group: u8,
    pub period: u8,
    /// eV, 0.0 if unmeasured
    pub ionization_ev: f64,
    pub is_adsorbate_species: bool,
}

impl ElementRecord {
    /// The 8 numeric properties used by the composition fingerprint, in a
    /// fixed order; the boolean maps to 0/1.
    pub fn numeric_properties(&self) -> [f64; 8] {
        [
            self.atomic_number as f64,
            self.mass,
            self.electronegativity,
            self.covalent_radius,
            self.group as f64,
            self.period as f64,
            self.ionization_ev,
            if self.is_adsorbate_species { 1.0 } else { 0.0 },
        ]
    }
}

#[allow(clippy::too_many_arguments)]
const fn el(
    symbol: &'static str,
    atomic_number: u8,
    mass: f64,
    electronegativity: f64,
    covalent_radius: f64,
    group: u8,
    period: u8,
    ionization_ev: f64,
    is_adsorbate_species: bool,
) -> ElementRecord {
    ElementRecord {
        symbol,
        atomic_number,
        mass,
        electronegativity,
        covalent_radius,
        group,
        period,
        ionization_ev,
        is_adsorbate_species,
    }
}

pub const N_ELEMENTS: usize = 118;

#[rustfmt::skip]
pub static ELEMENTS: [ElementRecord; N_ELEMENTS] = [
    el("H",    1,   1.008,    2.20, 0.31,  1, 1, 13.598, true),
    el("He",   2,   4.0026,   0.00, 0.28, 18, 1, 24.587, false),
    el("Li",   3,   6.94,     0.98, 1.28,  1, 2,  5.392, false),
    el("Be",   4,   9.0122,   1.57, 0.96,  2, 2,  9.323, false),
    el("B",    5,  10.81,     2.04, 0.84, 13, 2,  8.298, false),
    el("C",    6,  12.011,    2.55, 0.76, 14, 2, 11.260, true),
    el("N",    7,  14.007,    3.04, 0.71, 15, 2, 14.534, true),
    el("O",    8,  15.999,    3.44, 0.66, 16, 2, 13.618, true),
    el("F",    9,  18.998,    3.98, 0.57, 17, 2, 17.423, false),
    el("Ne",  10,  20.180,    0.00, 0.58, 18, 2, 21.565, false),
    el("Na",  11,  22.990,    0.93, 1.66,  1, 3,  5.139, false),
    el("Mg",  12,  24.305,    1.31, 1.41,  2, 3,  7.646, false),
    el("Al",  13,  26.982,    1.61, 1.21, 13, 3,  5.986, false),
    el("Si",  14,  28.085,    1.90, 1.11, 14, 3,  8.152, false),
    el("P",   15,  30.974,    2.19, 1.07, 15, 3, 10.487, false),
    el("S",   16,  32.06,     2.58, 1.05, 16, 3, 10.360, false),
    el("Cl",  17,  35.45,     3.16, 1.02, 17, 3, 12.968, false),
    el("Ar",  18,  39.948,    0.00, 1.06, 18, 3, 15.760, false),
    el("K",   19,  39.098,    0.82, 2.03,  1, 4,  4.341, false),
    el("Ca",  20,  40.078,    1.00, 1.76,  2, 4,  6.113, false),
    el("Sc",  21,  44.956,    1.36, 1.70,  3, 4,  6.561, false),
    el("Ti",  22,  47.867,    1.54, 1.60,  4, 4,  6.828, false),
    el("V",   23,  50.942,    1.63, 1.53,  5, 4,  6.746, false),
    el("Cr",  24,  51.996,    1.66, 1.39,  6, 4,  6.767, false),
    el("Mn",  25,  54.938,    1.55, 1.39,  7, 4,  7.434, false),
    el("Fe",  26,  55.845,    1.83, 1.32,  8, 4,  7.902, false),
    el("Co",  27,  58.933,    1.88, 1.26,  9, 4,  7.881, false),
    el("Ni",  28,  58.693,    1.91, 1.24, 10, 4,  7.640, false),
    el("Cu",  29,  63.546,    1.90, 1.32, 11, 4,  7.726, false),
    el("Zn",  30,  65.38,     1.65, 1.22, 12, 4,  9.394, false),
    el("Ga",  31,  69.723,    1.81, 1.22, 13, 4,  5.999, false),
    el("Ge",  32,  72.630,    2.01, 1.20, 14, 4,  7.899, false),
    el("As",  33,  74.922,    2.18, 1.19, 15, 4,  9.789, false),
    el("Se",  34,  78.971,    2.55, 1.20, 16, 4,  9.752, false),
    el("Br",  35,  79.904,    2.96, 1.20, 17, 4, 11.814, false),
    el("Kr",  36,  83.798,    3.00, 1.16, 18, 4, 14.000, false),
    el("Rb",  37,  85.468,    0.82, 2.20,  1, 5,  4.177, false),
    el("Sr",  38,  87.62,     0.95, 1.95,  2, 5,  5.695, false),
    el("Y",   39,  88.906,    1.22, 1.90,  3, 5,  6.217, false),
    el("Zr",  40,  91.224,    1.33, 1.75,  4, 5,  6.634, false),
    el("Nb",  41,  92.906,    1.60, 1.64,  5, 5,  6.759, false),
    el("Mo",  42,  95.95,     2.16, 1.54,  6, 5,  7.092, false),
    el("Tc",  43,  98.0,      1.90, 1.47,  7, 5,  7.280, false),
    el("Ru",  44, 101.07,     2.20, 1.46,  8, 5,  7.361, false),
    el("Rh",  45, 102.906,    2.28, 1.42,  9, 5,  7.459, false),
    el("Pd",  46, 106.42,     2.20, 1.39, 10, 5,  8.337, false),
    el("Ag",  47, 107.868,    1.93, 1.45, 11, 5,  7.576, false),
    el("Cd",  48, 112.414,    1.69, 1.44, 12, 5,  8.994, false),
    el("In",  49, 114.818,    1.78, 1.42, 13, 5,  5.786, false),
    el("Sn",  50, 118.710,    1.96, 1.39, 14, 5,  7.344, false),
    el("Sb",  51, 121.760,    2.05, 1.39, 15, 5,  8.608, false),
    el("Te",  52, 127.60,     2.10, 1.38, 16, 5,  9.010, false),
    el("I",   53, 126.904,    2.66, 1.39, 17, 5, 10.451, false),
    el("Xe",  54, 131.293,    2.60, 1.40, 18, 5, 12.130, false),
    el("Cs",  55, 132.905,    0.79, 2.44,  1, 6,  3.894, false),
    el("Ba",  56, 137.327,    0.89, 2.15,  2, 6,  5.212, false),
    el("La",  57, 138.905,    1.10, 2.07,  3, 6,  5.577, false),
    el("Ce",  58, 140.116,    1.12, 2.04,  3, 6,  5.539, false),
    el("Pr",  59, 140.908,    1.13, 2.03,  3, 6,  5.473, false),
    el("Nd",  60, 144.242,    1.14, 2.01,  3, 6,  5.525, false),
    el("Pm",  61, 145.0,      1.13, 1.99,  3, 6,  5.582, false),
    el("Sm",  62, 150.36,     1.17, 1.98,  3, 6,  5.644, false),
    el("Eu",  63, 151.964,    1.20, 1.98,  3, 6,  5.670, false),
    el("Gd",  64, 157.25,     1.20, 1.96,  3, 6,  6.150, false),
    el("Tb",  65, 158.925,    1.22, 1.94,  3, 6,  5.864, false),
    el("Dy",  66, 162.500,    1.23, 1.92,  3, 6,  5.939, false),
    el("Ho",  67, 164.930,    1.24, 1.92,  3, 6,  6.022, false),
    el("Er",  68, 167.259,    1.24, 1.89,  3, 6,  6.108, false),
    el("Tm",  69, 168.934,    1.25, 1.90,  3, 6,  6.184, false),
    el("Yb",  70, 173.045,    1.10, 1.87,  3, 6,  6.254, false),
    el("Lu",  71, 174.967,    1.27, 1.87,  3, 6,  5.426, false),
    el("Hf",  72, 178.486,    1.30, 1.75,  4, 6,  6.825, false),
    el("Ta",  73, 180.948,    1.50, 1.70,  5, 6,  7.550, false),
    el("W",   74, 183.84,     2.36, 1.62,  6, 6,  7.864, false),
    el("Re",  75, 186.207,    1.90, 1.51,  7, 6,  7.834, false),
    el("Os",  76, 190.23,     2.20, 1.44,  8, 6,  8.438, false),
    el("Ir",  77, 192.217,    2.20, 1.41,  9, 6,  8.967, false),
    el("Pt",  78, 195.084,    2.28, 1.36, 10, 6,  8.959, false),
    el("Au",  79, 196.967,    2.54, 1.36, 11, 6,  9.226, false),
    el("Hg",  80, 200.592,    2.00, 1.32, 12, 6, 10.438, false),
    el("Tl",  81, 204.38,     1.62, 1.45, 13, 6,  6.108, false),
    el("Pb",  82, 207.2,      2.33, 1.46, 14, 6,  7.417, false),
    el("Bi",  83, 208.980,    2.02, 1.48, 15, 6,  7.286, false),
    el("Po",  84, 209.0,      2.00, 1.40, 16, 6,  8.414, false),
    el("At",  85, 210.0,      2.20, 1.50, 17, 6,  9.318, false),
    el("Rn",  86, 222.0,      0.00, 1.50, 18, 6, 10.749, false),
    el("Fr",  87, 223.0,      0.70, 2.60,  1, 7,  4.073, false),
    el("Ra",  88, 226.0,      0.90, 2.21,  2, 7,  5.278, false),
    el("Ac",  89, 227.0,      1.10, 2.15,  3, 7,  5.380, false),
    el("Th",  90, 232.038,    1.30, 2.06,  3, 7,  6.307, false),
    el("Pa",  91, 231.036,    1.50, 2.00,  3, 7,  5.890, false),
    el("U",   92, 238.029,    1.38, 1.96,  3, 7,  6.194, false),
    el("Np",  93, 237.0,      1.36, 1.90,  3, 7,  6.266, false),
    el("Pu",  94, 244.0,      1.28, 1.87,  3, 7,  6.026, false),
    el("Am",  95, 243.0,      1.30, 1.80,  3, 7,  5.974, false),
    el("Cm",  96, 247.0,      1.30, 1.69,  3, 7,  5.991, false),
    el("Bk",  97, 247.0,      1.30, 1.68,  3, 7,  6.198, false),
    el("Cf",  98, 251.0,      1.30, 1.68,  3, 7,  6.282, false),
    el("Es",  99, 252.0,      1.30, 1.65,  3, 7,  6.368, false),
    el("Fm", 100, 257.0,      1.30, 1.67,  3, 7,  6.500, false),
    el("Md", 101, 258.0,      1.30, 1.73,  3, 7,  6.580, false),
    el("No", 102, 259.0,      1.30, 1.76,  3, 7,  6.626, false),
    el("Lr", 103, 266.0,      0.00, 1.61,  3, 7,  4.960, false),
    el("Rf", 104, 267.0,      0.00, 1.57,  4, 7,  0.000, false),
    el("Db", 105, 268.0,      0.00, 1.49,  5, 7,  0.000, false),
    el("Sg", 106, 269.0,      0.00, 1.43,  6, 7,  0.000, false),
    el("Bh", 107, 270.0,      0.00, 1.41,  7, 7,  0.000, false),
    el("Hs", 108, 269.0,      0.00, 1.34,  8, 7,  0.000, false),
    el("Mt", 109, 278.0,      0.00, 1.29,  9, 7,  0.000, false),
    el("Ds", 110, 281.0,      0.00, 1.28, 10, 7,  0.000, false),
    el("Rg", 111, 282.0,      0.00, 1.21, 11, 7,  0.000, false),
    el("Cn", 112, 285.0,      0.00, 1.22, 12, 7,  0.000, false),
    el("Nh", 113, 286.0,      0.00, 1.36, 13, 7,  0.000, false),
    el("Fl", 114, 289.0,      0.00, 1.43, 14, 7,  0.000, false),
    el("Mc", 115, 290.0,      0.00, 1.62, 15, 7,  0.000, false),
    el("Lv", 116, 293.0,      0.00, 1.75, 16, 7,  0.000, false),
    el("Ts", 117, 294.0,      0.00, 1.65, 17, 7,  0.000, false),
    el("Og", 118, 294.0,      0.00, 1.57, 18, 7,  0.000, false),
];

fn symbol_index() -> &'static HashMap<&'static str, usize> {
    static INDEX: OnceLock<HashMap<&'static str, usize>> = OnceLock::new();
    INDEX.get_or_init(|| {
        ELEMENTS.iter().enumerate().map(|(i, e)| (e.symbol, i)).collect()
    })
}

pub fn element_properties(symbol: &str) -> Result<&'static ElementRecord, UnknownElement> {
    symbol_index()
        .get(symbol)
        .map(|&i| &ELEMENTS[i])
        .ok_or_else(|| UnknownElement(symbol.to_string()))
}

/// Lookup by atomic number, 1-based.
pub fn by_atomic_number(z: u8) -> Option<&'static ElementRecord> {
    if z == 0 || z as usize > N_ELEMENTS {
        return None;
    }
    Some(&ELEMENTS[z as usize - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_consistent() {
        assert_eq!(ELEMENTS.len(), 118);
        for (i, e) in ELEMENTS.iter().enumerate() {
            assert_eq!(e.atomic_number as usize, i + 1, "{}", e.symbol);
            assert!(e.mass > 0.0 && e.mass.is_finite());
            assert!(e.covalent_radius > 0.0);
            assert!((1..=18).contains(&e.group));
            assert!((1..=7).contains(&e.period));
            for p in e.numeric_properties() {
                assert!(p.is_finite());
            }
        }
    }

    #[test]
    fn known_lookups() {
        assert_eq!(element_properties("Pt").unwrap().mass, 195.084);
        assert!(element_properties("O").unwrap().is_adsorbate_species);
        assert!(!element_properties("Au").unwrap().is_adsorbate_species);
        assert_eq!(by_atomic_number(1).unwrap().symbol, "H");
        assert_eq!(by_atomic_number(118).unwrap().symbol, "Og");
        assert!(by_atomic_number(0).is_none());
        assert!(by_atomic_number(119).is_none());
    }

    #[test]
    fn unknown_symbol_errors() {
        assert_eq!(element_properties("Xx"), Err(UnknownElement("Xx".into())));
    }

    #[test]
    fn adsorbate_default_set() {
        let ads: Vec<&str> = ELEMENTS
            .iter()
            .filter(|e| e.is_adsorbate_species)
            .map(|e| e.symbol)
            .collect();
        assert_eq!(ads, ["H", "C", "N", "O"]);
    }
}
