//! Embedded reference data for the lid-driven cavity benchmark.
//!
//! Provenance: centerline velocity profiles and vortex data from Ghia,
//! Ghia & Shin, "High-Re solutions for incompressible flow using the
//! Navier-Stokes equations and a multigrid method", J. Comput. Phys. 48
//! (1982) 387-411, Tables I-III (129x129 grid). Values transcribed for
//! Re = 100 and Re = 1000 profiles and for Re = 1000 / Re = 3200 vortex
//! extrema. Profile comparisons are qualitative (max-deviation checks),
//! not digit-matched.

/// u_x along the vertical centerline x = 0.5: (y, u_x).
pub const GHIA_U_RE100: [(f64, f64); 17] = [
    (0.0000, 0.00000),
    (0.0547, -0.03717),
    (0.0625, -0.04192),
    (0.0703, -0.04775),
    (0.1016, -0.06434),
    (0.1719, -0.10150),
    (0.2813, -0.15662),
    (0.4531, -0.21090),
    (0.5000, -0.20581),
    (0.6172, -0.13641),
    (0.7344, 0.00332),
    (0.8516, 0.23151),
    (0.9531, 0.68717),
    (0.9609, 0.73722),
    (0.9688, 0.78871),
    (0.9766, 0.84123),
    (1.0000, 1.00000),
];

/// u_y along the horizontal centerline y = 0.5: (x, u_y).
pub const GHIA_V_RE100: [(f64, f64); 17] = [
    (0.0000, 0.00000),
    (0.0625, 0.09233),
    (0.0703, 0.10091),
    (0.0781, 0.10890),
    (0.0938, 0.12317),
    (0.1563, 0.16077),
    (0.2266, 0.17507),
    (0.2344, 0.17527),
    (0.5000, 0.05454),
    (0.8047, -0.24533),
    (0.8594, -0.22445),
    (0.9063, -0.16914),
    (0.9453, -0.10313),
    (0.9531, -0.08864),
    (0.9609, -0.07391),
    (0.9688, -0.05906),
    (1.0000, 0.00000),
];

pub const GHIA_U_RE1000: [(f64, f64); 17] = [
    (0.0000, 0.00000),
    (0.0547, -0.18109),
    (0.0625, -0.20196),
    (0.0703, -0.22220),
    (0.1016, -0.29730),
    (0.1719, -0.38289),
    (0.2813, -0.27805),
    (0.4531, -0.10648),
    (0.5000, -0.06080),
    (0.6172, 0.05702),
    (0.7344, 0.18719),
    (0.8516, 0.33304),
    (0.9531, 0.46604),
    (0.9609, 0.51117),
    (0.9688, 0.57492),
    (0.9766, 0.65928),
    (1.0000, 1.00000),
];

pub const GHIA_V_RE1000: [(f64, f64); 17] = [
    (0.0000, 0.00000),
    (0.0625, 0.27485),
    (0.0703, 0.29012),
    (0.0781, 0.30353),
    (0.0938, 0.32627),
    (0.1563, 0.37095),
    (0.2266, 0.33075),
    (0.2344, 0.32235),
    (0.5000, 0.02526),
    (0.8047, -0.31966),
    (0.8594, -0.42665),
    (0.9063, -0.51550),
    (0.9453, -0.39188),
    (0.9531, -0.33714),
    (0.9609, -0.27669),
    (0.9688, -0.21388),
    (1.0000, 0.00000),
];

/// A reference vortex: (label, psi, x, y).
pub type VortexRef = (&'static str, f64, f64, f64);

pub const GHIA_VORTICES_RE1000: [VortexRef; 4] = [
    ("primary", -0.117929, 0.5313, 0.5625),
    ("first_bl", 2.31129e-4, 0.0859, 0.0781),
    ("first_br", 1.75102e-3, 0.8594, 0.1094),
    ("second_br", -9.31929e-8, 0.9922, 0.0078),
];

pub const GHIA_VORTICES_RE3200: [VortexRef; 6] = [
    ("primary", -0.120377, 0.5165, 0.5469),
    ("first_t", 7.27682e-4, 0.0547, 0.8984),
    ("first_bl", 9.7823e-4, 0.0859, 0.1094),
    ("first_br", 3.13955e-3, 0.8125, 0.0859),
    ("second_bl", -6.33001e-8, 0.0078, 0.0078),
    ("second_br", -2.51648e-7, 0.9844, 0.0078),
];

pub fn profiles_for(re: f64) -> Option<(&'static [(f64, f64)], &'static [(f64, f64)])> {
    if re == 100.0 {
        Some((&GHIA_U_RE100, &GHIA_V_RE100))
    } else if re == 1000.0 {
        Some((&GHIA_U_RE1000, &GHIA_V_RE1000))
    } else {
        None
    }
}

pub fn vortices_for(re: f64) -> Option<&'static [VortexRef]> {
    if re == 1000.0 {
        Some(&GHIA_VORTICES_RE1000)
    } else if re == 3200.0 {
        Some(&GHIA_VORTICES_RE3200)
    } else {
        None
    }
}
