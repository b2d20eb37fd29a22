//! Unit system: meV for energy, nm for length, ps for time.

/// Reduced Planck constant.
pub const HBAR: f64 = 0.6582119569; // meV ps

/// ħ²/(2 m_e) for the bare electron mass.
pub const HBAR2_OVER_2ME: f64 = 38.0998; // meV nm^2

/// Conversion factor between the energy units used at API boundaries.
pub const UEV_PER_MEV: f64 = 1000.0;

/// Planck constant h = 2πħ, used for Rabi periods.
pub const PLANCK_H: f64 = 2.0 * std::f64::consts::PI * HBAR; // meV ps

/// Effective-mass unit system for the conduction-band electron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    /// Reduced Planck constant. // meV ps
    pub hbar: f64,
    /// m*/m_e, dimensionless.
    pub effective_mass_ratio: f64,
    /// ħ²/(2 m*) — the prefactor of the discrete Laplacian. // meV nm^2
    pub kinetic_prefactor: f64,
}

impl UnitSystem {
    /// Build a unit system for a given effective-mass ratio m*/m_e.
    pub fn new(effective_mass_ratio: f64) -> Self {
        assert!(
            effective_mass_ratio > 0.0 && effective_mass_ratio.is_finite(),
            "effective mass ratio must be positive"
        );
        UnitSystem {
            hbar: HBAR,
            effective_mass_ratio,
            kinetic_prefactor: HBAR2_OVER_2ME / effective_mass_ratio,
        }
    }

    /// GaAs conduction-band electron, m*/m_e = 0.067.
    pub fn gaas() -> Self {
        UnitSystem::new(0.067)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem::gaas()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaas_kinetic_prefactor() {
        let u = UnitSystem::gaas();
        // 38.0998 / 0.067 = 568.65...
        assert!((u.kinetic_prefactor - 568.654).abs() < 0.01);
        assert_eq!(u.hbar, HBAR);
    }

    #[test]
    #[should_panic]
    fn rejects_nonpositive_mass() {
        UnitSystem::new(0.0);
    }
}
