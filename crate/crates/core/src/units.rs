//! Unit conversions. Everything inside the library is in atomic units.

/// Atomic units of time per picosecond.
pub const AU_PER_PS: f64 = 41341.373;

/// Wavenumbers (cm⁻¹) per hartree.
pub const CM_PER_HARTREE: f64 = 219474.6313702;

/// Electron masses per unified atomic mass unit.
pub const ME_PER_AMU: f64 = 1822.888486;

pub fn ps_to_au(t_ps: f64) -> f64 {
    t_ps * AU_PER_PS
}

pub fn au_to_ps(t: f64) -> f64 {
    t / AU_PER_PS
}

pub fn cm_to_hartree(wn: f64) -> f64 {
    wn / CM_PER_HARTREE
}

pub fn hartree_to_cm(e: f64) -> f64 {
    e * CM_PER_HARTREE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        assert!((au_to_ps(ps_to_au(5.4)) - 5.4).abs() < 1e-14);
        assert!((hartree_to_cm(cm_to_hartree(11130.0)) - 11130.0).abs() < 1e-9);
        assert!((ps_to_au(8.0) - 330730.984).abs() < 1e-6);
    }
}
