use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform nearest-neighbour chain whose two terminal sites couple to the
/// left and right reservoirs. Energies and rates are in units of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    /// Number of sites `M`.
    pub sites: usize,
    /// Tunneling energy `J`.
    pub hopping: f64,
    /// On-site energy, also the resonant reservoir level.
    pub eps_s: f64,
    /// Coupling rate of site 1 to the left reservoir.
    pub gamma_l: f64,
    /// Coupling rate of site M to the right reservoir.
    pub gamma_r: f64,
}

impl LatticeConfig {
    pub fn new(sites: usize, hopping: f64, eps_s: f64, gamma_l: f64, gamma_r: f64) -> Result<Self> {
        let cfg = LatticeConfig {
            sites,
            hopping,
            eps_s,
            gamma_l,
            gamma_r,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Equal couplings on both contacts.
    pub fn symmetric(sites: usize, hopping: f64, eps_s: f64, gamma: f64) -> Result<Self> {
        Self::new(sites, hopping, eps_s, gamma, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::config("lattice needs at least one site"));
        }
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return Err(Error::config(format!("hopping must be > 0, got {}", self.hopping)));
        }
        if !self.eps_s.is_finite() {
            return Err(Error::config("on-site energy must be finite"));
        }
        for (name, g) in [("gamma_l", self.gamma_l), ("gamma_r", self.gamma_r)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::config(format!("{name} must be >= 0, got {g}")));
            }
        }
        Ok(())
    }

    /// Mean coupling `(gamma_l + gamma_r) / 2`.
    pub fn gamma_mean(&self) -> f64 {
        0.5 * (self.gamma_l + self.gamma_r)
    }

    /// Transmission factor `4 gL gR J^2 / ((4 J^2 + gL gR)(gL + gR))`.
    ///
    /// The steady current equals this factor times the reservoir bias `dn`.
    /// Zero when both couplings vanish.
    pub fn transmission(&self) -> f64 {
        let (gl, gr) = (self.gamma_l, self.gamma_r);
        let j2 = self.hopping * self.hopping;
        let den = (4.0 * j2 + gl * gr) * (gl + gr);
        if den == 0.0 {
            0.0
        } else {
            4.0 * gl * gr * j2 / den
        }
    }

    /// The same lattice with the roles of the two contacts exchanged.
    pub fn mirrored(&self) -> Self {
        LatticeConfig {
            gamma_l: self.gamma_r,
            gamma_r: self.gamma_l,
            ..*self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(LatticeConfig::new(0, 1.0, 2.0, 0.5, 0.5).is_err());
        assert!(LatticeConfig::new(3, 0.0, 2.0, 0.5, 0.5).is_err());
        assert!(LatticeConfig::new(3, 1.0, 2.0, -0.1, 0.5).is_err());
        assert!(LatticeConfig::new(3, 1.0, f64::NAN, 0.1, 0.5).is_err());
    }

    #[test]
    fn transmission_at_half_coupling() {
        let l = LatticeConfig::symmetric(6, 1.0, 2.0, 0.5).unwrap();
        assert!((l.transmission() - 1.0 / 4.25).abs() < 1e-15);
        let severed = LatticeConfig::new(6, 1.0, 2.0, 0.0, 0.5).unwrap();
        assert_eq!(severed.transmission(), 0.0);
    }
}
