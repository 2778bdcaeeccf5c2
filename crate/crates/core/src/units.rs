//! Internal unit system: lengths in µm, times in µs, forces in zN.
//!
//! Derived units follow from these three: energy is zN·µm (1e-27 J), mass is
//! zN·µs²/µm (1e-27 kg) and action is zN·µm·µs (1e-33 J·s). Everything inside
//! the crate computes in these units; SI only appears at I/O boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant in zN·µm·µs.
pub const HBAR: f64 = 0.105_457_181_7;

/// Reduced Planck constant in J·s (CODATA exact).
pub const HBAR_SI: f64 = 1.054_571_817e-34;

/// ⁸⁷Rb atomic mass in kg.
pub const RB87_MASS_KG: f64 = 1.443_160_6e-25;

/// Optical-lattice wavelength used by the trajectory figure preset (µm).
pub const LATTICE_LAMBDA_UM: f64 = 0.866;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dimension {
    mass: i8,
    length: i8,
    time: i8,
}

const fn dim(mass: i8, length: i8, time: i8) -> Dimension {
    Dimension { mass, length, time }
}

/// Units understood by [`convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Newton,
    ZeptoNewton,
    Meter,
    Micrometer,
    Second,
    Microsecond,
    Kilogram,
    /// zN·µs²/µm
    MassUnit,
    Joule,
    /// zN·µm
    EnergyUnit,
    JouleSecond,
    /// zN·µm·µs
    ActionUnit,
    RadPerSecond,
    RadPerMicrosecond,
}

impl Unit {
    fn name(self) -> &'static str {
        match self {
            Unit::Newton => "N",
            Unit::ZeptoNewton => "zN",
            Unit::Meter => "m",
            Unit::Micrometer => "µm",
            Unit::Second => "s",
            Unit::Microsecond => "µs",
            Unit::Kilogram => "kg",
            Unit::MassUnit => "zN·µs²/µm",
            Unit::Joule => "J",
            Unit::EnergyUnit => "zN·µm",
            Unit::JouleSecond => "J·s",
            Unit::ActionUnit => "zN·µm·µs",
            Unit::RadPerSecond => "rad/s",
            Unit::RadPerMicrosecond => "rad/µs",
        }
    }

    fn dimension(self) -> Dimension {
        match self {
            Unit::Newton | Unit::ZeptoNewton => dim(1, 1, -2),
            Unit::Meter | Unit::Micrometer => dim(0, 1, 0),
            Unit::Second | Unit::Microsecond => dim(0, 0, 1),
            Unit::Kilogram | Unit::MassUnit => dim(1, 0, 0),
            Unit::Joule | Unit::EnergyUnit => dim(1, 2, -2),
            Unit::JouleSecond | Unit::ActionUnit => dim(1, 2, -1),
            Unit::RadPerSecond | Unit::RadPerMicrosecond => dim(0, 0, -1),
        }
    }

    /// Size of one unit expressed in SI.
    fn si_factor(self) -> f64 {
        match self {
            Unit::Newton
            | Unit::Meter
            | Unit::Second
            | Unit::Kilogram
            | Unit::Joule
            | Unit::JouleSecond
            | Unit::RadPerSecond => 1.0,
            Unit::ZeptoNewton => 1e-21,
            Unit::Micrometer => 1e-6,
            Unit::Microsecond => 1e-6,
            Unit::MassUnit => 1e-27,
            Unit::EnergyUnit => 1e-27,
            Unit::ActionUnit => 1e-33,
            Unit::RadPerMicrosecond => 1e6,
        }
    }
}

/// Converts `value` from one unit to another of the same dimension.
pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::DimensionMismatch {
            from: from.name(),
            to: to.name(),
        });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * (from.si_factor() / to.si_factor()))
}

/// Physical parameters of one interferometer run, in internal units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConfig {
    /// Atom mass (zN·µs²/µm).
    pub m: f64,
    /// Trap angular frequency (rad/µs).
    pub omega: f64,
    /// Crossing point of the spin-dependent potentials (µm), constant in time.
    pub x0: f64,
    /// Unknown homogeneous force (zN).
    pub c: f64,
    /// Final time (µs).
    pub t_f: f64,
    /// Initial trap level.
    pub n: u32,
    /// White-noise strength λ²γ (µs).
    pub lambda_sq_gamma: f64,
}

impl Default for PhysicalConfig {
    fn default() -> Self {
        Self {
            m: RB87_MASS_KG / 1e-27,
            omega: 2.0 * std::f64::consts::PI * 10.0,
            x0: 0.0,
            c: 10.0,
            t_f: 0.7,
            n: 0,
            lambda_sq_gamma: 0.0,
        }
    }
}

impl PhysicalConfig {
    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field,
                    reason: format!("must be finite and > 0, got {v}"),
                })
            }
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::InvalidConfig {
                field: "mass_kg",
                reason: format!("must be finite and > 0, got {} kg", self.m * 1e-27),
            });
        }
        positive("omega_rad_per_us", self.omega)?;
        positive("tf_us", self.t_f)?;
        if !self.x0.is_finite() {
            return Err(Error::InvalidConfig {
                field: "x0_um",
                reason: "must be finite".into(),
            });
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidConfig {
                field: "c_zN",
                reason: "must be finite".into(),
            });
        }
        if !(self.lambda_sq_gamma.is_finite() && self.lambda_sq_gamma >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "lambda_sq_gamma_us",
                reason: format!("must be finite and >= 0, got {}", self.lambda_sq_gamma),
            });
        }
        let l = self.oscillator_length();
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidConfig {
                field: "omega_rad_per_us",
                reason: "oscillator length is not finite".into(),
            });
        }
        Ok(())
    }

    /// `sqrt(ħ/(mω))` in µm.
    pub fn oscillator_length(&self) -> f64 {
        (HBAR / (self.m * self.omega)).sqrt()
    }

    /// Trap-minimum offset `c/(mω²)` produced by the measured force.
    pub fn force_offset(&self) -> f64 {
        self.c / (self.m * self.omega * self.omega)
    }

    pub fn with_lambda_sq_gamma(mut self, lambda_sq_gamma: f64) -> Self {
        self.lambda_sq_gamma = lambda_sq_gamma;
        self
    }

    /// Parses the key-value configuration format. Missing keys keep their
    /// defaults; unknown keys are rejected.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical key-value rendering, used for provenance hashing.
    pub fn to_config_string(&self) -> String {
        let file = ConfigFile::from(*self);
        toml::to_string(&file).expect("config serializes")
    }
}

/// On-disk representation with SI mass and explicit unit suffixes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub mass_kg: Option<f64>,
    pub omega_rad_per_us: Option<f64>,
    pub x0_um: Option<f64>,
    #[serde(rename = "c_zN")]
    pub c_zn: Option<f64>,
    pub tf_us: Option<f64>,
    pub n_level: Option<i64>,
    pub lambda_sq_gamma_us: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> Result<PhysicalConfig> {
        let d = PhysicalConfig::default();
        let m = match self.mass_kg {
            Some(kg) => convert(kg, Unit::Kilogram, Unit::MassUnit)?,
            None => d.m,
        };
        let n = match self.n_level {
            Some(n) if n < 0 => {
                return Err(Error::InvalidConfig {
                    field: "n_level",
                    reason: format!("must be >= 0, got {n}"),
                })
            }
            Some(n) => u32::try_from(n).map_err(|_| Error::InvalidConfig {
                field: "n_level",
                reason: "too large".into(),
            })?,
            None => d.n,
        };
        Ok(PhysicalConfig {
            m,
            omega: self.omega_rad_per_us.unwrap_or(d.omega),
            x0: self.x0_um.unwrap_or(d.x0),
            c: self.c_zn.unwrap_or(d.c),
            t_f: self.tf_us.unwrap_or(d.t_f),
            n,
            lambda_sq_gamma: self.lambda_sq_gamma_us.unwrap_or(d.lambda_sq_gamma),
        })
    }
}

impl From<PhysicalConfig> for ConfigFile {
    fn from(c: PhysicalConfig) -> Self {
        Self {
            mass_kg: Some(c.m * 1e-27),
            omega_rad_per_us: Some(c.omega),
            x0_um: Some(c.x0),
            c_zn: Some(c.c),
            tf_us: Some(c.t_f),
            n_level: Some(i64::from(c.n)),
            lambda_sq_gamma_us: Some(c.lambda_sq_gamma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zepto_newton() {
        assert!(rel(convert(1e-21, Unit::Newton, Unit::ZeptoNewton).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn hbar_converts_to_internal_constant() {
        let h = convert(HBAR_SI, Unit::JouleSecond, Unit::ActionUnit).unwrap();
        assert!(rel(h, HBAR) < 1e-15);
        assert!(rel(h, 0.105_457_181_7) < 1e-15);
    }

    #[test]
    fn rubidium_mass() {
        let m = convert(RB87_MASS_KG, Unit::Kilogram, Unit::MassUnit).unwrap();
        assert!(rel(m, 144.31606) < 1e-14);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let err = convert(1.0, Unit::Meter, Unit::Second).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
        assert!(convert(1.0, Unit::Joule, Unit::JouleSecond).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        let c = PhysicalConfig::default();
        c.validate().unwrap();
        assert!(c.oscillator_length() > 0.0);
    }

    #[test]
    fn config_parse_and_errors() {
        let cfg = PhysicalConfig::from_config_str(
            "mass_kg = 1.4431606e-25\nomega_rad_per_us = 10.0\nc_zN = 20\nn_level = 2\n",
        )
        .unwrap();
        assert!(rel(cfg.m, 144.31606) < 1e-14);
        assert_eq!(cfg.c, 20.0);
        assert_eq!(cfg.n, 2);

        let err = PhysicalConfig::from_config_str("mass_kg = -1.0").unwrap_err();
        assert!(err.to_string().contains("mass_kg"), "{err}");
        let err = PhysicalConfig::from_config_str("n_level = -1").unwrap_err();
        assert!(err.to_string().contains("n_level"), "{err}");
        assert!(PhysicalConfig::from_config_str("bogus = 1").is_err());
    }

    #[test]
    fn config_string_round_trips() {
        let cfg = PhysicalConfig {
            lambda_sq_gamma: 3e-8,
            x0: 0.01,
            ..Default::default()
        };
        let back = PhysicalConfig::from_config_str(&cfg.to_config_string()).unwrap();
        assert!(rel(back.m, cfg.m) < 1e-14);
        assert_eq!(back.lambda_sq_gamma, cfg.lambda_sq_gamma);
        assert_eq!(back.x0, cfg.x0);
    }

    const PAIRS: &[(Unit, Unit)] = &[
        (Unit::Newton, Unit::ZeptoNewton),
        (Unit::Meter, Unit::Micrometer),
        (Unit::Second, Unit::Microsecond),
        (Unit::Kilogram, Unit::MassUnit),
        (Unit::Joule, Unit::EnergyUnit),
        (Unit::JouleSecond, Unit::ActionUnit),
        (Unit::RadPerSecond, Unit::RadPerMicrosecond),
    ];

    proptest! {
        #[test]
        fn round_trip_is_identity(v in -1e30f64..1e30, idx in 0usize..7, flip in any::<bool>()) {
            let (a, b) = if flip { (PAIRS[idx].1, PAIRS[idx].0) } else { PAIRS[idx] };
            let back = convert(convert(v, a, b).unwrap(), b, a).unwrap();
            prop_assert!((back - v).abs() <= 1e-12 * v.abs());
        }
    }
}
