use super::GelPadSpec;
use crate::seed;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Static description of a contact plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSpec {
    /// Width the object presents to the fingers, mm.
    pub object_width: f64,
    /// Saturation contact area, pixels.
    pub c_max: f64,
    /// Squeeze at which the area saturates, mm.
    pub indent_sat: f64,
    /// Area noise std-dev, pixels.
    pub noise_sigma: f64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            object_width: 30.0,
            c_max: 20_000.0,
            indent_sat: 10.0,
            noise_sigma: 0.0,
        }
    }
}

impl PlantSpec {
    pub fn validate(&self, pad: &GelPadSpec) -> Result<()> {
        if !(self.object_width > 0.0) {
            return Err(Error::Config("plant.object_width must be positive".into()));
        }
        if !(self.c_max > 0.0) || self.c_max > pad.cells() as f64 {
            return Err(Error::Config(format!(
                "plant.c_max {} must lie in (0, {}]",
                self.c_max,
                pad.cells()
            )));
        }
        if !(self.indent_sat > 0.0) {
            return Err(Error::Config("plant.indent_sat must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("plant.noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    /// Noise-free area at opening `p`.
    pub fn area(&self, p: f64) -> f64 {
        let squeeze = ((self.object_width - p) / self.indent_sat).clamp(0.0, 1.0);
        self.c_max * squeeze
    }
}

/// Ground-truth contact response: saturating-linear in the squeeze
/// `object_width - p`, plus seeded Gaussian noise.
#[derive(Debug, Clone)]
pub struct ContactPlant {
    pub spec: PlantSpec,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

impl ContactPlant {
    pub fn new(spec: PlantSpec, rng_seed: u64) -> Self {
        Self {
            spec,
            rng_seed,
            rng: seed::rng(rng_seed),
        }
    }

    pub fn object_width(&self) -> f64 {
        self.spec.object_width
    }

    pub fn set_object_width(&mut self, width: f64) {
        self.spec.object_width = width;
    }

    /// Measured contact area at gripper opening `p` (mm), in pixels.
    ///
    /// Noise is only drawn when `noise_sigma > 0`; the result is clamped at
    /// zero since a pixel count cannot be negative.
    pub fn plant_step(&mut self, p: f64) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::Domain(format!("gripper opening must be >= 0, got {p}")));
        }
        let mut c = self.spec.area(p);
        if self.spec.noise_sigma > 0.0 {
            let z: f64 = self.rng.sample(StandardNormal);
            c += self.spec.noise_sigma * z;
        }
        Ok(c.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(noise: f64) -> PlantSpec {
        PlantSpec {
            object_width: 30.0,
            c_max: 20_000.0,
            indent_sat: 1.0,
            noise_sigma: noise,
        }
    }

    #[test]
    fn open_gripper_sees_no_contact() {
        let mut plant = ContactPlant::new(spec(0.0), 1);
        assert_eq!(plant.plant_step(35.0).unwrap(), 0.0);
    }

    #[test]
    fn deep_squeeze_saturates() {
        let mut plant = ContactPlant::new(spec(0.0), 1);
        assert_eq!(plant.plant_step(29.0).unwrap(), 20_000.0);
        assert_eq!(plant.plant_step(3.0).unwrap(), 20_000.0);
    }

    #[test]
    fn table_area_at_reference_opening() {
        let mut plant = ContactPlant::new(spec(0.0), 1);
        let c = plant.plant_step(29.725).unwrap();
        assert!((c - 5500.0).abs() < 1e-6, "{c}");
    }

    #[test]
    fn negative_opening_is_rejected() {
        let mut plant = ContactPlant::new(spec(0.0), 1);
        assert!(plant.plant_step(-0.1).is_err());
    }

    #[test]
    fn c_max_bounded_by_pad() {
        let pad = GelPadSpec::default();
        let mut s = spec(0.0);
        assert!(s.validate(&pad).is_ok());
        s.c_max = pad.cells() as f64 + 1.0;
        assert!(s.validate(&pad).is_err());
    }

    proptest! {
        #[test]
        fn area_is_non_increasing_in_opening(a in 0.0f64..60.0, b in 0.0f64..60.0) {
            let s = spec(0.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(s.area(hi) <= s.area(lo));
        }

        #[test]
        fn equal_seeds_give_equal_streams(seed in any::<u64>(), ps in proptest::collection::vec(0.0f64..40.0, 1..50)) {
            let mut a = ContactPlant::new(spec(25.0), seed);
            let mut b = ContactPlant::new(spec(25.0), seed);
            for p in ps {
                prop_assert_eq!(a.plant_step(p).unwrap().to_bits(), b.plant_step(p).unwrap().to_bits());
            }
        }
    }
}
