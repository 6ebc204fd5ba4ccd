//! Parametric energy model for fuel-cell, battery-electric and diesel reference trucks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VehicleError {
    #[error("vehicle class {class_id}: {reason}")]
    InvalidClass { class_id: String, reason: String },
    #[error("duplicate vehicle class {0}")]
    DuplicateClass(String),
    #[error("consumption inputs must be positive (gross weight {gross_weight}, multiplier {multiplier})")]
    NonPositiveInputs { gross_weight: f64, multiplier: f64 },
    #[error("vehicle class {class_id}: amount {amount} outside [0, {effective_full}]")]
    AmountExceedsCapacity {
        class_id: String,
        amount: f64,
        effective_full: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowertrainKind {
    #[serde(rename = "FCEV")]
    Fcev,
    #[serde(rename = "BEV")]
    Bev,
    #[serde(rename = "DIESEL_REF")]
    DieselRef,
}

/// Energy storage and replenishment parameters of one truck class.
///
/// Capacity is in kg of hydrogen for FCEV, nameplate kWh for BEV and gallons
/// for the diesel reference. A BEV charger of `P` kW is stored as a
/// replenish rate of `P / 60` kWh per minute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleClass {
    pub class_id: String,
    pub kind: PowertrainKind,
    pub capacity: f64,
    pub capacity_unit: String,
    pub usable_fraction: f64,
    pub reserve_fraction: f64,
    #[serde(rename = "consumption_per_mile")]
    pub base_consumption: f64,
    #[serde(rename = "replenish_rate_per_min")]
    pub replenish_rate: f64,
    #[serde(default)]
    pub weight_sensitivity: f64,
    #[serde(rename = "reference_weight_lb", default = "default_reference_weight")]
    pub reference_weight: f64,
}

fn default_reference_weight() -> f64 {
    33_000.0
}

impl VehicleClass {
    /// Hydrogen truck with a 20% reserve and the whole tank usable.
    pub fn fcev(class_id: impl Into<String>, capacity_kg: f64, kg_per_mile: f64, kg_per_min: f64) -> Self {
        Self {
            class_id: class_id.into(),
            kind: PowertrainKind::Fcev,
            capacity: capacity_kg,
            capacity_unit: "kg".into(),
            usable_fraction: 1.0,
            reserve_fraction: 0.20,
            base_consumption: kg_per_mile,
            replenish_rate: kg_per_min,
            weight_sensitivity: 0.0,
            reference_weight: default_reference_weight(),
        }
    }

    /// Battery truck with 80% usable capacity and a 15% recharge trigger.
    pub fn bev(class_id: impl Into<String>, nameplate_kwh: f64, kwh_per_mile: f64, charger_kw: f64) -> Self {
        Self {
            class_id: class_id.into(),
            kind: PowertrainKind::Bev,
            capacity: nameplate_kwh,
            capacity_unit: "kWh".into(),
            usable_fraction: 0.80,
            reserve_fraction: 0.15,
            base_consumption: kwh_per_mile,
            replenish_rate: charger_kw / 60.0,
            weight_sensitivity: 0.0,
            reference_weight: default_reference_weight(),
        }
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        let fail = |reason: &str| {
            Err(VehicleError::InvalidClass {
                class_id: self.class_id.clone(),
                reason: reason.to_string(),
            })
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.class_id.is_empty() {
            return fail("empty class_id");
        }
        if !positive(self.capacity) {
            return fail("capacity must be positive");
        }
        if !(self.usable_fraction > 0.0 && self.usable_fraction <= 1.0) {
            return fail("usable_fraction must lie in (0, 1]");
        }
        if !(self.reserve_fraction >= 0.0 && self.reserve_fraction < 1.0) {
            return fail("reserve_fraction must lie in [0, 1)");
        }
        if self.usable_fraction <= self.reserve_fraction {
            return fail("usable_fraction must exceed reserve_fraction");
        }
        if !positive(self.base_consumption) {
            return fail("consumption_per_mile must be positive");
        }
        if !positive(self.replenish_rate) {
            return fail("replenish_rate_per_min must be positive");
        }
        if !self.weight_sensitivity.is_finite() {
            return fail("weight_sensitivity must be finite");
        }
        if !positive(self.reference_weight) {
            return fail("reference_weight_lb must be positive");
        }
        Ok(())
    }

    /// Maximum onboard energy after a fill.
    pub fn effective_full(&self) -> f64 {
        self.usable_fraction * self.capacity
    }

    /// Reserve level the policy never crosses.
    pub fn floor(&self) -> f64 {
        self.reserve_fraction * self.capacity
    }

    /// Drivable band between a fill and the reserve floor.
    pub fn window(&self) -> f64 {
        self.effective_full() - self.floor()
    }

    /// Replenishment rate expressed as power in kW (BEV only meaningful).
    pub fn power_kw(&self) -> f64 {
        self.replenish_rate * 60.0
    }
}

/// Per-mile consumption adjusted for gross weight and segment conditions,
/// never below a tenth of the base rate.
pub fn consumption_rate(
    vc: &VehicleClass,
    gross_weight: f64,
    segment_multiplier: f64,
) -> Result<f64, VehicleError> {
    if !(gross_weight > 0.0 && segment_multiplier > 0.0) {
        return Err(VehicleError::NonPositiveInputs {
            gross_weight,
            multiplier: segment_multiplier,
        });
    }
    let c = vc.base_consumption;
    let adjusted = c + vc.weight_sensitivity * (gross_weight - vc.reference_weight) / 1000.0;
    Ok((adjusted * segment_multiplier).max(0.1 * c))
}

/// Miles until the reserve floor is reached at a constant rate.
pub fn range_to_floor(vc: &VehicleClass, onboard: f64, rate: f64) -> f64 {
    ((onboard - vc.floor()) / rate).max(0.0)
}

/// Minutes needed to transfer `amount` at the class replenish rate.
pub fn replenish_time(vc: &VehicleClass, amount: f64) -> Result<f64, VehicleError> {
    let full = vc.effective_full();
    if !(amount >= 0.0 && amount <= full + 1e-9) {
        return Err(VehicleError::AmountExceedsCapacity {
            class_id: vc.class_id.clone(),
            amount,
            effective_full: full,
        });
    }
    Ok(amount / vc.replenish_rate)
}

/// Validated, immutable set of vehicle classes keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VehicleRegistry {
    classes: BTreeMap<String, VehicleClass>,
}

impl VehicleRegistry {
    pub fn new(classes: impl IntoIterator<Item = VehicleClass>) -> Result<Self, VehicleError> {
        let mut map = BTreeMap::new();
        for vc in classes {
            vc.validate()?;
            if map.contains_key(&vc.class_id) {
                return Err(VehicleError::DuplicateClass(vc.class_id));
            }
            map.insert(vc.class_id.clone(), vc);
        }
        Ok(Self { classes: map })
    }

    pub fn get(&self, class_id: &str) -> Option<&VehicleClass> {
        self.classes.get(class_id)
    }

    pub fn contains(&self, class_id: &str) -> bool {
        self.classes.contains_key(class_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VehicleClass> {
        self.classes.values()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h2_70() -> VehicleClass {
        VehicleClass::fcev("h2-70", 70.0, 0.10, 10.0)
    }

    #[test]
    fn consumption_hooks() {
        let vc = h2_70();
        assert_eq!(consumption_rate(&vc, 77_000.0, 1.0).unwrap(), 0.10);
        let scaled = consumption_rate(&vc, 33_000.0, 1.2).unwrap();
        assert!((scaled - 0.12).abs() < 1e-15);

        let heavy = VehicleClass {
            weight_sensitivity: 0.001,
            ..vc.clone()
        };
        let r = consumption_rate(&heavy, 77_000.0, 1.0).unwrap();
        assert!((r - 0.144).abs() < 1e-12);

        let light = VehicleClass {
            weight_sensitivity: 0.01,
            ..vc.clone()
        };
        assert_eq!(consumption_rate(&light, 1_000.0, 1.0).unwrap(), 0.1 * 0.10);
        assert!(consumption_rate(&vc, 0.0, 1.0).is_err());
        assert!(consumption_rate(&vc, 1.0, -1.0).is_err());
    }

    #[test]
    fn range_examples() {
        let vc = h2_70();
        assert!((range_to_floor(&vc, 70.0, 0.10) - 560.0).abs() < 1e-9);
        assert_eq!(range_to_floor(&vc, vc.floor(), 0.10), 0.0);
        assert_eq!(range_to_floor(&vc, 5.0, 0.10), 0.0);

        let bev = VehicleClass::bev("bev-1000", 1000.0, 1.5625, 1250.0);
        assert_eq!(bev.effective_full(), 800.0);
        assert_eq!(bev.floor(), 150.0);
        assert!((range_to_floor(&bev, 800.0, 1.5625) - 416.0).abs() < 1e-9);
    }

    #[test]
    fn replenish_examples() {
        let vc = h2_70();
        assert_eq!(replenish_time(&vc, 0.0).unwrap(), 0.0);
        assert!((replenish_time(&vc, 56.0).unwrap() - 5.6).abs() < 1e-12);
        let bev = VehicleClass::bev("bev-1000", 1000.0, 1.5625, 1250.0);
        assert!((replenish_time(&bev, 650.0).unwrap() - 31.2).abs() < 1e-9);
        assert!(matches!(
            replenish_time(&bev, 900.0),
            Err(VehicleError::AmountExceedsCapacity { .. })
        ));
        assert!(replenish_time(&bev, -1.0).is_err());
    }

    #[test]
    fn registry_rejects_bad_windows() {
        let bad = VehicleClass {
            usable_fraction: 0.15,
            ..VehicleClass::bev("b", 438.0, 1.5, 150.0)
        };
        assert!(VehicleRegistry::new([bad]).is_err());
        let bad = VehicleClass {
            reserve_fraction: 1.0,
            ..h2_70()
        };
        assert!(VehicleRegistry::new([bad]).is_err());
        assert!(matches!(
            VehicleRegistry::new([h2_70(), h2_70()]),
            Err(VehicleError::DuplicateClass(_))
        ));
        let reg = VehicleRegistry::new([h2_70()]).unwrap();
        assert!(reg.contains("h2-70"));
    }

    #[test]
    fn class_json_schema() {
        let json = r#"{"class_id":"h2-80","kind":"FCEV","capacity":80,"capacity_unit":"kg",
            "usable_fraction":1.0,"reserve_fraction":0.2,"consumption_per_mile":0.1,
            "replenish_rate_per_min":10,"weight_sensitivity":0,"reference_weight_lb":33000}"#;
        let vc: VehicleClass = serde_json::from_str(json).unwrap();
        assert_eq!(vc.kind, PowertrainKind::Fcev);
        assert_eq!(vc.window(), 64.0);
    }

    proptest! {
        #[test]
        fn range_monotone(onboard in 15.0f64..70.0, delta in 0.01f64..10.0, rate in 0.01f64..1.0) {
            let vc = h2_70();
            let hi = (onboard + delta).min(70.0);
            prop_assume!(hi > onboard);
            prop_assert!(range_to_floor(&vc, hi, rate) > range_to_floor(&vc, onboard, rate));
            prop_assert!(range_to_floor(&vc, onboard, rate * 1.1) < range_to_floor(&vc, onboard, rate));
        }

        #[test]
        fn larger_tank_goes_further(small in 50.0f64..120.0, extra in 0.1f64..50.0, rate in 0.01f64..1.0) {
            let a = VehicleClass::fcev("a", small, rate, 10.0);
            let b = VehicleClass::fcev("b", small + extra, rate, 10.0);
            prop_assert!(range_to_floor(&b, b.effective_full(), rate) >= range_to_floor(&a, a.effective_full(), rate));
        }
    }
}
