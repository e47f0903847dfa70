use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raw dose ranges (mg/m²) of the two agents.
///
/// Agent A is indexed by `x`, agent B by `y`. Defaults: A 10–25 mg/m², B
/// 50–100 mg/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoseSpace {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Default for DoseSpace {
    fn default() -> Self {
        DoseSpace {
            x_min: 10.0,
            x_max: 25.0,
            y_min: 50.0,
            y_max: 100.0,
        }
    }
}

impl DoseSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.x_max.is_finite()
            && self.y_max.is_finite()
            && self.x_min < self.x_max
            && self.y_min < self.y_max;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid dose space {self:?}")))
        }
    }

    /// Build a combination from standardized coordinates in `[0, 1]²`.
    pub fn standardized(&self, x: f64, y: f64) -> Result<DoseCombination> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!(
                "standardized dose ({x}, {y}) outside the unit square"
            )));
        }
        Ok(DoseCombination {
            x,
            y,
            raw_x: self.x_min + x * (self.x_max - self.x_min),
            raw_y: self.y_min + y * (self.y_max - self.y_min),
        })
    }

    /// Build a combination from raw doses in mg/m².
    pub fn raw(&self, raw_x: f64, raw_y: f64) -> Result<DoseCombination> {
        let x = (raw_x - self.x_min) / (self.x_max - self.x_min);
        let y = (raw_y - self.y_min) / (self.y_max - self.y_min);
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::domain(format!(
                "raw dose ({raw_x}, {raw_y}) outside the dose space"
            )));
        }
        Ok(DoseCombination { x, y, raw_x, raw_y })
    }
}

/// A dose combination, both standardized and in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseCombination {
    pub x: f64,
    pub y: f64,
    pub raw_x: f64,
    pub raw_y: f64,
}
