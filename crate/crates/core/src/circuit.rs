//! Gate labels and gate sequences.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An elementary gate of the single-qubit device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gate {
    H,
    S,
}

impl Gate {
    pub const ALL: [Gate; 2] = [Gate::H, Gate::S];

    pub fn label(self) -> char {
        match self {
            Gate::H => 'H',
            Gate::S => 'S',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Gate::H => 0,
            Gate::S => 1,
        }
    }

    /// Ideal unitary. The phase gate is `diag(1, -i)`, whose transfer matrix maps
    /// X to -Y and Y to X.
    pub fn unitary(self) -> Matrix2<Complex64> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        match self {
            Gate::H => Matrix2::new(c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)),
            Gate::S => Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0)),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" | "h" => Ok(Gate::H),
            "S" | "s" => Ok(Gate::S),
            other => Err(Error::UnknownGate(other.to_string())),
        }
    }
}

/// An ordered gate sequence; `gates[0]` is applied first.
///
/// Serialized as a compact string of gate letters, e.g. `"HSH"`; the empty
/// circuit is `""`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(gates: Vec<Gate>) -> Self {
        Self { gates }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn count(&self, gate: Gate) -> usize {
        self.gates.iter().filter(|&&g| g == gate).count()
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Circuit) -> Circuit {
        let mut gates = self.gates.clone();
        gates.extend_from_slice(&other.gates);
        Circuit { gates }
    }

    pub fn reversed(&self) -> Circuit {
        Circuit { gates: self.gates.iter().rev().copied().collect() }
    }

    /// Circuit measuring `⟨⟨Q_out| O(meas) O(middle) O(self) |ρ_in⟩⟩`: the
    /// preparation, then `middle`, then the measurement gates, all in
    /// application order.
    pub fn with_measurement(&self, middle: &[Gate], measurement: &Circuit) -> Circuit {
        let mut gates = self.gates.clone();
        gates.extend_from_slice(middle);
        gates.extend_from_slice(&measurement.gates);
        Circuit { gates }
    }

    /// Product of the ideal unitaries, `U_N ... U_1`.
    pub fn ideal_unitary(&self) -> Matrix2<Complex64> {
        self.gates.iter().fold(Matrix2::identity(), |acc, g| g.unitary() * acc)
    }

    /// Whether the ideal circuit returns |0> to |0> up to a global phase.
    pub fn ideally_preserves_zero(&self) -> bool {
        (self.ideal_unitary()[(0, 0)].norm() - 1.0).abs() < 1e-9
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, g) in self.gates.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, ")")
    }
}

impl FromStr for Circuit {
    type Err = Error;

    /// Accepts `"HSH"`, `"H,S,H"`, `"(H,S,H)"`, `""` and `"()"`.
    fn from_str(s: &str) -> Result<Self> {
        let gates = s.chars().filter(|c| !matches!(c, '(' | ')' | ',' | ' ')).map(|c| c.to_string().parse()).collect::<Result<Vec<_>>>()?;
        Ok(Circuit { gates })
    }
}

impl From<Vec<Gate>> for Circuit {
    fn from(gates: Vec<Gate>) -> Self {
        Circuit { gates }
    }
}

impl Serialize for Circuit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let s: String = self.gates.iter().map(|g| g.label()).collect();
        serializer.serialize_str(&s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let c: Circuit = "(H,S,H)".parse().unwrap();
        assert_eq!(c.gates, vec![Gate::H, Gate::S, Gate::H]);
        assert_eq!(c.to_string(), "(H,S,H)");
        assert_eq!("".parse::<Circuit>().unwrap(), Circuit::empty());
        assert!("HX".parse::<Circuit>().is_err());
    }

    #[test]
    fn json_is_compact_string() {
        let c: Circuit = "HSS".parse().unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "\"HSS\"");
        assert_eq!(serde_json::from_str::<Circuit>(&s).unwrap(), c);
    }

    #[test]
    fn zero_preservation() {
        assert!(Circuit::empty().ideally_preserves_zero());
        assert!("S".parse::<Circuit>().unwrap().ideally_preserves_zero());
        assert!(!"H".parse::<Circuit>().unwrap().ideally_preserves_zero());
        assert!("HH".parse::<Circuit>().unwrap().ideally_preserves_zero());
        assert!(!"HSSH".parse::<Circuit>().unwrap().ideally_preserves_zero());
    }

    #[test]
    fn measurement_follows_preparation() {
        let prep: Circuit = "H".parse().unwrap();
        let meas: Circuit = "HS".parse().unwrap();
        let c = prep.with_measurement(&[Gate::S], &meas);
        assert_eq!(c.to_string(), "(H,S,H,S)");
    }
}
