//! Run parameters shared by the library entry points and the CLI:
//! rectangular windows, solver tolerances, and the grid description.

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Axis-aligned rectangle, used both for parameter-plane and image-plane
/// computations. Serializes as the 4-array [x0, x1, y0, y1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(Error::InvalidConfig("window bounds must be finite".into()));
        }
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidConfig(format!(
                "window [{x0}, {x1}] x [{y0}, {y1}] is empty"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

impl FromStr for Window {
    type Err = Error;

    /// Parse "x0,x1,y0,y1".
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "window must be 'x0,x1,y0,y1', got '{s}'"
            )));
        }
        let mut vals = [0.0f64; 4];
        for (v, part) in vals.iter_mut().zip(&parts) {
            *v = part.parse().map_err(|_| {
                Error::InvalidConfig(format!("window component '{part}' is not a number"))
            })?;
        }
        Window::new(vals[0], vals[1], vals[2], vals[3])
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.x0, self.x1, self.y0, self.y1)
    }
}

impl Serialize for Window {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(4))?;
        for v in [self.x0, self.x1, self.y0, self.y1] {
            seq.serialize_element(&v)?;
        }
        seq.end()
    }
}

/// Solver tolerances, all absolute.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    /// Residual bound for the delta_0 root solve.
    pub root: f64,
    /// Residual bound (sup norm) for the inversion Newton iteration.
    pub newton: f64,
    /// Ratio bound for accepted boundary vertices.
    pub boundary: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { root: 1e-12, newton: 1e-11, boundary: 1e-8 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_list() {
        let w: Window = "-1.6,1.6,0.01,3.6".parse().unwrap();
        assert_eq!(w, Window::new(-1.6, 1.6, 0.01, 3.6).unwrap());
        assert!(w.contains(0.0, 1.0));
        assert!(!w.contains(0.0, 4.0));
    }

    #[test]
    fn rejects_malformed_windows() {
        assert!("1,2,3".parse::<Window>().is_err());
        assert!("1,2,3,x".parse::<Window>().is_err());
        assert!("2,1,0,1".parse::<Window>().is_err());
        assert!(Window::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn serializes_as_array() {
        let w = Window::new(0.0, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), "[0.0,1.0,2.0,3.0]");
    }

    #[test]
    fn round_trips_through_display() {
        let w = Window::new(-1.25, 0.5, 0.125, 2.0).unwrap();
        let back: Window = w.to_string().parse().unwrap();
        assert_eq!(w, back);
    }
}
