//! Synthetic distributions used in the experiments, and the fixed affine map
//! onto the unit box.
//!
//! Every family has a fixed raw-space box (independent of its shift or rate
//! parameter) so that samples from different members of a family are mapped
//! by the same affine transformation and distances between them are
//! preserved up to one common factor.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, Domain};
use crate::sample::Sample;

/// Shift of the `CircleShift` family along the first axis.
pub const CIRCLE_SHIFT: f64 = 0.08;
/// Radius of the plain circle.
pub const CIRCLE_RADIUS: f64 = 0.5;
/// Radius multiplier of the `CircleScale` family.
pub const CIRCLE_SCALE: f64 = 1.8;

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `N(shift * 1, I)`.
    Gaussian { shift: f64 },
    /// Independent `Exp(1 + rate_shift)` coordinates.
    Exponential { rate_shift: f64 },
    /// Independent `N(-4,1)/2 + N(4,1)/2` coordinates.
    GaussianMixture,
    /// Uniform on the circle of radius 1/2 around the origin.
    CirclePlain,
    /// The plain circle moved by `CIRCLE_SHIFT` along the first axis.
    CircleShift,
    /// The plain circle with radius scaled by `CIRCLE_SCALE`.
    CircleScale,
    /// All mass on one point of the unit box.
    PointMass { location: f64 },
}

impl Family {
    fn is_circle(&self) -> bool {
        matches!(
            self,
            Family::CirclePlain | Family::CircleShift | Family::CircleScale
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian { shift } => write!(f, "gaussian:{shift}"),
            Family::Exponential { rate_shift } => write!(f, "exponential:{rate_shift}"),
            Family::GaussianMixture => f.write_str("mixture"),
            Family::CirclePlain => f.write_str("circle-plain"),
            Family::CircleShift => f.write_str("circle-shift"),
            Family::CircleScale => f.write_str("circle-scale"),
            Family::PointMass { location } => write!(f, "point-mass:{location}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts `gaussian[:shift]`, `exponential[:rate_shift]`, `mixture`,
    /// `circle-plain`, `circle-shift`, `circle-scale` and `point-mass[:c]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |default: f64| -> Result<f64> {
            match arg {
                None => Ok(default),
                Some(a) => a
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad parameter '{a}' in '{s}'"))),
            }
        };
        let family = match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Family::Gaussian {
                shift: number(0.0)?,
            },
            "exponential" => Family::Exponential {
                rate_shift: number(0.0)?,
            },
            "mixture" => Family::GaussianMixture,
            "circle-plain" => Family::CirclePlain,
            "circle-shift" => Family::CircleShift,
            "circle-scale" => Family::CircleScale,
            "point-mass" => Family::PointMass {
                location: number(0.5)?,
            },
            other => {
                return Err(Error::Input(format!(
                    "unknown distribution family '{other}'"
                )))
            }
        };
        if arg.is_some() && (family == Family::GaussianMixture || family.is_circle()) {
            return Err(Error::Input(format!("family '{name}' takes no parameter")));
        }
        Ok(family)
    }
}

/// A distribution family in a given dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DistSpec {
    pub family: Family,
    pub d: usize,
}

impl DistSpec {
    pub fn new(family: Family, d: usize) -> Result<Self> {
        let spec = Self { family, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Input("dimension must be >= 1".into()));
        }
        if self.family.is_circle() && self.d != 2 {
            return Err(Error::Input(format!(
                "{} requires d = 2, got {}",
                self.family, self.d
            )));
        }
        match self.family {
            Family::Gaussian { shift } if !shift.is_finite() => {
                Err(Error::Input("gaussian shift must be finite".into()))
            }
            Family::Exponential { rate_shift }
                if !(rate_shift.is_finite() && rate_shift > -1.0) =>
            {
                Err(Error::Input(
                    "exponential rate 1 + rate_shift must be positive".into(),
                ))
            }
            Family::PointMass { location } if !(0.0..=1.0).contains(&location) => Err(
                Error::Input("point-mass location must lie in [0, 1]".into()),
            ),
            _ => Ok(()),
        }
    }

    /// The fixed box the family is mapped from.
    pub fn default_box(&self) -> UnitBoxMap {
        let (lo, hi) = match self.family {
            Family::Gaussian { .. } => (-6.0, 6.0),
            Family::Exponential { .. } => (0.0, 12.0),
            Family::GaussianMixture => (-9.0, 9.0),
            Family::CirclePlain | Family::CircleShift | Family::CircleScale => (-1.0, 1.0),
            Family::PointMass { .. } => (0.0, 1.0),
        };
        UnitBoxMap::isotropic(lo, hi, self.d)
    }

    /// `n` raw draws, before any mapping to the unit box.
    pub fn sample_raw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Input("n must be >= 1".into()));
        }
        let d = self.d;
        let data = match self.family {
            Family::Gaussian { shift } => Array2::from_shape_simple_fn((n, d), || {
                shift + Distribution::<f64>::sample(&StandardNormal, rng)
            }),
            Family::Exponential { rate_shift } => {
                let exp = Exp::new(1.0 + rate_shift).map_err(|e| Error::Input(e.to_string()))?;
                Array2::from_shape_simple_fn((n, d), || exp.sample(rng))
            }
            Family::GaussianMixture => {
                let unit = Normal::new(0.0, 1.0).map_err(|e| Error::Input(e.to_string()))?;
                Array2::from_shape_simple_fn((n, d), || {
                    let center = if rng.random::<bool>() { 4.0 } else { -4.0 };
                    center + unit.sample(rng)
                })
            }
            Family::CirclePlain | Family::CircleShift | Family::CircleScale => {
                let (cx, radius) = match self.family {
                    Family::CircleShift => (CIRCLE_SHIFT, CIRCLE_RADIUS),
                    Family::CircleScale => (0.0, CIRCLE_RADIUS * CIRCLE_SCALE),
                    _ => (0.0, CIRCLE_RADIUS),
                };
                let mut data = Array2::zeros((n, 2));
                for mut row in data.rows_mut() {
                    let theta = rng.random_range(0.0..2.0 * PI);
                    row[0] = cx + radius * theta.cos();
                    row[1] = radius * theta.sin();
                }
                data
            }
            Family::PointMass { location } => Array2::from_elem((n, d), location),
        };
        Ok(data)
    }
}

/// `n` draws from `spec`, mapped to the unit box with the family's fixed box.
pub fn generate(spec: &DistSpec, n: usize, seed: u64) -> Result<Sample> {
    generate_with_rng(spec, n, &mut stream(seed, Domain::DataX, 0))
}

pub fn generate_with_rng<R: Rng + ?Sized>(
    spec: &DistSpec,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    let raw = Sample::new(spec.sample_raw(n, rng)?)?;
    rescale_to_unit_box(&raw, &spec.default_box())
}

/// Per-dimension affine map `v -> (v - lo) / (hi - lo)`, clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitBoxMap {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl UnitBoxMap {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Input(
                "box bounds need matching, non-empty lo/hi".into(),
            ));
        }
        for (k, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Input(format!(
                    "invalid bounds [{a}, {b}] in dimension {k}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn isotropic(lo: f64, hi: f64, d: usize) -> Self {
        Self {
            lo: vec![lo; d],
            hi: vec![hi; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Maps `x` into `[0,1]^d` with a fixed box and flags the result as unit-box
/// data. Values outside the box are clipped.
pub fn rescale_to_unit_box(x: &Sample, bounds: &UnitBoxMap) -> Result<Sample> {
    if bounds.dim() != x.d() {
        return Err(Error::Shape(format!(
            "box has {} dimensions, sample has {}",
            bounds.dim(),
            x.d()
        )));
    }
    for (a, b) in bounds.lo.iter().zip(&bounds.hi) {
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(Error::Input(format!("invalid bounds [{a}, {b}]")));
        }
    }
    let mut data = x.data().to_owned();
    for mut row in data.rows_mut() {
        for (k, v) in row.iter_mut().enumerate() {
            let (lo, hi) = (bounds.lo[k], bounds.hi[k]);
            *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
    }
    Sample::new_unit_box(data)
}
