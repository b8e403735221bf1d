//! Coefficient fields: seeded piecewise-constant random bulk fields on
//! Cartesian grids, per-polyline interface data, and source terms.
//!
//! Fields are pure functions of their parameters. Cell values come from a
//! counter-based generator: value = splitmix64(seed ^ (row * GOLDEN) ^ col)
//! mapped linearly to [lo, hi), with GOLDEN = 0x9E3779B97F4A7C15 and
//! splitmix64 the standard increment-and-mix finalizer. This makes fields
//! reproducible independently of traversal order.

use crate::mesh::{FractureNetwork, Point2};
use crate::{Error, Result};

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

/// SplitMix64 step: increment by the golden-ratio constant, then mix.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Uniform double in [0, 1) from 53 high bits.
fn unit_from_bits(x: u64) -> f64 {
    (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Piecewise-constant field on an n x n Cartesian grid over the unit
/// square.
#[derive(Debug, Clone)]
pub struct GridField {
    n: usize,
    lo: f64,
    hi: f64,
    seed: u64,
    values: Vec<f64>,
}

impl GridField {
    /// Samples cell values uniformly from [lo, hi), keyed by
    /// (seed, row, col).
    pub fn sample_uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("GridField requires n >= 1".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "GridField requires lo < hi, got [{lo}, {hi})"
            )));
        }
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                values.push(cell_value(seed, row as u64, col as u64, lo, hi));
            }
        }
        Ok(Self {
            n,
            lo,
            hi,
            seed,
            values,
        })
    }

    /// Constant field: every cell equals `c`.
    pub fn constant(c: f64) -> Self {
        Self {
            n: 1,
            lo: c,
            hi: c,
            seed: 0,
            values: vec![c],
        }
    }

    /// Per-cell values drawn with the seed of the region containing the
    /// cell center; `seeds[r]` belongs to region index r of `regions`.
    pub fn layered(n: usize, lo: f64, hi: f64, seeds: &[u64], regions: &Regions) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("GridField requires n >= 1".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "GridField requires lo < hi, got [{lo}, {hi})"
            )));
        }
        if seeds.len() != regions.num_regions() {
            return Err(Error::InvalidParameter(format!(
                "layered field needs {} seeds, got {}",
                regions.num_regions(),
                seeds.len()
            )));
        }
        let mut values = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                let center =
                    Point2::new((col as f64 + 0.5) / n as f64, (row as f64 + 0.5) / n as f64);
                let region = regions.locate(center)?;
                values.push(cell_value(seeds[region], row as u64, col as u64, lo, hi));
            }
        }
        Ok(Self {
            n,
            lo,
            hi,
            seed: seeds.first().copied().unwrap_or(0),
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value of the cell containing p. Cells are right-open; points on an
    /// interior cell boundary resolve by floor, and the closed domain
    /// boundary at 1 maps into the last cell.
    pub fn eval(&self, p: Point2) -> Result<f64> {
        if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        let col = ((p.x * self.n as f64).floor() as usize).min(self.n - 1);
        let row = ((p.y * self.n as f64).floor() as usize).min(self.n - 1);
        Ok(self.values[row * self.n + col])
    }
}

fn cell_value(seed: u64, row: u64, col: u64, lo: f64, hi: f64) -> f64 {
    let key = seed ^ row.wrapping_mul(GOLDEN) ^ col;
    let u = unit_from_bits(splitmix64(key));
    let v = lo + u * (hi - lo);
    if v >= hi {
        // Guard against round-up at the right-open end.
        f64::from_bits(hi.to_bits() - 1)
    } else {
        v
    }
}

/// Partition of the unit square into vertical-ish bands by divider
/// polylines that each span the full y-range.
#[derive(Debug, Clone)]
pub struct Regions {
    /// Divider chains ordered left to right.
    dividers: Vec<Vec<Point2>>,
}

impl Regions {
    /// Whole domain: one region.
    pub fn whole() -> Self {
        Self {
            dividers: Vec::new(),
        }
    }

    /// Builds band regions from a fracture network whose polylines divide
    /// the domain; every polyline must span y in [0, 1].
    pub fn bands_from_network(network: &FractureNetwork) -> Result<Self> {
        let mut dividers: Vec<Vec<Point2>> = Vec::new();
        for i in 0..network.num_polylines() {
            let chain = network.polyline(i).to_vec();
            let (y_min, y_max) = chain
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.y), hi.max(p.y))
                });
            if y_min > 1e-12 || y_max < 1.0 - 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "divider polyline {i} does not span the y-range of the domain"
                )));
            }
            dividers.push(chain);
        }
        dividers.sort_by(|a, b| a[0].x.partial_cmp(&b[0].x).unwrap());
        Ok(Self { dividers })
    }

    pub fn num_regions(&self) -> usize {
        self.dividers.len() + 1
    }

    /// Region index of a point: the number of dividers strictly to its
    /// left.
    pub fn locate(&self, p: Point2) -> Result<usize> {
        let mut count = 0;
        for chain in &self.dividers {
            match side_of_chain(chain, p) {
                Some(side) => {
                    if side > 0.0 {
                        count += 1;
                    }
                }
                None => return Err(Error::RegionLookup { x: p.x, y: p.y }),
            }
        }
        Ok(count)
    }
}

/// Sign of the point relative to the chain segment spanning its y: positive
/// when the point lies to the right of the upward-oriented chain.
fn side_of_chain(chain: &[Point2], p: Point2) -> Option<f64> {
    for w in chain.windows(2) {
        let (a, b) = if w[0].y <= w[1].y {
            (w[0], w[1])
        } else {
            (w[1], w[0])
        };
        if p.y >= a.y - 1e-12 && p.y <= b.y + 1e-12 {
            if (b.y - a.y).abs() < 1e-14 {
                continue;
            }
            let cross = b.sub(a).cross(p.sub(a));
            return Some(-cross);
        }
    }
    None
}

/// Analytic scalar on the fracture (forcing or data along interfaces).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticScalar {
    Constant(f64),
    /// offset + sin(x + y)
    OffsetSinXY {
        offset: f64,
    },
    /// offset + cos(x + y)
    OffsetCosXY {
        offset: f64,
    },
    /// `inside` within the closed axis-aligned box, `outside` elsewhere.
    BoxIndicator {
        lo: Point2,
        hi: Point2,
        inside: f64,
        outside: f64,
    },
}

impl AnalyticScalar {
    pub fn eval(&self, p: Point2) -> f64 {
        match self {
            AnalyticScalar::Constant(c) => *c,
            AnalyticScalar::OffsetSinXY { offset } => offset + (p.x + p.y).sin(),
            AnalyticScalar::OffsetCosXY { offset } => offset + (p.x + p.y).cos(),
            AnalyticScalar::BoxIndicator {
                lo,
                hi,
                inside,
                outside,
            } => {
                if p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y {
                    *inside
                } else {
                    *outside
                }
            }
        }
    }
}

/// Per-polyline interface data: tangential permeability, interface density
/// (wave problems), and interface forcing.
#[derive(Debug, Clone)]
pub struct InterfaceData {
    per_polyline: Vec<PolylineData>,
}

#[derive(Debug, Clone)]
pub struct PolylineData {
    pub conductivity: f64,
    pub density: f64,
    pub source: AnalyticScalar,
}

impl InterfaceData {
    pub fn new(per_polyline: Vec<PolylineData>) -> Result<Self> {
        for (i, d) in per_polyline.iter().enumerate() {
            if !(d.conductivity > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "interface conductivity of polyline {i} must be positive"
                )));
            }
            if d.density < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "interface density of polyline {i} must be nonnegative"
                )));
            }
        }
        Ok(Self { per_polyline })
    }

    /// Same data on every polyline.
    pub fn uniform(
        count: usize,
        conductivity: f64,
        density: f64,
        source: AnalyticScalar,
    ) -> Result<Self> {
        Self::new(
            (0..count)
                .map(|_| PolylineData {
                    conductivity,
                    density,
                    source,
                })
                .collect(),
        )
    }

    pub fn polyline(&self, i: usize) -> &PolylineData {
        &self.per_polyline[i]
    }

    pub fn len(&self) -> usize {
        self.per_polyline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_polyline.is_empty()
    }
}

/// Bulk source description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BulkSource {
    Constant(f64),
    /// `inside` within the axis-aligned box, `outside` elsewhere.
    BoxIndicator {
        lo: Point2,
        hi: Point2,
        inside: f64,
        outside: f64,
    },
    /// amplitude * sin(pi x) sin(pi y)
    SinPiSinPi {
        amplitude: f64,
    },
}

impl BulkSource {
    pub fn eval(&self, p: Point2) -> f64 {
        match self {
            BulkSource::Constant(c) => *c,
            BulkSource::BoxIndicator {
                lo,
                hi,
                inside,
                outside,
            } => {
                if p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y {
                    *inside
                } else {
                    *outside
                }
            }
            BulkSource::SinPiSinPi { amplitude } => {
                amplitude * (std::f64::consts::PI * p.x).sin() * (std::f64::consts::PI * p.y).sin()
            }
        }
    }

    /// Box indicators are integrated by classifying each triangle at its
    /// centroid; analytic sources use pointwise quadrature.
    pub fn is_piecewise_indicator(&self) -> bool {
        matches!(
            self,
            BulkSource::Constant(_) | BulkSource::BoxIndicator { .. }
        )
    }
}

/// Bulk source plus bulk density (the density enters wave problems only).
#[derive(Debug, Clone, Copy)]
pub struct SourceTerm {
    pub f: BulkSource,
    pub density: f64,
}

impl SourceTerm {
    pub fn new(f: BulkSource) -> Self {
        Self { f, density: 1.0 }
    }

    pub fn with_density(f: BulkSource, density: f64) -> Self {
        Self { f, density }
    }
}
