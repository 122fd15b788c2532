use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of cells between the origin and the truncation boundary.
pub const MIN_CELLS_PER_HALF_WIDTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GridMode {
    Cartesian1d,
    Cartesian2d,
    /// Radially symmetric functions on R^dim, discretized on the half-line.
    Radial {
        dim: u32,
    },
}

impl GridMode {
    /// Effective space dimension N.
    pub fn dimension(self) -> u32 {
        match self {
            GridMode::Cartesian1d => 1,
            GridMode::Cartesian2d => 2,
            GridMode::Radial { dim } => dim,
        }
    }

    pub fn name(self) -> String {
        match self {
            GridMode::Cartesian1d => "cartesian1d".to_string(),
            GridMode::Cartesian2d => "cartesian2d".to_string(),
            GridMode::Radial { dim } => format!("radial{dim}"),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        match text {
            "cartesian1d" => Ok(GridMode::Cartesian1d),
            "cartesian2d" => Ok(GridMode::Cartesian2d),
            _ => {
                let dim = text
                    .strip_prefix("radial")
                    .map(|rest| rest.trim_start_matches(['(', '_']).trim_end_matches(')'))
                    .and_then(|d| d.parse::<u32>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown grid mode `{text}`")))?;
                if dim < 2 {
                    return Err(Error::Config(format!(
                        "radial mode needs dimension >= 2, got {dim}"
                    )));
                }
                Ok(GridMode::Radial { dim })
            }
        }
    }
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Identifies a grid; fields carry it so that mixing grids is caught.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridId {
    pub mode: GridMode,
    pub cells_per_half: usize,
    half_width_bits: u64,
}

impl fmt::Display for GridId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}(R={}, R/h={})",
            self.mode,
            f64::from_bits(self.half_width_bits),
            self.cells_per_half
        )
    }
}

/// Location of a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    /// Cartesian coordinates; unused entries are zero. In radial mode the
    /// first entry is the radius.
    pub coords: [f64; 2],
    pub radius: f64,
}

/// Truncated computational domain with zero Dirichlet data on its boundary.
///
/// Every interior node owns a control cell and the cells tile the domain:
/// a node at distance `h` from the boundary also absorbs the boundary
/// half-cell. The quadrature weights are the cell measures, so they sum to
/// the measure of the truncated domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    mode: GridMode,
    half_width: f64,
    spacing: f64,
    cells_per_half: usize,
    axis: Vec<f64>,
    axis_weights: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(mode: GridMode, half_width: f64, spacing: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Config(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Config(format!(
                "spacing must be positive, got {spacing}"
            )));
        }
        let ratio = half_width / spacing;
        let cells = ratio.round();
        if (ratio - cells).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "R/h = {ratio} is not an integer (R = {half_width}, h = {spacing})"
            )));
        }
        let cells = cells as usize;
        if cells < MIN_CELLS_PER_HALF_WIDTH {
            return Err(Error::Config(format!(
                "R/h = {cells} is below the minimum of {MIN_CELLS_PER_HALF_WIDTH}"
            )));
        }
        if let GridMode::Radial { dim } = mode {
            if dim < 2 {
                return Err(Error::Config(format!(
                    "radial mode needs dimension >= 2, got {dim}"
                )));
            }
        }
        let h = half_width / cells as f64;

        let (axis, axis_weights) = match mode {
            GridMode::Cartesian1d | GridMode::Cartesian2d => {
                let n = 2 * cells - 1;
                let axis: Vec<f64> = (0..n)
                    .map(|i| (i as f64 - (cells as f64 - 1.0)) * h)
                    .collect();
                let mut w = vec![h; n];
                w[0] = 1.5 * h;
                w[n - 1] = 1.5 * h;
                (axis, w)
            }
            GridMode::Radial { dim } => {
                let n = cells - 1;
                let sigma = sphere_surface(dim);
                let axis: Vec<f64> = (0..n).map(|i| (i + 1) as f64 * h).collect();
                let w = (0..n)
                    .map(|i| {
                        let lo = if i == 0 { 0.0 } else { axis[i] - 0.5 * h };
                        let hi = if i == n - 1 {
                            half_width
                        } else {
                            axis[i] + 0.5 * h
                        };
                        sigma * shell_volume(dim, lo, hi)
                    })
                    .collect();
                (axis, w)
            }
        };

        let weights = match mode {
            GridMode::Cartesian2d => {
                let n = axis.len();
                let mut w = Vec::with_capacity(n * n);
                for wy in &axis_weights {
                    for wx in &axis_weights {
                        w.push(wx * wy);
                    }
                }
                w
            }
            _ => axis_weights.clone(),
        };

        Ok(Grid {
            mode,
            half_width,
            spacing: h,
            cells_per_half: cells,
            axis,
            axis_weights,
            weights,
        })
    }

    pub fn id(&self) -> GridId {
        GridId {
            mode: self.mode,
            cells_per_half: self.cells_per_half,
            half_width_bits: self.half_width.to_bits(),
        }
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cells_per_half(&self) -> usize {
        self.cells_per_half
    }

    pub fn dimension(&self) -> u32 {
        self.mode.dimension()
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Node coordinates along one axis (radii in radial mode).
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// One-dimensional cell measures along an axis. In radial mode these
    /// include the r^{N-1} factor and the sphere surface.
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node(&self, index: usize) -> Node {
        match self.mode {
            GridMode::Cartesian1d => {
                let x = self.axis[index];
                Node {
                    coords: [x, 0.0],
                    radius: x.abs(),
                }
            }
            GridMode::Radial { .. } => {
                let r = self.axis[index];
                Node {
                    coords: [r, 0.0],
                    radius: r,
                }
            }
            GridMode::Cartesian2d => {
                let n = self.axis.len();
                let x = self.axis[index % n];
                let y = self.axis[index / n];
                Node {
                    coords: [x, y],
                    radius: x.hypot(y),
                }
            }
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Measure of the truncated domain.
    pub fn domain_measure(&self) -> f64 {
        let r = self.half_width;
        match self.mode {
            GridMode::Cartesian1d => 2.0 * r,
            GridMode::Cartesian2d => 4.0 * r * r,
            GridMode::Radial { dim } => sphere_surface(dim) * r.powi(dim as i32) / dim as f64,
        }
    }

    pub(crate) fn check(&self, id: GridId) -> Result<()> {
        if self.id() == id {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.id().to_string(),
                right: id.to_string(),
            })
        }
    }
}

/// Surface measure of the unit sphere in R^dim.
pub fn sphere_surface(dim: u32) -> f64 {
    2.0 * PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim)
}

/// Gamma(dim / 2) for a positive integer dim.
fn gamma_half_integer(dim: u32) -> f64 {
    let (mut value, mut x) = if dim.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = dim as f64 / 2.0;
    while x < target - 0.25 {
        value *= x;
        x += 1.0;
    }
    value
}

fn shell_volume(dim: u32, lo: f64, hi: f64) -> f64 {
    let d = dim as i32;
    (hi.powi(d) - lo.powi(d)) / dim as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian1d_node_layout() {
        let g = Grid::new(GridMode::Cartesian1d, 1.0, 0.125).unwrap();
        assert_eq!(g.len(), 15);
        let g = Grid::new(GridMode::Cartesian1d, 2.0, 0.25).unwrap();
        assert_eq!(g.len(), 15);
        assert!((g.axis()[0] + 1.75).abs() < 1e-15);
        assert!((g.axis()[14] - 1.75).abs() < 1e-15);
        assert_eq!(g.axis()[7], 0.0);
    }

    #[test]
    fn small_ratios_are_rejected() {
        // R/h = 4 is an integer but below the minimum.
        let err = Grid::new(GridMode::Cartesian1d, 1.0, 0.25).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = Grid::new(GridMode::Cartesian1d, 1.0, 0.3).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(Grid::new(GridMode::Radial { dim: 1 }, 1.0, 0.1).is_err());
        assert!(Grid::new(GridMode::Cartesian1d, -1.0, 0.1).is_err());
    }

    #[test]
    fn radial_node_layout() {
        let g = Grid::new(GridMode::Radial { dim: 2 }, 2.0, 0.25).unwrap();
        assert_eq!(g.len(), 7);
        assert!((g.axis()[0] - 0.25).abs() < 1e-15);
        assert!((g.axis()[6] - 1.75).abs() < 1e-15);
    }

    #[test]
    fn cartesian2d_layout() {
        let g = Grid::new(GridMode::Cartesian2d, 4.0, 0.5).unwrap();
        assert_eq!(g.len(), 15 * 15);
        let n = g.node(16);
        assert_eq!(n.coords, [-3.0, -3.0]);
    }

    #[test]
    fn weights_tile_the_domain() {
        for (mode, r, h) in [
            (GridMode::Cartesian1d, 15.0, 0.005),
            (GridMode::Cartesian2d, 3.0, 0.1),
            (GridMode::Radial { dim: 2 }, 5.0, 0.05),
            (GridMode::Radial { dim: 3 }, 5.0, 0.05),
            (GridMode::Radial { dim: 5 }, 2.0, 0.1),
        ] {
            let g = Grid::new(mode, r, h).unwrap();
            assert!(g.weights().iter().all(|&w| w > 0.0));
            let total: f64 = g.weights().iter().sum();
            let exact = g.domain_measure();
            assert!(
                (total - exact).abs() <= 1e-12 * exact,
                "{mode}: {total} vs {exact}"
            );
        }
    }

    #[test]
    fn sphere_surfaces() {
        assert!((sphere_surface(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_surface(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_surface(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_surface(1) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mode_names_parse_back() {
        for mode in [
            GridMode::Cartesian1d,
            GridMode::Cartesian2d,
            GridMode::Radial { dim: 3 },
        ] {
            assert_eq!(GridMode::parse(&mode.name()).unwrap(), mode);
        }
        assert_eq!(
            GridMode::parse("radial(2)").unwrap(),
            GridMode::Radial { dim: 2 }
        );
        assert!(GridMode::parse("polar").is_err());
    }
}
