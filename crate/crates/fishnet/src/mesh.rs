//! Fishnet topology, the discrete-softening constitutive law, and stiffness
//! assembly.
//!
//! The net is collapsed to one axial degree of freedom per node. Nodes sit
//! on a grid of `rows` rows and `gaps + 1` columns; every node feeds the
//! same-row node and the next-row node (cyclic in rows) of the following
//! column, giving `2 * rows` links per gap and genuine two-dimensional
//! stress redistribution after damage. The left column is fixed, the right
//! column carries the prescribed displacement.

/// Configuration and state errors for the mesh and constitutive law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshError {
    /// Both grid dimensions must be at least 2.
    GridTooSmall { rows: usize, gaps: usize },
    /// Link length, area and modulus must be positive.
    BadElasticConstants,
    /// Softening slope must be strictly negative.
    SofteningSlopeNotNegative { kt: f64 },
    /// At least one softening jump is required.
    NoJumps,
    /// Jump count exceeded the per-link total.
    JumpsOutOfRange { jumps: u32, total: u32 },
}

impl std::fmt::Display for MeshError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshError::GridTooSmall { rows, gaps } => {
                write!(f, "grid must be at least 2x2, got {rows} rows x {gaps} gaps")
            }
            MeshError::BadElasticConstants => {
                write!(f, "link length, area and modulus must be positive")
            }
            MeshError::SofteningSlopeNotNegative { kt } => {
                write!(f, "softening slope must be negative, got {kt}")
            }
            MeshError::NoJumps => write!(f, "total jump count must be at least 1"),
            MeshError::JumpsOutOfRange { jumps, total } => {
                write!(f, "jump count {jumps} exceeds total {total}")
            }
        }
    }
}

impl std::error::Error for MeshError {}

/// One axial link between two node ids, living in one inter-column gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub gap: usize,
}

/// Immutable fishnet geometry plus per-link elastic constants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FishnetTopology {
    rows: usize,
    gaps: usize,
    link_length: f64,
    link_area: f64,
    modulus: f64,
    links: Vec<Link>,
}

impl FishnetTopology {
    /// Builds the diagonal-coupled grid. `rows >= 2`, `gaps >= 2`.
    pub fn build(
        rows: usize,
        gaps: usize,
        link_length: f64,
        link_area: f64,
        modulus: f64,
    ) -> Result<Self, MeshError> {
        if rows < 2 || gaps < 2 {
            return Err(MeshError::GridTooSmall { rows, gaps });
        }
        if !(link_length > 0.0 && link_area > 0.0 && modulus > 0.0) {
            return Err(MeshError::BadElasticConstants);
        }
        let mut links = Vec::with_capacity(2 * rows * gaps);
        for gap in 0..gaps {
            for row in 0..rows {
                let a = gap * rows + row;
                links.push(Link {
                    a,
                    b: (gap + 1) * rows + row,
                    gap,
                });
                links.push(Link {
                    a,
                    b: (gap + 1) * rows + (row + 1) % rows,
                    gap,
                });
            }
        }
        Ok(FishnetTopology {
            rows,
            gaps,
            link_length,
            link_area,
            modulus,
            links,
        })
    }

    /// Paper-scale default: 16 rows, 16 gaps (512 links), L = 0.01 mm,
    /// A = 1 mm^2, E = 1 MPa.
    pub fn with_default_constants(rows: usize, gaps: usize) -> Result<Self, MeshError> {
        FishnetTopology::build(rows, gaps, 0.01, 1.0, 1.0)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn gaps(&self) -> usize {
        self.gaps
    }

    pub fn link_length(&self) -> f64 {
        self.link_length
    }

    pub fn link_area(&self) -> f64 {
        self.link_area
    }

    pub fn modulus(&self) -> f64 {
        self.modulus
    }

    /// Undamaged link stiffness `K0 = E A / L` (force per displacement).
    pub fn k0(&self) -> f64 {
        self.modulus * self.link_area / self.link_length
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_count(&self) -> usize {
        self.rows * (self.gaps + 1)
    }

    pub fn node_id(&self, row: usize, col: usize) -> usize {
        col * self.rows + row
    }

    pub fn node_row_col(&self, node: usize) -> (usize, usize) {
        (node % self.rows, node / self.rows)
    }

    /// Nodes of the fixed (left) column.
    pub fn fixed_nodes(&self) -> std::ops::Range<usize> {
        0..self.rows
    }

    /// Nodes of the prescribed-displacement (right) column.
    pub fn prescribed_nodes(&self) -> std::ops::Range<usize> {
        self.gaps * self.rows..(self.gaps + 1) * self.rows
    }

    /// Maps a node to its reduced-system index, or `None` for boundary nodes.
    pub fn interior_dof(&self, node: usize) -> Option<usize> {
        let col = node / self.rows;
        if col == 0 || col == self.gaps {
            None
        } else {
            Some(node - self.rows)
        }
    }

    /// Number of unknowns in the reduced system.
    pub fn interior_count(&self) -> usize {
        self.rows * (self.gaps - 1)
    }

    /// Assembles the reduced stiffness matrix (dense, row-major) and the
    /// load vector equivalent to a unit displacement on the prescribed
    /// column. `stiffness[i]` is the current secant stiffness of link `i`;
    /// nodes flagged in `grounded` get `ground_k` added on the diagonal so
    /// that fully disconnected nodes keep the system positive definite
    /// without affecting any link force.
    pub fn assemble_unit_system(
        &self,
        stiffness: &[f64],
        grounded: &[bool],
        ground_k: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.interior_count();
        let mut matrix = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for (link, &k) in self.links.iter().zip(stiffness) {
            if k == 0.0 {
                continue;
            }
            let da = self.interior_dof(link.a);
            let db = self.interior_dof(link.b);
            match (da, db) {
                (Some(ia), Some(ib)) => {
                    matrix[ia * n + ia] += k;
                    matrix[ib * n + ib] += k;
                    matrix[ia * n + ib] -= k;
                    matrix[ib * n + ia] -= k;
                }
                (Some(ia), None) => {
                    matrix[ia * n + ia] += k;
                    if link.b >= self.gaps * self.rows {
                        rhs[ia] += k;
                    }
                }
                (None, Some(ib)) => {
                    matrix[ib * n + ib] += k;
                    if link.a >= self.gaps * self.rows {
                        rhs[ib] += k;
                    }
                }
                (None, None) => {}
            }
        }
        for (dof, &g) in grounded.iter().enumerate() {
            if g {
                matrix[dof * n + dof] += ground_k;
            }
        }
        (matrix, rhs)
    }
}

/// Discrete linear-softening law shared by all links of one net.
///
/// A link that has taken `j` of `J` jumps keeps residual strength
/// `s (J - j) / J` and is re-linearized with the secant stiffness through
/// the point where the original softening line (initial stiffness `k0`,
/// post-peak slope `kt < 0`) crosses that residual force.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SofteningLaw {
    k0: f64,
    kt: f64,
    total_jumps: u32,
}

impl SofteningLaw {
    pub fn new(k0: f64, kt: f64, total_jumps: u32) -> Result<Self, MeshError> {
        if kt >= 0.0 {
            return Err(MeshError::SofteningSlopeNotNegative { kt });
        }
        if total_jumps == 0 {
            return Err(MeshError::NoJumps);
        }
        Ok(SofteningLaw {
            k0,
            kt,
            total_jumps,
        })
    }

    /// Law with `kt = -ratio * k0`, the usual way of specifying steepness.
    pub fn from_ratio(k0: f64, kt_ratio: f64, total_jumps: u32) -> Result<Self, MeshError> {
        SofteningLaw::new(k0, -kt_ratio.abs() * k0, total_jumps)
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn kt(&self) -> f64 {
        self.kt
    }

    pub fn total_jumps(&self) -> u32 {
        self.total_jumps
    }

    /// Residual strength `s (J - j) / J` of a link with base strength `s`
    /// after `j` jumps.
    pub fn residual_strength(&self, strength: f64, jumps: u32) -> Result<f64, MeshError> {
        if jumps > self.total_jumps {
            return Err(MeshError::JumpsOutOfRange {
                jumps,
                total: self.total_jumps,
            });
        }
        let j = self.total_jumps;
        Ok(strength * (j - jumps) as f64 / j as f64)
    }

    /// Secant stiffness after `j` jumps,
    /// `K_r(j) = (J - j) K0 |Kt| / (J |Kt| + j K0)`,
    /// i.e. the stiffness of the line from the origin to the point on the
    /// softening branch where the force equals the residual strength.
    pub fn secant_stiffness(&self, jumps: u32) -> Result<f64, MeshError> {
        if jumps > self.total_jumps {
            return Err(MeshError::JumpsOutOfRange {
                jumps,
                total: self.total_jumps,
            });
        }
        let j = self.total_jumps as f64;
        let i = jumps as f64;
        let kt = -self.kt;
        Ok((j - i) * self.k0 * kt / (j * kt + i * self.k0))
    }

    /// Secant stiffnesses for every jump count `0 ..= J`.
    pub fn stiffness_table(&self) -> Vec<f64> {
        (0..=self.total_jumps)
            .map(|j| self.secant_stiffness(j).expect("j <= J by construction"))
            .collect()
    }
}

/// Random strength and damage state of a single link.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinkState {
    pub strength: f64,
    pub jumps: u32,
}
