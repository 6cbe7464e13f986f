//! Problem data for the convection-diffusion model
//! `-div(alpha grad u) + div(beta u) = f`.
//!
//! Coefficients and exact solutions are evaluated with an element context so
//! that piecewise-defined data takes its one-sided value: the element
//! centroid (or index) selects the region, while the evaluation point may
//! sit on an interface edge shared with a neighbor from another region.

use crate::mesh::{Mesh, Rect};
use crate::vec2;
use crate::{CfoError, Point, Result};

/// Symmetric 2x2 coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub fn identity() -> SymMat2 {
        SymMat2 {
            xx: 1.0,
            xy: 0.0,
            yy: 1.0,
        }
    }

    pub fn diag(xx: f64, yy: f64) -> SymMat2 {
        SymMat2 { xx, xy: 0.0, yy }
    }

    pub fn isotropic(k: f64) -> SymMat2 {
        SymMat2::diag(k, k)
    }

    pub fn mul(&self, v: Point) -> Point {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// Smaller eigenvalue; positive iff the matrix is positive definite.
    pub fn min_eigenvalue(&self) -> f64 {
        let mid = 0.5 * (self.xx + self.yy);
        let rad = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        mid - rad
    }
}

/// Element whose one-sided trace is being evaluated.
#[derive(Debug, Clone, Copy)]
pub struct ElemCtx {
    pub elem: usize,
    pub centroid: Point,
}

pub type ScalarField = Box<dyn Fn(Point, ElemCtx) -> f64 + Send + Sync>;
pub type VectorField = Box<dyn Fn(Point, ElemCtx) -> Point + Send + Sync>;
pub type MatrixField = Box<dyn Fn(Point, ElemCtx) -> SymMat2 + Send + Sync>;
pub type BoundaryValue = Box<dyn Fn(Point) -> f64 + Send + Sync>;
pub type BoundaryPredicate = Box<dyn Fn(Point) -> bool + Send + Sync>;

/// Manufactured solution used for error reporting.
pub struct ExactSolution {
    pub u: ScalarField,
    pub grad_u: VectorField,
}

/// Full description of one boundary-value problem.
pub struct ProblemSpec {
    pub label: String,
    pub domain: Rect,
    /// Diffusion matrix; must be symmetric positive definite wherever it is
    /// evaluated.
    pub alpha: MatrixField,
    /// Convection field.
    pub beta: VectorField,
    /// Volumetric source.
    pub source: ScalarField,
    /// Dirichlet boundary values.
    pub dirichlet: BoundaryValue,
    /// Classify a boundary edge (by midpoint) as Dirichlet.
    pub is_dirichlet: BoundaryPredicate,
    /// Classify a boundary edge (by midpoint) as zero-flux Neumann.
    pub is_neumann: BoundaryPredicate,
    /// Optional per-element weight for the flux-recovery functional
    /// (evaluated at the centroid); `None` means 1.
    pub tau: Option<ScalarField>,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    /// Convenience constructor for problems with Dirichlet data on the whole
    /// boundary.
    pub fn all_dirichlet(
        label: impl Into<String>,
        domain: Rect,
        alpha: MatrixField,
        beta: VectorField,
        source: ScalarField,
        dirichlet: BoundaryValue,
        exact: Option<ExactSolution>,
    ) -> ProblemSpec {
        ProblemSpec {
            label: label.into(),
            domain,
            alpha,
            beta,
            source,
            dirichlet,
            is_dirichlet: Box::new(|_| true),
            is_neumann: Box::new(|_| false),
            tau: None,
            exact,
        }
    }

    /// Per-element functional weight (defaults to 1).
    pub fn tau_at(&self, ctx: ElemCtx) -> f64 {
        match &self.tau {
            Some(t) => t(ctx.centroid, ctx),
            None => 1.0,
        }
    }

    /// One-sided exact flux `-(alpha grad u + beta u) . n` at `x`, seen from
    /// the element in `ctx`. Requires an exact solution.
    pub fn exact_flux(&self, x: Point, ctx: ElemCtx, normal: Point) -> Result<f64> {
        let exact = self.exact.as_ref().ok_or_else(|| {
            CfoError::Analysis(format!("problem '{}' has no exact solution", self.label))
        })?;
        let g = (exact.grad_u)(x, ctx);
        let u = (exact.u)(x, ctx);
        let a = (self.alpha)(x, ctx);
        let b = (self.beta)(x, ctx);
        Ok(-(vec2::dot(a.mul(g), normal) + u * vec2::dot(b, normal)))
    }
}

/// Boundary role of a mesh entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    Neumann,
}

/// Edge and node classification for one problem on one mesh.
#[derive(Debug, Clone)]
pub struct BoundaryTags {
    pub edge: Vec<BoundaryTag>,
    pub node: Vec<BoundaryTag>,
}

/// Classify boundary edges by their midpoints and propagate to nodes. A node
/// is Dirichlet as soon as one of its boundary edges is (corners shared by a
/// Dirichlet and a Neumann side carry the Dirichlet value).
pub fn classify_boundary(mesh: &Mesh, spec: &ProblemSpec) -> Result<BoundaryTags> {
    let mut edge = vec![BoundaryTag::Interior; mesh.num_edges()];
    let mut node = vec![BoundaryTag::Interior; mesh.num_nodes()];
    for e in 0..mesh.num_edges() {
        if !mesh.edge_boundary[e] {
            continue;
        }
        let mid = mesh.edge_midpoint(e);
        let dir = (spec.is_dirichlet)(mid);
        let neu = (spec.is_neumann)(mid);
        edge[e] = match (dir, neu) {
            (true, false) => BoundaryTag::Dirichlet,
            (false, true) => BoundaryTag::Neumann,
            (true, true) => {
                return Err(CfoError::Assembly(format!(
                    "boundary edge {e} at ({:.6}, {:.6}) is classified as both Dirichlet and Neumann",
                    mid[0], mid[1]
                )))
            }
            (false, false) => {
                return Err(CfoError::Assembly(format!(
                    "boundary edge {e} at ({:.6}, {:.6}) is classified as neither Dirichlet nor Neumann",
                    mid[0], mid[1]
                )))
            }
        };
    }
    for e in 0..mesh.num_edges() {
        if edge[e] == BoundaryTag::Dirichlet {
            node[mesh.edges[e][0]] = BoundaryTag::Dirichlet;
            node[mesh.edges[e][1]] = BoundaryTag::Dirichlet;
        }
    }
    for e in 0..mesh.num_edges() {
        if edge[e] == BoundaryTag::Neumann {
            for &v in &mesh.edges[e] {
                if node[v] == BoundaryTag::Interior {
                    node[v] = BoundaryTag::Neumann;
                }
            }
        }
    }
    Ok(BoundaryTags { edge, node })
}
