//! Conforming triangular meshes of two stacked rectangles (fluid below,
//! porous above) that match along the shared interface.
//!
//! Edge orientation convention: every edge stores its vertices as
//! `(v0, v1)` with `v0 < v1`. The global unit normal of an edge is the
//! tangent `(p1 - p0)/|e|` rotated by +90 degrees, i.e. the "left" normal.
//! Raviart-Thomas sign conventions derive from this rule: a triangle sees
//! the edge with sign +1 when the global normal coincides with its outward
//! normal.

use crate::error::{Error, Result};

/// Subdomain tag for a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Fluid,
    Porous,
}

/// Tag carried by boundary edges and by the interface edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Fluid boundary away from the interface (velocity Dirichlet).
    GammaF,
    /// Porous boundary side carrying the pressure Dirichlet condition.
    GammaPD,
    /// Remaining porous boundary (normal flux condition).
    GammaP,
    /// The shared fluid/porous interface.
    Interface,
}

/// Unique mesh edge with adjacency and tag information.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Global vertex indices, `vertices[0] < vertices[1]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles (one for boundary edges, two for interior edges).
    pub tris: (usize, Option<usize>),
    pub boundary_tag: Option<BoundaryTag>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.tris.1.is_none()
    }
}

/// An edge lying on the interface, with the unit normal pointing from the
/// fluid region into the porous region.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceEdge {
    pub edge: usize,
    /// Unit normal from the fluid into the porous side.
    pub n_f: [f64; 2],
    /// Adjacent fluid triangle.
    pub fluid_tri: usize,
    /// Adjacent porous triangle.
    pub porous_tri: usize,
}

impl InterfaceEdge {
    /// Unit tangent, the normal rotated by -90 degrees.
    pub fn tangent(&self) -> [f64; 2] {
        [self.n_f[1], -self.n_f[0]]
    }
}

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Which porous boundary side carries the pressure Dirichlet condition.
/// The side facing the fluid is the interface and never admits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PorousSide {
    Top,
    Bottom,
    Left,
    Right,
}

/// Geometry of the two-subdomain computational domain: two axis-aligned
/// rectangles sharing one full horizontal edge, in either vertical order.
#[derive(Debug, Clone, Copy)]
pub struct DomainSpec {
    pub fluid_rect: Rect,
    pub porous_rect: Rect,
    pub dirichlet_porous_side: PorousSide,
}

impl DomainSpec {
    /// Unit square over unit square with the fluid below: fluid
    /// `(0,1) x (0,1)`, porous `(0,1) x (1,2)`, pressure Dirichlet data on
    /// the porous top side.
    pub fn unit_stacked() -> Self {
        DomainSpec {
            fluid_rect: Rect::new(0.0, 1.0, 0.0, 1.0),
            porous_rect: Rect::new(0.0, 1.0, 1.0, 2.0),
            dirichlet_porous_side: PorousSide::Top,
        }
    }

    /// Geometry of the verification case: porous `(0,1) x (0,1)` below the
    /// fluid `(0,1) x (1,2)`, pressure Dirichlet data on the porous bottom
    /// `(0,1) x {0}` where the exact porous pressure vanishes.
    pub fn benchmark() -> Self {
        DomainSpec {
            fluid_rect: Rect::new(0.0, 1.0, 1.0, 2.0),
            porous_rect: Rect::new(0.0, 1.0, 0.0, 1.0),
            dirichlet_porous_side: PorousSide::Bottom,
        }
    }

    /// True when the porous rectangle sits below the fluid one.
    pub fn porous_below(&self) -> bool {
        self.porous_rect.y1 <= self.fluid_rect.y0 + 1e-12
    }

    fn validate(&self) -> Result<()> {
        let f = &self.fluid_rect;
        let p = &self.porous_rect;
        if f.x0 >= f.x1 || f.y0 >= f.y1 || p.x0 >= p.x1 || p.y0 >= p.y1 {
            return Err(Error::Mesh("rectangles must have positive extent".into()));
        }
        let tol = 1e-12;
        if (f.x0 - p.x0).abs() > tol || (f.x1 - p.x1).abs() > tol {
            return Err(Error::Mesh(
                "fluid and porous rectangles must share the same x-range".into(),
            ));
        }
        let fluid_below = (f.y1 - p.y0).abs() <= tol;
        let porous_below = (p.y1 - f.y0).abs() <= tol;
        if !fluid_below && !porous_below {
            return Err(Error::Mesh(
                "rectangles must share exactly one full horizontal edge".into(),
            ));
        }
        // The side facing the fluid is the interface, not a boundary.
        let clash = (porous_below && self.dirichlet_porous_side == PorousSide::Top)
            || (fluid_below && self.dirichlet_porous_side == PorousSide::Bottom);
        if clash {
            return Err(Error::Mesh(
                "pressure Dirichlet side coincides with the interface".into(),
            ));
        }
        Ok(())
    }
}

/// Conforming two-subdomain triangulation with tagged boundaries and an
/// ordered interface edge list. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Vertex index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    pub triangle_region: Vec<Region>,
    pub edges: Vec<Edge>,
    /// `tri_edges[t][i]` is the global edge opposite local vertex `i`.
    pub tri_edges: Vec<[usize; 3]>,
    /// `tri_edge_signs[t][i] = +1` when the global edge normal coincides
    /// with the outward normal of triangle `t` on that edge.
    pub tri_edge_signs: Vec<[i8; 3]>,
    /// Interface edges ordered by midpoint position along the interface.
    pub interface_edges: Vec<InterfaceEdge>,
    /// Maximum triangle diameter.
    pub h: f64,
}

impl TriMesh {
    /// Build connectivity from raw geometry and validate the conforming and
    /// orientation invariants. Boundary tags are left unassigned; see
    /// [`classify_boundary`].
    pub fn from_raw(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        triangle_region: Vec<Region>,
    ) -> Result<TriMesh> {
        if triangles.len() != triangle_region.len() {
            return Err(Error::Dimension(
                "triangle_region length must match triangle count".into(),
            ));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::Mesh(format!("triangle {t} references vertex {v}")));
                }
            }
            let area = signed_area(&vertices, tri);
            if area <= 0.0 {
                return Err(Error::DegenerateTriangle { index: t, area });
            }
        }

        // Collect unique edges; ids assigned in sorted vertex-pair order so
        // the numbering is independent of traversal order.
        let mut pairs: Vec<[usize; 2]> = Vec::with_capacity(triangles.len() * 3);
        for tri in &triangles {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                pairs.push(if a < b { [a, b] } else { [b, a] });
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let edge_id = |pair: [usize; 2]| -> usize { pairs.binary_search(&pair).unwrap() };

        let mut edges: Vec<Edge> = pairs
            .iter()
            .map(|&vertices| Edge {
                vertices,
                tris: (usize::MAX, None),
                boundary_tag: None,
            })
            .collect();
        let mut adjacency_count = vec![0usize; edges.len()];

        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut tri_edge_signs = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            let mut ts = [0i8; 3];
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let pair = if a < b { [a, b] } else { [b, a] };
                let e = edge_id(pair);
                te[i] = e;
                adjacency_count[e] += 1;
                if adjacency_count[e] > 2 {
                    return Err(Error::Mesh(format!(
                        "edge ({}, {}) shared by more than two triangles",
                        pair[0], pair[1]
                    )));
                }
                if edges[e].tris.0 == usize::MAX {
                    edges[e].tris.0 = t;
                } else {
                    edges[e].tris.1 = Some(t);
                }
                // Outward normal of the CCW triangle on edge a->b is the
                // "right" normal of the traversal direction; the global
                // normal is the "left" normal of v0->v1.
                ts[i] = if a < b { -1 } else { 1 };
            }
            tri_edges.push(te);
            tri_edge_signs.push(ts);
        }

        // Interface edges: interior edges bounding one fluid and one porous
        // triangle.
        let mut interface_edges = Vec::new();
        for (e, edge) in edges.iter_mut().enumerate() {
            if let (t0, Some(t1)) = edge.tris {
                let (r0, r1) = (triangle_region[t0], triangle_region[t1]);
                if r0 != r1 {
                    edge.boundary_tag = Some(BoundaryTag::Interface);
                    let (fluid_tri, porous_tri) = if r0 == Region::Fluid {
                        (t0, t1)
                    } else {
                        (t1, t0)
                    };
                    let n_f = outward_normal(&vertices, &triangles[fluid_tri], edge.vertices);
                    interface_edges.push(InterfaceEdge {
                        edge: e,
                        n_f,
                        fluid_tri,
                        porous_tri,
                    });
                }
            }
        }
        interface_edges.sort_by(|a, b| {
            let ma = edge_midpoint(&vertices, &edges[a.edge]);
            let mb = edge_midpoint(&vertices, &edges[b.edge]);
            (ma[0], ma[1]).partial_cmp(&(mb[0], mb[1])).unwrap()
        });
        if interface_edges.is_empty() {
            return Err(Error::Mesh("mesh has no fluid/porous interface".into()));
        }

        let h = triangles
            .iter()
            .map(|tri| diameter(&vertices, tri))
            .fold(0.0, f64::max);

        Ok(TriMesh {
            vertices,
            triangles,
            triangle_region,
            edges,
            tri_edges,
            tri_edge_signs,
            interface_edges,
            h,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [
            self.vertices[tri[0]],
            self.vertices[tri[1]],
            self.vertices[tri[2]],
        ]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
    }

    /// Global unit normal of an edge (left normal of the v0->v1 tangent).
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        let len = self.edge_length(e);
        [-(pb[1] - pa[1]) / len, (pb[0] - pa[0]) / len]
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.n_triangles())
            .filter(|&t| self.triangle_region[t] == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Total length of the interface.
    pub fn interface_length(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|ie| self.edge_length(ie.edge))
            .sum()
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn diameter(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        let (a, b) = (vertices[tri[i]], vertices[tri[(i + 1) % 3]]);
        d = d.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
    }
    d
}

fn edge_midpoint(vertices: &[[f64; 2]], edge: &Edge) -> [f64; 2] {
    let (a, b) = (vertices[edge.vertices[0]], vertices[edge.vertices[1]]);
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Outward unit normal of a CCW triangle on one of its edges.
fn outward_normal(vertices: &[[f64; 2]], tri: &[usize; 3], edge_verts: [usize; 2]) -> [f64; 2] {
    // Find the traversal order of the edge within the CCW triangle.
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        if (a == edge_verts[0] && b == edge_verts[1]) || (a == edge_verts[1] && b == edge_verts[0])
        {
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            // Right normal of the CCW traversal points outward.
            return [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        }
    }
    unreachable!("edge does not belong to triangle");
}

/// Build a uniform right-triangle mesh of the two stacked rectangles with
/// `n` subdivisions per unit length. Every square cell is split along the
/// bottom-left to top-right diagonal so refinements are nested.
pub fn build_structured_mesh(spec: &DomainSpec, n: usize) -> Result<TriMesh> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::Mesh(format!(
            "subdivision count n = {n} is below the minimum of 2"
        )));
    }
    let (bottom, top, bottom_region) = if spec.porous_below() {
        (&spec.porous_rect, &spec.fluid_rect, Region::Porous)
    } else {
        (&spec.fluid_rect, &spec.porous_rect, Region::Fluid)
    };
    let nx = cells_along(bottom.x1 - bottom.x0, n)?;
    let ny_b = cells_along(bottom.y1 - bottom.y0, n)?;
    let ny_t = cells_along(top.y1 - top.y0, n)?;
    let ny = ny_b + ny_t;

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Hit the interface and the outer boundaries exactly.
        let y = if j <= ny_b {
            bottom.y0 + (bottom.y1 - bottom.y0) * (j as f64) / (ny_b as f64)
        } else {
            top.y0 + (top.y1 - top.y0) * ((j - ny_b) as f64) / (ny_t as f64)
        };
        for i in 0..=nx {
            let x = bottom.x0 + (bottom.x1 - bottom.x0) * (i as f64) / (nx as f64);
            vertices.push([x, y]);
        }
    }

    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    let mut regions = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let region = if j < ny_b {
            bottom_region
        } else if bottom_region == Region::Fluid {
            Region::Porous
        } else {
            Region::Fluid
        };
        for i in 0..nx {
            let (v00, v10) = (vid(i, j), vid(i + 1, j));
            let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
            regions.push(region);
            regions.push(region);
        }
    }

    let mesh = TriMesh::from_raw(vertices, triangles, regions)?;
    classify_boundary(mesh, spec)
}

fn cells_along(length: f64, n: usize) -> Result<usize> {
    let cells = length * n as f64;
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 || rounded < 1.0 {
        return Err(Error::Mesh(format!(
            "side length {length} is not an integral multiple of 1/{n}"
        )));
    }
    Ok(rounded as usize)
}

/// Assign boundary tags from the domain geometry. Every boundary edge must
/// end up tagged; interface edges keep the tag set during construction.
pub fn classify_boundary(mut mesh: TriMesh, spec: &DomainSpec) -> Result<TriMesh> {
    spec.validate()?;
    let f = &spec.fluid_rect;
    let p = &spec.porous_rect;
    let tol = 1e-12 * (1.0 + f.x1.abs().max(p.y1.abs()));

    let dirichlet_test = |m: [f64; 2]| -> bool {
        match spec.dirichlet_porous_side {
            PorousSide::Top => (m[1] - p.y1).abs() <= tol,
            PorousSide::Bottom => (m[1] - p.y0).abs() <= tol,
            PorousSide::Left => (m[0] - p.x0).abs() <= tol,
            PorousSide::Right => (m[0] - p.x1).abs() <= tol,
        }
    };
    let on_rect_boundary = |m: [f64; 2], r: &Rect| {
        (m[1] - r.y0).abs() <= tol
            || (m[1] - r.y1).abs() <= tol
            || (m[0] - r.x0).abs() <= tol
            || (m[0] - r.x1).abs() <= tol
    };

    let midpoints: Vec<[f64; 2]> = mesh
        .edges
        .iter()
        .map(|e| edge_midpoint(&mesh.vertices, e))
        .collect();
    for (e, edge) in mesh.edges.iter_mut().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let m = midpoints[e];
        let region = mesh.triangle_region[edge.tris.0];
        let tag = match region {
            Region::Fluid => on_rect_boundary(m, f).then_some(BoundaryTag::GammaF),
            Region::Porous => {
                if !on_rect_boundary(m, p) {
                    None
                } else if dirichlet_test(m) {
                    Some(BoundaryTag::GammaPD)
                } else {
                    Some(BoundaryTag::GammaP)
                }
            }
        };
        match tag {
            Some(t) => edge.boundary_tag = Some(t),
            None => {
                return Err(Error::Mesh(format!(
                    "boundary edge at ({}, {}) lies on no domain side",
                    m[0], m[1]
                )))
            }
        }
    }

    // Area bookkeeping guards against mis-specified geometry.
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    if rel(mesh.region_area(Region::Fluid), f.area()) > 1e-12 {
        return Err(Error::Mesh("fluid triangle areas do not sum to |Omega_f|".into()));
    }
    if rel(mesh.region_area(Region::Porous), p.area()) > 1e-12 {
        return Err(Error::Mesh("porous triangle areas do not sum to |Omega_p|".into()));
    }
    Ok(mesh)
}
