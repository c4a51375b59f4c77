//! Triangulations of a rectangle with enumerated, oriented and tagged faces.

pub mod io;

pub use io::{read_mesh, write_mesh};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng::signed_unit;
use crate::Point;

const MAX_JITTER_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    x_max: f64,
    y_max: f64,
}

impl Rect {
    pub fn new(x_max: f64, y_max: f64) -> Result<Self> {
        if !(x_max > 0.0 && x_max.is_finite() && y_max > 0.0 && y_max.is_finite()) {
            return Err(Error::Mesh(format!("rectangle sides must be positive, got {x_max} x {y_max}")));
        }
        Ok(Self { x_max, y_max })
    }

    /// The domain (0, π) × (0, 1).
    pub fn hadamard() -> Self {
        Self { x_max: std::f64::consts::PI, y_max: 1.0 }
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn area(&self) -> f64 {
        self.x_max * self.y_max
    }
}

/// Label carried by every boundary face.
///
/// `GammaC` is the Cauchy boundary, `GammaDOnly` is the part of the Dirichlet boundary
/// without flux data and `GammaDPrime` is the rest of the boundary (no data at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryPart {
    GammaC,
    GammaDOnly,
    GammaDPrime,
}

impl BoundaryPart {
    pub const ALL: [BoundaryPart; 3] = [BoundaryPart::GammaC, BoundaryPart::GammaDOnly, BoundaryPart::GammaDPrime];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryPart::GammaC => "gamma_c",
            BoundaryPart::GammaDOnly => "gamma_d_only",
            BoundaryPart::GammaDPrime => "gamma_d_prime",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    fn bit(self) -> u8 {
        match self {
            BoundaryPart::GammaC => 1,
            BoundaryPart::GammaDOnly => 2,
            BoundaryPart::GammaDPrime => 4,
        }
    }
}

/// A set of boundary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PartSet(u8);

impl PartSet {
    pub const EMPTY: PartSet = PartSet(0);
    pub const GAMMA_C: PartSet = PartSet(1);
    /// Γ_D = Γ_C ∪ (Γ_D \ Γ_C)
    pub const GAMMA_D: PartSet = PartSet(1 | 2);
    /// Γ_C' = ∂Ω \ Γ_C
    pub const GAMMA_C_PRIME: PartSet = PartSet(2 | 4);
    pub const GAMMA_D_PRIME: PartSet = PartSet(4);

    pub fn of(parts: &[BoundaryPart]) -> Self {
        PartSet(parts.iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn contains(self, part: BoundaryPart) -> bool {
        self.0 & part.bit() != 0
    }

    /// True when the face is a boundary face whose label lies in the set.
    pub fn contains_face(self, face: &Face) -> bool {
        face.part.is_some_and(|p| self.contains(p))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone)]
pub struct Face {
    /// Endpoints, ordered counter-clockwise with respect to `triangles[0]`.
    pub vertices: [usize; 2],
    /// Adjacent triangles; the first has the lower index.
    pub triangles: [usize; 2],
    pub n_adjacent: usize,
    /// Outward normal of Ω on the boundary; points from `triangles[0]` to `triangles[1]` inside.
    pub normal: [f64; 2],
    pub length: f64,
    /// Local index of this face in each adjacent triangle (face i is opposite vertex i).
    pub local_index: [usize; 2],
    pub part: Option<BoundaryPart>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.n_adjacent == 1
    }

    pub fn is_interior(&self) -> bool {
        self.n_adjacent == 2
    }

    pub fn second(&self) -> Option<usize> {
        (self.n_adjacent == 2).then_some(self.triangles[1])
    }
}

/// Conforming triangulation of a rectangle.
///
/// Triangles are stored counter-clockwise. Local face `i` of a triangle is the edge
/// opposite its local vertex `i`.
#[derive(Debug, Clone)]
pub struct Mesh {
    rect: Rect,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    triangle_faces: Vec<[usize; 3]>,
    faces: Vec<Face>,
    areas: Vec<f64>,
    diameters: Vec<f64>,
    bary_grads: Vec<[[f64; 2]; 3]>,
    h_max: f64,
    grid: Option<(usize, usize)>,
}

impl Mesh {
    /// Builds the face structure of a triangulation. Clockwise triangles are reoriented.
    pub fn from_parts(rect: Rect, vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Mesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Mesh(format!("triangle {t} references a missing vertex")));
            }
            let a2 = signed_area2(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if a2 < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut areas = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        let mut bary_grads = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let p = tri.map(|v| vertices[v]);
            let a2 = signed_area2(p[0], p[1], p[2]);
            if !(a2 > 0.0) {
                return Err(Error::Mesh(format!("triangle {t} is degenerate")));
            }
            areas.push(0.5 * a2);
            diameters.push(dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0])));
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                g[i] = [(p[j][1] - p[k][1]) / a2, (p[k][0] - p[j][0]) / a2];
            }
            bary_grads.push(g);
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(2 * triangles.len());
        let mut faces: Vec<Face> = Vec::with_capacity(2 * triangles.len());
        let mut triangle_faces = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.n_adjacent == 2 {
                            return Err(Error::Mesh(format!("edge {a}-{b} shared by more than two triangles")));
                        }
                        face.triangles[1] = t;
                        face.local_index[1] = i;
                        face.n_adjacent = 2;
                        triangle_faces[t][i] = f;
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let length = dist(pa, pb);
                        let normal = [(pb[1] - pa[1]) / length, -(pb[0] - pa[0]) / length];
                        lookup.insert(key, faces.len());
                        triangle_faces[t][i] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            triangles: [t, usize::MAX],
                            n_adjacent: 1,
                            normal,
                            length,
                            local_index: [i, usize::MAX],
                            part: None,
                        });
                    }
                }
            }
        }

        let h_max = diameters.iter().copied().fold(0.0, f64::max);
        let mesh = Self { rect, vertices, triangles, triangle_faces, faces, areas, diameters, bary_grads, h_max, grid: None };
        mesh.check_fitted_to_rect()?;
        Ok(mesh)
    }

    fn check_fitted_to_rect(&self) -> Result<()> {
        let tol = 1e-12 * (self.rect.x_max + self.rect.y_max);
        for (f, face) in self.faces.iter().enumerate().filter(|(_, f)| f.is_boundary()) {
            let m = self.face_midpoint(f);
            let on_side = m[0].abs() < tol
                || (m[0] - self.rect.x_max).abs() < tol
                || m[1].abs() < tol
                || (m[1] - self.rect.y_max).abs() < tol;
            if !on_side {
                return Err(Error::Mesh(format!("boundary face {f} (vertices {:?}) is not on the rectangle", face.vertices)));
            }
        }
        let area: f64 = self.areas.iter().sum();
        if (area - self.rect.area()).abs() > 1e-10 * self.rect.area() {
            return Err(Error::Mesh(format!("triangle areas sum to {area}, rectangle area is {}", self.rect.area())));
        }
        Ok(())
    }

    /// Criss-cross triangulation of an `nx` × `ny` grid, each cell cut along a diagonal whose
    /// direction alternates with the cell parity. Interior vertices are displaced by at most
    /// `jitter · min(dx, dy)` using a deterministic stream keyed by `seed`.
    pub fn build_structured(rect: Rect, nx: usize, ny: usize, jitter: f64, seed: u64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh(format!("grid must have at least one cell per direction, got {nx} x {ny}")));
        }
        if !(0.0..0.3).contains(&jitter) {
            return Err(Error::Mesh(format!("jitter must lie in [0, 0.3), got {jitter}")));
        }
        let dx = rect.x_max / nx as f64;
        let dy = rect.y_max / ny as f64;
        let idx = |i: usize, j: usize| j * (nx + 1) + i;

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([v00, v10, v11]);
                    triangles.push([v00, v11, v01]);
                } else {
                    triangles.push([v00, v10, v01]);
                    triangles.push([v10, v11, v01]);
                }
            }
        }

        let grid_point = |i: usize, j: usize| {
            // pin the far sides exactly
            let x = if i == nx { rect.x_max } else { i as f64 * dx };
            let y = if j == ny { rect.y_max } else { j as f64 * dy };
            [x, y]
        };

        let amplitude = jitter * dx.min(dy) / std::f64::consts::SQRT_2;
        for attempt in 0..MAX_JITTER_ATTEMPTS {
            let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
            for j in 0..=ny {
                for i in 0..=nx {
                    let mut p = grid_point(i, j);
                    let interior = i > 0 && i < nx && j > 0 && j < ny;
                    if interior && amplitude > 0.0 {
                        let key = idx(i, j) as u64;
                        let stream = seed.wrapping_add(attempt.wrapping_mul(0x5851_f42d_4c95_7f2d));
                        p[0] += amplitude * signed_unit(stream, key, 0);
                        p[1] += amplitude * signed_unit(stream, key, 1);
                    }
                    vertices.push(p);
                }
            }
            let inverted = triangles
                .iter()
                .any(|t| signed_area2(vertices[t[0]], vertices[t[1]], vertices[t[2]]) <= 0.0);
            if inverted {
                continue;
            }
            let mut mesh = Self::from_parts(rect, vertices, triangles)?;
            mesh.grid = Some((nx, ny));
            return Ok(mesh);
        }
        Err(Error::Mesh(format!("jitter {jitter} produced inverted triangles in {MAX_JITTER_ATTEMPTS} attempts")))
    }

    /// Tags every boundary face and validates the resulting layout.
    pub fn tag_boundary(mut self, layout: BoundaryLayout<'_>) -> Result<Self> {
        let tol = 1e-12 * (self.rect.x_max + self.rect.y_max);
        let rect = self.rect;
        for f in 0..self.faces.len() {
            if !self.faces[f].is_boundary() {
                continue;
            }
            let m = self.face_midpoint(f);
            let part = match &layout {
                BoundaryLayout::Hadamard => {
                    if m[1].abs() < tol {
                        Some(BoundaryPart::GammaC)
                    } else if m[0].abs() < tol || (m[0] - rect.x_max).abs() < tol {
                        Some(BoundaryPart::GammaDOnly)
                    } else if (m[1] - rect.y_max).abs() < tol {
                        Some(BoundaryPart::GammaDPrime)
                    } else {
                        None
                    }
                }
                BoundaryLayout::Custom(pred) => pred(m),
            };
            match part {
                Some(p) => self.faces[f].part = Some(p),
                None => return Err(Error::Tagging(format!("boundary face {f} at {m:?} left untagged"))),
            }
        }
        self.validate_tagging()?;
        Ok(self)
    }

    /// Γ_C and Γ_D' must both have positive measure, every boundary face must be labelled.
    pub fn validate_tagging(&self) -> Result<()> {
        let mut measure = [0.0; 3];
        for (f, face) in self.faces.iter().enumerate() {
            match (face.is_boundary(), face.part) {
                (true, Some(p)) => measure[p as usize] += face.length,
                (true, None) => return Err(Error::Tagging(format!("boundary face {f} has no label"))),
                (false, Some(_)) => return Err(Error::Tagging(format!("interior face {f} carries a boundary label"))),
                (false, None) => {}
            }
        }
        if measure[BoundaryPart::GammaC as usize] <= 0.0 {
            return Err(Error::Tagging("Cauchy boundary is empty".into()));
        }
        if measure[BoundaryPart::GammaDPrime as usize] <= 0.0 {
            return Err(Error::Tagging("Dirichlet boundary covers the whole boundary; its complement must have positive measure".into()));
        }
        Ok(())
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    /// Grid resolution when the mesh came from [`Mesh::build_structured`].
    pub fn grid(&self) -> Option<(usize, usize)> {
        self.grid
    }

    /// Largest element diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn diameter(&self, t: usize) -> f64 {
        self.diameters[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Global face indices of triangle `t`; entry `i` is opposite local vertex `i`.
    pub fn triangle_faces(&self, t: usize) -> [usize; 3] {
        self.triangle_faces[t]
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Gradients of the barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        self.bary_grads[t]
    }

    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let g = &self.bary_grads[t];
        let p = self.triangle_points(t);
        let mut l = [0.0; 3];
        for i in 0..3 {
            l[i] = 1.0 + g[i][0] * (x[0] - p[i][0]) + g[i][1] * (x[1] - p[i][1]);
        }
        l
    }

    pub fn centroid(&self, t: usize) -> Point {
        let p = self.triangle_points(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn face_points(&self, f: usize) -> [Point; 2] {
        self.faces[f].vertices.map(|v| self.vertices[v])
    }

    pub fn face_midpoint(&self, f: usize) -> Point {
        let [a, b] = self.face_points(f);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Outward normal of triangle `t` on its local face `i`.
    pub fn outward_normal(&self, t: usize, i: usize) -> [f64; 2] {
        let face = &self.faces[self.triangle_faces[t][i]];
        if face.triangles[0] == t {
            face.normal
        } else {
            [-face.normal[0], -face.normal[1]]
        }
    }

    pub fn face_quadrature(&self, f: usize, degree: usize) -> Result<Vec<(Point, f64)>> {
        let [a, b] = self.face_points(f);
        quadrature::segment_rule(a, b, degree)
    }

    pub fn triangle_quadrature(&self, t: usize, degree: usize) -> Result<Vec<(Point, f64)>> {
        quadrature::triangle_rule(self.triangle_points(t), degree)
    }

    /// Total length of the boundary faces carrying `part`.
    pub fn boundary_measure(&self, part: BoundaryPart) -> f64 {
        self.faces.iter().filter(|f| f.part == Some(part)).map(|f| f.length).sum()
    }
}

/// How boundary faces are labelled.
pub enum BoundaryLayout<'a> {
    /// Γ_C on y = 0, Γ_D \ Γ_C on x ∈ {0, x_max}, Γ_D' on y = y_max.
    Hadamard,
    /// Caller-supplied labelling evaluated at face midpoints.
    Custom(&'a dyn Fn(Point) -> Option<BoundaryPart>),
}

fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn dist(a: Point, b: Point) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}
