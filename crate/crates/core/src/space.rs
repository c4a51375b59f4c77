//! Piecewise-affine nonconforming space with face-mean degrees of freedom.
//!
//! On a triangle the basis function attached to local face `i` is `1 - 2 λ_i`, where
//! `λ_i` is the barycentric coordinate of the opposite vertex. It has mean one on face
//! `i` and mean zero on the other two faces.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, PartSet};
use crate::Point;

pub const DEFAULT_INTERPOLATION_DEGREE: usize = 9;

/// Value and gradient of the local basis function of face `local_face` on triangle `t`.
///
/// Points outside the triangle are evaluated by affine extrapolation.
pub fn basis_eval(mesh: &Mesh, t: usize, local_face: usize, x: Point) -> (f64, [f64; 2]) {
    let lambda = mesh.barycentric(t, x);
    let g = mesh.barycentric_gradients(t)[local_face];
    (1.0 - 2.0 * lambda[local_face], [-2.0 * g[0], -2.0 * g[1]])
}

/// Constant gradients of the three local basis functions of triangle `t`.
pub fn basis_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    mesh.barycentric_gradients(t).map(|g| [-2.0 * g[0], -2.0 * g[1]])
}

/// The space X_h^Γ: one unknown per face not lying on the essential part Γ.
#[derive(Debug, Clone)]
pub struct Space<'m> {
    mesh: &'m Mesh,
    essential: PartSet,
    dof_of_face: Vec<Option<usize>>,
    face_of_dof: Vec<usize>,
}

impl<'m> Space<'m> {
    /// Faces whose label lies in `essential` carry no unknown (their trace mean is zero).
    pub fn new(mesh: &'m Mesh, essential: PartSet) -> Self {
        let mut dof_of_face = Vec::with_capacity(mesh.n_faces());
        let mut face_of_dof = Vec::with_capacity(mesh.n_faces());
        for (f, face) in mesh.faces().iter().enumerate() {
            if essential.contains_face(face) {
                dof_of_face.push(None);
            } else {
                dof_of_face.push(Some(face_of_dof.len()));
                face_of_dof.push(f);
            }
        }
        Self { mesh, essential, dof_of_face, face_of_dof }
    }

    /// X_h^∅, all faces free.
    pub fn unconstrained(mesh: &'m Mesh) -> Self {
        Self::new(mesh, PartSet::EMPTY)
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn essential(&self) -> PartSet {
        self.essential
    }

    pub fn n_dofs(&self) -> usize {
        self.face_of_dof.len()
    }

    pub fn dof_of_face(&self, f: usize) -> Option<usize> {
        self.dof_of_face[f]
    }

    pub fn face_of_dof(&self, dof: usize) -> usize {
        self.face_of_dof[dof]
    }

    /// Unknowns attached to the three local faces of triangle `t`.
    pub fn local_dofs(&self, t: usize) -> [Option<usize>; 3] {
        self.mesh.triangle_faces(t).map(|f| self.dof_of_face[f])
    }

    pub fn same_mesh(&self, other: &Space<'_>) -> bool {
        std::ptr::eq(self.mesh, other.mesh)
    }

    pub fn zero(&self) -> FeFunction<'_> {
        FeFunction { space: self, coefficients: vec![0.0; self.n_dofs()] }
    }

    pub fn function(&self, coefficients: Vec<f64>) -> Result<FeFunction<'_>> {
        FeFunction::new(self, coefficients)
    }

    /// The interpolant r_h: every coefficient is the face average of `v`.
    pub fn interpolate(&self, v: impl Fn(Point) -> f64) -> FeFunction<'_> {
        self.interpolate_with_degree(v, DEFAULT_INTERPOLATION_DEGREE)
            .expect("default interpolation degree is supported")
    }

    pub fn interpolate_with_degree(&self, v: impl Fn(Point) -> f64, degree: usize) -> Result<FeFunction<'_>> {
        let mut coefficients = Vec::with_capacity(self.n_dofs());
        for &f in &self.face_of_dof {
            let rule = self.mesh.face_quadrature(f, degree)?;
            let integral: f64 = rule.iter().map(|&(p, w)| w * v(p)).sum();
            coefficients.push(integral / self.mesh.face(f).length);
        }
        FeFunction::new(self, coefficients)
    }
}

/// Which adjacent triangle a trace is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// A member of a [`Space`], stored as its face means.
#[derive(Debug, Clone)]
pub struct FeFunction<'a> {
    space: &'a Space<'a>,
    coefficients: Vec<f64>,
}

impl<'a> FeFunction<'a> {
    pub fn new(space: &'a Space<'a>, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != space.n_dofs() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a space with {} unknowns",
                coefficients.len(),
                space.n_dofs()
            )));
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("coefficient {i} is not finite")));
        }
        Ok(Self { space, coefficients })
    }

    pub fn space(&self) -> &'a Space<'a> {
        self.space
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.space.mesh
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<f64> {
        self.coefficients
    }

    /// Face mean on face `f` (zero on essential faces).
    pub fn face_mean(&self, f: usize) -> f64 {
        self.space.dof_of_face(f).map_or(0.0, |d| self.coefficients[d])
    }

    pub fn local_coefficients(&self, t: usize) -> [f64; 3] {
        self.space.local_dofs(t).map(|d| d.map_or(0.0, |d| self.coefficients[d]))
    }

    /// Value of the element polynomial of triangle `t` at `x`.
    pub fn eval(&self, t: usize, x: Point) -> f64 {
        let c = self.local_coefficients(t);
        let l = self.mesh().barycentric(t, x);
        (0..3).map(|i| c[i] * (1.0 - 2.0 * l[i])).sum()
    }

    pub fn grad(&self, t: usize) -> [f64; 2] {
        let c = self.local_coefficients(t);
        let g = basis_gradients(self.mesh(), t);
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += c[i] * g[i][0];
            out[1] += c[i] * g[i][1];
        }
        out
    }

    /// Traces on face `f` from the requested side.
    pub fn trace_values(&self, f: usize, side: Side, points: &[Point]) -> Result<Vec<f64>> {
        let face = self.mesh().face(f);
        let t = match side {
            Side::First => face.triangles[0],
            Side::Second => face.second().ok_or(Error::NoSecondSide(f))?,
        };
        Ok(points.iter().map(|&p| self.eval(t, p)).collect())
    }

    /// Jump `v|first - v|second` at `x` on face `f`; the one-sided trace on boundary faces.
    pub fn jump_at(&self, f: usize, x: Point) -> f64 {
        let face = self.mesh().face(f);
        let inner = self.eval(face.triangles[0], x);
        match face.second() {
            Some(t1) => inner - self.eval(t1, x),
            None => inner,
        }
    }

    /// Mean of the jump over face `f`, by exact (degree 1) quadrature.
    pub fn jump_mean(&self, f: usize) -> f64 {
        let rule = self.mesh().face_quadrature(f, 1).expect("degree 1 supported");
        let len = self.mesh().face(f).length;
        rule.iter().map(|&(p, w)| w * self.jump_at(f, p)).sum::<f64>() / len
    }

    pub fn scaled(&self, c: f64) -> FeFunction<'a> {
        FeFunction { space: self.space, coefficients: self.coefficients.iter().map(|v| c * v).collect() }
    }

    /// `self - other`, both in the same space.
    pub fn minus(&self, other: &FeFunction<'_>) -> Result<FeFunction<'a>> {
        if !std::ptr::eq(self.space, other.space) && self.space.n_dofs() != other.space.n_dofs() {
            return Err(Error::Dimension("functions live in different spaces".into()));
        }
        let coefficients = self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a - b).collect();
        Ok(FeFunction { space: self.space, coefficients })
    }

    /// Writes `face_index,midpoint_x,midpoint_y,coefficient` rows, one per unknown.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "face_index,midpoint_x,midpoint_y,coefficient")?;
        for (dof, &c) in self.coefficients.iter().enumerate() {
            let f = self.space.face_of_dof(dof);
            let m = self.mesh().face_midpoint(f);
            writeln!(out, "{},{:.16e},{:.16e},{:.16e}", f, m[0], m[1], c)?;
        }
        Ok(())
    }

    /// Vertex-averaged continuous part; vertices on the closure of `zero_on` are set to zero.
    pub fn conforming_part(&self, zero_on: PartSet) -> ConformingField<'a> {
        let mesh = self.mesh();
        let mut sum = vec![0.0; mesh.n_vertices()];
        let mut count = vec![0usize; mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let c = self.local_coefficients(t);
            for (i, &v) in tri.iter().enumerate() {
                // at vertex i: λ_i = 1, others 0
                let value: f64 = (0..3).map(|k| if k == i { -c[k] } else { c[k] }).sum();
                sum[v] += value;
                count[v] += 1;
            }
        }
        let mut values: Vec<f64> = sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect();
        if !zero_on.is_empty() {
            for face in mesh.faces().iter().filter(|f| zero_on.contains_face(f)) {
                for &v in &face.vertices {
                    values[v] = 0.0;
                }
            }
        }
        ConformingField { mesh, values }
    }
}

/// Continuous piecewise-affine field given by vertex values.
#[derive(Debug, Clone)]
pub struct ConformingField<'m> {
    mesh: &'m Mesh,
    values: Vec<f64>,
}

impl<'m> ConformingField<'m> {
    pub fn vertex_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: usize, x: Point) -> f64 {
        let l = self.mesh.barycentric(t, x);
        let tri = self.mesh.triangles()[t];
        (0..3).map(|i| l[i] * self.values[tri[i]]).sum()
    }

    pub fn grad(&self, t: usize) -> [f64; 2] {
        let g = self.mesh.barycentric_gradients(t);
        let tri = self.mesh.triangles()[t];
        let mut out = [0.0; 2];
        for i in 0..3 {
            out[0] += self.values[tri[i]] * g[i][0];
            out[1] += self.values[tri[i]] * g[i][1];
        }
        out
    }
}
