//! Bilinear and linear forms of the stabilized primal/dual method.
//!
//! Matrices coupling the two fields are stored with test functions on the rows:
//! `A[i, j] = a_h(φ_j, ψ_i)` for trial `φ_j ∈ V_h` and test `ψ_i ∈ W_h`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{Face, Mesh, PartSet};
use crate::quadrature;
use crate::space::{basis_gradients, Space};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::Point;

pub type ScalarField = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub fn field(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> ScalarField {
    Arc::new(f)
}

pub fn zero_field() -> ScalarField {
    Arc::new(|_| 0.0)
}

/// Penalty parameters γ_V, γ_W and γ_bc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabParams {
    gamma_v: f64,
    gamma_w: f64,
    gamma_bc: f64,
}

impl StabParams {
    pub fn new(gamma_v: f64, gamma_w: f64, gamma_bc: f64) -> Result<Self> {
        for (name, v) in [("gamma_v", gamma_v), ("gamma_w", gamma_w), ("gamma_bc", gamma_bc)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { gamma_v, gamma_w, gamma_bc })
    }

    pub fn gamma_v(&self) -> f64 {
        self.gamma_v
    }

    pub fn gamma_w(&self) -> f64 {
        self.gamma_w
    }

    pub fn gamma_bc(&self) -> f64 {
        self.gamma_bc
    }

    /// Proxy for the inf-sup smallness condition on γ_V γ_W (the true bound involves
    /// mesh constants that are not computed). Only used for warnings.
    pub fn small_product(&self) -> bool {
        self.gamma_v * self.gamma_w <= 1.0
    }
}

/// Dual stabilization s_W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabKind {
    /// γ_W (∇z, ∇w) over elements.
    GradLS,
    /// γ_W h_F⁻¹ ([z], [w]) over faces; adjoint consistent.
    JumpPenalty,
}

impl StabKind {
    pub fn name(self) -> &'static str {
        match self {
            StabKind::GradLS => "ls",
            StabKind::JumpPenalty => "jump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ls" => Some(StabKind::GradLS),
            "jump" => Some(StabKind::JumpPenalty),
            _ => None,
        }
    }
}

impl fmt::Display for StabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the boundary conditions enter the discrete spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcPath {
    /// Zero face means on Γ_D in V_h and on Γ_C' in W_h.
    Strong,
    /// Unconstrained spaces with consistent boundary penalty terms.
    Weak,
}

impl BcPath {
    pub fn name(self) -> &'static str {
        match self {
            BcPath::Strong => "strong",
            BcPath::Weak => "weak",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strong" => Some(BcPath::Strong),
            "weak" => Some(BcPath::Weak),
            _ => None,
        }
    }
}

impl fmt::Display for BcPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadratureDegrees {
    pub face: usize,
    pub triangle: usize,
}

impl Default for QuadratureDegrees {
    fn default() -> Self {
        Self { face: 9, triangle: 6 }
    }
}

/// Everything that selects a discrete problem besides the mesh and the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formulation {
    pub params: StabParams,
    pub kind: StabKind,
    pub bc: BcPath,
    pub quad: QuadratureDegrees,
}

impl Formulation {
    pub fn new(params: StabParams, kind: StabKind, bc: BcPath) -> Self {
        Self { params, kind, bc, quad: QuadratureDegrees::default() }
    }

    /// V_h: X_h^{Γ_D} on the strong path, X_h^∅ on the weak path.
    pub fn primal_space<'m>(&self, mesh: &'m Mesh) -> Space<'m> {
        match self.bc {
            BcPath::Strong => Space::new(mesh, PartSet::GAMMA_D),
            BcPath::Weak => Space::unconstrained(mesh),
        }
    }

    /// W_h: X_h^{Γ_C'} on the strong path, X_h^∅ on the weak path.
    pub fn dual_space<'m>(&self, mesh: &'m Mesh) -> Space<'m> {
        match self.bc {
            BcPath::Strong => Space::new(mesh, PartSet::GAMMA_C_PRIME),
            BcPath::Weak => Space::unconstrained(mesh),
        }
    }
}

/// Source f, flux ψ on Γ_C, Dirichlet datum g on Γ_D and optional perturbations.
#[derive(Clone)]
pub struct ProblemData {
    pub f: ScalarField,
    pub psi: ScalarField,
    pub g: ScalarField,
    pub delta_f: Option<ScalarField>,
    pub delta_psi: Option<ScalarField>,
}

impl ProblemData {
    pub fn new(f: ScalarField, psi: ScalarField, g: ScalarField) -> Self {
        Self { f, psi, g, delta_f: None, delta_psi: None }
    }

    pub fn with_perturbation(mut self, delta_f: ScalarField, delta_psi: ScalarField) -> Self {
        self.delta_f = Some(delta_f);
        self.delta_psi = Some(delta_psi);
        self
    }

    pub fn is_perturbed(&self) -> bool {
        self.delta_f.is_some() || self.delta_psi.is_some()
    }
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData").field("perturbed", &self.is_perturbed()).finish()
    }
}

/// Element stiffness `|κ| ∇φ_i · ∇φ_j`.
pub fn local_stiffness(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let g = basis_gradients(mesh, t);
    let a = mesh.area(t);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Broken stiffness `Σ_κ (∇φ_j, ∇ψ_i)_κ` between two spaces on one mesh.
fn add_volume_stiffness(trial: &Space<'_>, test: &Space<'_>, scale: f64, out: &mut TripletBuilder) {
    let mesh = trial.mesh();
    for t in 0..mesh.n_triangles() {
        let k = local_stiffness(mesh, t);
        let rows = test.local_dofs(t);
        let cols = trial.local_dofs(t);
        for i in 0..3 {
            let Some(r) = rows[i] else { continue };
            for j in 0..3 {
                if let Some(c) = cols[j] {
                    out.push(r, c, scale * k[i][j]);
                }
            }
        }
    }
}

/// Basis traces on face `f`: `(dof, sign, triangle, local index)` for every contributing
/// local basis function, with sign −1 on the second side so the sum is the jump.
fn jump_stencil(space: &Space<'_>, face: &Face) -> Vec<(Option<usize>, f64, usize, usize)> {
    let mut out = Vec::with_capacity(6);
    for side in 0..face.n_adjacent {
        let t = face.triangles[side];
        let sign = if side == 0 { 1.0 } else { -1.0 };
        let dofs = space.local_dofs(t);
        for i in 0..3 {
            out.push((dofs[i], sign, t, i));
        }
    }
    out
}

/// `weight · h_F⁻¹ ∫_F [u][v]` on one face, exact with two Gauss points.
fn add_face_penalty(space: &Space<'_>, f: usize, weight: f64, out: &mut TripletBuilder) {
    let mesh = space.mesh();
    let face = mesh.face(f);
    let rule = mesh.face_quadrature(f, 3).expect("degree 3 supported");
    let stencil = jump_stencil(space, face);
    // traces of each stencil entry at the quadrature points
    let traces: Vec<Vec<f64>> = stencil
        .iter()
        .map(|&(_, sign, t, i)| {
            rule.iter()
                .map(|&(p, _)| {
                    let l = mesh.barycentric(t, p);
                    sign * (1.0 - 2.0 * l[i])
                })
                .collect()
        })
        .collect();
    let scale = weight / face.length;
    for (a, &(da, ..)) in stencil.iter().enumerate() {
        let Some(r) = da else { continue };
        for (b, &(db, ..)) in stencil.iter().enumerate() {
            let Some(c) = db else { continue };
            let integral: f64 = rule.iter().enumerate().map(|(q, &(_, w))| w * traces[a][q] * traces[b][q]).sum();
            out.push(r, c, scale * integral);
        }
    }
}

fn check_same_mesh(a: &Space<'_>, b: &Space<'_>) -> Result<()> {
    if a.same_mesh(b) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

/// a_h with rows indexed by `space_w` and columns by `space_v`.
///
/// On the weak path the consistency terms `-∫_{Γ_C'} ∇v·n w` and `-∫_{Γ_D} ∇w·n v` are
/// added; both spaces must then be unconstrained.
pub fn assemble_a(space_v: &Space<'_>, space_w: &Space<'_>, bc: BcPath) -> Result<SparseMatrix> {
    check_same_mesh(space_v, space_w)?;
    let mesh = space_v.mesh();
    let mut out = TripletBuilder::with_capacity(space_w.n_dofs(), space_v.n_dofs(), 9 * mesh.n_triangles());
    add_volume_stiffness(space_v, space_w, 1.0, &mut out);
    if bc == BcPath::Weak {
        if !space_v.essential().is_empty() || !space_w.essential().is_empty() {
            return Err(Error::InvalidParameter("weak boundary path needs unconstrained spaces".into()));
        }
        for face in mesh.faces() {
            let on_c_prime = PartSet::GAMMA_C_PRIME.contains_face(face);
            let on_d = PartSet::GAMMA_D.contains_face(face);
            if !(on_c_prime || on_d) {
                continue;
            }
            let t = face.triangles[0];
            let i_f = face.local_index[0];
            let g = basis_gradients(mesh, t);
            let n = face.normal;
            // ∫_F φ_k = |F| δ_{k, i_f}
            let len = face.length;
            let vd = space_v.local_dofs(t);
            let wd = space_w.local_dofs(t);
            if on_c_prime {
                if let Some(r) = wd[i_f] {
                    for j in 0..3 {
                        if let Some(c) = vd[j] {
                            out.push(r, c, -dot(g[j], n) * len);
                        }
                    }
                }
            }
            if on_d {
                if let Some(c) = vd[i_f] {
                    for k in 0..3 {
                        if let Some(r) = wd[k] {
                            out.push(r, c, -dot(g[k], n) * len);
                        }
                    }
                }
            }
        }
    }
    Ok(out.build())
}

/// Weak-path a_h (both spaces unconstrained).
pub fn assemble_a_weak(space_v: &Space<'_>, space_w: &Space<'_>) -> Result<SparseMatrix> {
    assemble_a(space_v, space_w, BcPath::Weak)
}

/// Primal stabilization `Σ_{F ∈ F_i ∪ F_{Γ_D}} γ_V h_F⁻¹ ([u], [v])_F`.
pub fn assemble_sv(space: &Space<'_>, params: &StabParams) -> SparseMatrix {
    let mesh = space.mesh();
    let mut out = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), 36 * mesh.n_faces());
    for (f, face) in mesh.faces().iter().enumerate() {
        if face.is_interior() || PartSet::GAMMA_D.contains_face(face) {
            add_face_penalty(space, f, params.gamma_v, &mut out);
        }
    }
    out.build()
}

/// Dual stabilization s_W for the selected kind and boundary path.
pub fn assemble_sw(space: &Space<'_>, params: &StabParams, kind: StabKind, bc: BcPath) -> SparseMatrix {
    let mesh = space.mesh();
    let mut out = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), 36 * mesh.n_faces());
    if kind == StabKind::GradLS {
        add_volume_stiffness(space, space, params.gamma_w, &mut out);
    }
    for (f, face) in mesh.faces().iter().enumerate() {
        let on_c_prime = PartSet::GAMMA_C_PRIME.contains_face(face);
        match (kind, bc) {
            (StabKind::JumpPenalty, BcPath::Strong) => {
                if face.is_interior() || on_c_prime {
                    add_face_penalty(space, f, params.gamma_w, &mut out);
                }
            }
            (StabKind::JumpPenalty, BcPath::Weak) => {
                if face.is_interior() {
                    add_face_penalty(space, f, params.gamma_w, &mut out);
                } else if on_c_prime {
                    add_face_penalty(space, f, params.gamma_bc, &mut out);
                }
            }
            (StabKind::GradLS, BcPath::Weak) => {
                if on_c_prime {
                    add_face_penalty(space, f, params.gamma_bc, &mut out);
                }
            }
            (StabKind::GradLS, BcPath::Strong) => {}
        }
    }
    out.build()
}

fn integrate_against_basis(
    space: &Space<'_>,
    t: usize,
    rule: &[(Point, f64)],
    data: &dyn Fn(Point) -> f64,
    scale: f64,
    out: &mut [f64],
) {
    let mesh = space.mesh();
    let dofs = space.local_dofs(t);
    for &(p, w) in rule {
        let v = scale * w * data(p);
        if v == 0.0 {
            continue;
        }
        let l = mesh.barycentric(t, p);
        for i in 0..3 {
            if let Some(d) = dofs[i] {
                out[d] += v * (1.0 - 2.0 * l[i]);
            }
        }
    }
}

/// Right-hand side of the dual (w) equation: `l(w)` (plus `δl(w)` when `perturbed`),
/// minus `Σ_{F ⊂ Γ_D} ∫_F ∇w·n g` on the weak path.
pub fn assemble_load(space_w: &Space<'_>, data: &ProblemData, form: &Formulation, perturbed: bool) -> Result<Vec<f64>> {
    let mesh = space_w.mesh();
    let mut rhs = vec![0.0; space_w.n_dofs()];
    let (delta_f, delta_psi) = if perturbed {
        if !data.is_perturbed() {
            return Err(Error::MissingPerturbation);
        }
        (data.delta_f.clone(), data.delta_psi.clone())
    } else {
        (None, None)
    };

    let tri_unit = quadrature::reference_triangle_rule(form.quad.triangle)?;
    for t in 0..mesh.n_triangles() {
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let rule: Vec<(Point, f64)> = tri_unit
            .iter()
            .map(|&(l, w)| {
                ([l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0], l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1]], w * area)
            })
            .collect();
        integrate_against_basis(space_w, t, &rule, &*data.f, 1.0, &mut rhs);
        if let Some(df) = &delta_f {
            integrate_against_basis(space_w, t, &rule, &**df, 1.0, &mut rhs);
        }
    }

    for (f, face) in mesh.faces().iter().enumerate() {
        let Some(part) = face.part else { continue };
        let t = face.triangles[0];
        if part == crate::mesh::BoundaryPart::GammaC {
            let rule = mesh.face_quadrature(f, form.quad.face)?;
            integrate_against_basis(space_w, t, &rule, &*data.psi, 1.0, &mut rhs);
            if let Some(dpsi) = &delta_psi {
                integrate_against_basis(space_w, t, &rule, &**dpsi, 1.0, &mut rhs);
            }
        }
        if form.bc == BcPath::Weak && PartSet::GAMMA_D.contains(part) {
            let rule = mesh.face_quadrature(f, form.quad.face)?;
            let g_int: f64 = rule.iter().map(|&(p, w)| w * (data.g)(p)).sum();
            let grads = basis_gradients(mesh, t);
            let dofs = space_w.local_dofs(t);
            for k in 0..3 {
                if let Some(d) = dofs[k] {
                    rhs[d] -= dot(grads[k], face.normal) * g_int;
                }
            }
        }
    }
    Ok(rhs)
}

/// Right-hand side of the primal (v) equation: `Σ_{F ⊂ Γ_D} γ_V h_F⁻¹ ∫_F g v` on the weak
/// path, zero on the strong path.
pub fn assemble_dirichlet_rhs(space_v: &Space<'_>, data: &ProblemData, form: &Formulation) -> Result<Vec<f64>> {
    let mesh = space_v.mesh();
    let mut rhs = vec![0.0; space_v.n_dofs()];
    if form.bc == BcPath::Strong {
        return Ok(rhs);
    }
    for (f, face) in mesh.faces().iter().enumerate() {
        if !PartSet::GAMMA_D.contains_face(face) {
            continue;
        }
        let rule = mesh.face_quadrature(f, form.quad.face)?;
        let scale = form.params.gamma_v() / face.length;
        integrate_against_basis(space_v, face.triangles[0], &rule, &*data.g, scale, &mut rhs);
    }
    Ok(rhs)
}

/// `Σ_F weight(F) h_F⁻¹ ∫_F [v]²` for a fully discontinuous field given element by element.
///
/// `weight` returns `None` for faces that are not penalized. Used to evaluate penalty forms
/// on fields that do not belong to the nonconforming space.
pub fn broken_jump_penalty(
    mesh: &Mesh,
    weight: impl Fn(&Face) -> Option<f64>,
    field: impl Fn(usize, Point) -> f64,
    degree: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (f, face) in mesh.faces().iter().enumerate() {
        let Some(w) = weight(face) else { continue };
        let rule = mesh.face_quadrature(f, degree)?;
        let integral: f64 = rule
            .iter()
            .map(|&(p, q)| {
                let jump = match face.second() {
                    Some(t1) => field(face.triangles[0], p) - field(t1, p),
                    None => field(face.triangles[0], p),
                };
                q * jump * jump
            })
            .sum();
        total += w / face.length * integral;
    }
    Ok(total)
}

/// Face weight of s_V for [`broken_jump_penalty`].
pub fn sv_face_weight(params: &StabParams) -> impl Fn(&Face) -> Option<f64> + '_ {
    move |face: &Face| (face.is_interior() || PartSet::GAMMA_D.contains_face(face)).then_some(params.gamma_v())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundaryLayout, BoundaryPart, Rect};
    use crate::sparse::norm2;
    use std::f64::consts::PI;

    fn hadamard(nx: usize, ny: usize, jitter: f64) -> Mesh {
        Mesh::build_structured(Rect::hadamard(), nx, ny, jitter, 5).unwrap().tag_boundary(BoundaryLayout::Hadamard).unwrap()
    }

    fn params() -> StabParams {
        StabParams::new(0.01, 0.01, 100.0).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| crate::rng::signed_unit(seed, i as u64, 0)).collect()
    }

    #[test]
    fn params_must_be_positive() {
        assert!(StabParams::new(0.0, 0.01, 100.0).is_err());
        assert!(StabParams::new(0.01, -1.0, 100.0).is_err());
        assert!(StabParams::new(0.01, 0.01, f64::NAN).is_err());
        assert!(params().small_product());
        assert!(!StabParams::new(2.0, 1.0, 1.0).unwrap().small_product());
    }

    /// Energy E(c) = ½ Σ_ij c_i K_ij c_j evaluated by quadrature of |∇u|²; its finite
    /// differences recover K.
    #[test]
    fn unit_triangle_stiffness_matches_energy_differences() {
        let mesh = Mesh::from_parts(
            Rect::new(1.0, 1.0).unwrap(),
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let k = local_stiffness(&mesh, 0);
        let expected = [[4.0, -2.0, -2.0], [-2.0, 2.0, 0.0], [-2.0, 0.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-13);
            }
        }
        let energy = |c: [f64; 3]| {
            let mut e = 0.0;
            for (p, w) in mesh.triangle_quadrature(0, 2).unwrap() {
                let mut g = [0.0; 2];
                for i in 0..3 {
                    let (_, gi) = crate::space::basis_eval(&mesh, 0, i, p);
                    g[0] += c[i] * gi[0];
                    g[1] += c[i] * gi[1];
                }
                e += 0.5 * w * (g[0] * g[0] + g[1] * g[1]);
            }
            e
        };
        let h = 1e-3;
        for i in 0..3 {
            for j in 0..3 {
                let at = |si: f64, sj: f64| {
                    let mut c = [0.0; 3];
                    c[i] += si * h;
                    c[j] += sj * h;
                    energy(c)
                };
                let fd = (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
                assert!((fd - expected[i][j]).abs() < 1e-6, "({i},{j}) {fd}");
            }
        }
    }

    #[test]
    fn volume_part_symmetric() {
        let m = hadamard(6, 4, 0.2);
        let s = Space::unconstrained(&m);
        let a = assemble_a(&s, &s, BcPath::Strong).unwrap();
        assert!(a.max_asymmetry() <= 1e-13);
    }

    #[test]
    fn mismatched_meshes_rejected() {
        let m1 = hadamard(2, 2, 0.0);
        let m2 = hadamard(2, 2, 0.0);
        let s1 = Space::unconstrained(&m1);
        let s2 = Space::unconstrained(&m2);
        assert!(matches!(assemble_a_weak(&s1, &s2), Err(Error::MeshMismatch)));
    }

    #[test]
    fn weak_path_requires_unconstrained_spaces() {
        let m = hadamard(2, 2, 0.0);
        let v = Space::new(&m, PartSet::GAMMA_D);
        let w = Space::unconstrained(&m);
        assert!(assemble_a(&v, &w, BcPath::Weak).is_err());
    }

    /// a_h(u, w) for u = y must equal ∫_{Γ_C} ∂_n u w = -∫_{y=0} w when u vanishes on Γ_D.
    #[test]
    fn weak_a_consistent_for_affine_solution() {
        let m = Mesh::build_structured(Rect::hadamard(), 2, 2, 0.0, 0).unwrap();
        let layout = |p: Point| Some(if p[1] == 0.0 { BoundaryPart::GammaC } else { BoundaryPart::GammaDPrime });
        let m = m.tag_boundary(BoundaryLayout::Custom(&layout)).unwrap();
        let s = Space::unconstrained(&m);
        let a = assemble_a_weak(&s, &s).unwrap();
        let u = s.interpolate(|p| p[1]);
        let au = a.mul_vec(u.coefficients());
        for (dof, &v) in au.iter().enumerate() {
            let face = m.face(s.face_of_dof(dof));
            let expected = if face.part == Some(BoundaryPart::GammaC) { -face.length } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "dof {dof}: {v} vs {expected}");
        }
    }

    #[test]
    fn stabilizations_symmetric_psd() {
        let m = hadamard(8, 4, 0.2);
        for bc in [BcPath::Strong, BcPath::Weak] {
            let form = Formulation::new(params(), StabKind::JumpPenalty, bc);
            let v = form.primal_space(&m);
            let w = form.dual_space(&m);
            let mut mats = vec![assemble_sv(&v, &params())];
            for kind in [StabKind::GradLS, StabKind::JumpPenalty] {
                mats.push(assemble_sw(&w, &params(), kind, bc));
            }
            for mat in &mats {
                let scale = mat.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(mat.max_asymmetry() <= 1e-14 * scale);
                for seed in 0..20 {
                    let x = pseudo_random(mat.nrows(), seed);
                    assert!(mat.quadratic_form(&x) >= -1e-12 * norm2(&x).powi(2));
                }
            }
        }
    }

    #[test]
    fn gradls_on_constant_counts_boundary_faces() {
        let m = hadamard(8, 4, 0.0);
        let s = Space::unconstrained(&m);
        let sw = assemble_sw(&s, &params(), StabKind::GradLS, BcPath::Weak);
        let one = vec![1.0; s.n_dofs()];
        let n_c_prime = m.faces().iter().filter(|f| PartSet::GAMMA_C_PRIME.contains_face(f)).count();
        let q = sw.quadratic_form(&one);
        assert!((q - 100.0 * n_c_prime as f64).abs() < 1e-9 * q);
    }

    #[test]
    fn jump_penalty_interior_part_vanishes_on_continuous_member() {
        let m = hadamard(6, 3, 0.15);
        let s = Space::unconstrained(&m);
        let u = s.interpolate(|p| 2.0 * p[0] - p[1] + 0.5);
        let p = StabParams::new(0.01, 0.7, 1e-300).unwrap();
        let sw = assemble_sw(&s, &p, StabKind::JumpPenalty, BcPath::Weak);
        // γ_bc negligible: only the interior jumps remain, up to cancellation error
        let scale = p.gamma_w() * u.coefficients().iter().map(|c| c * c).sum::<f64>();
        assert!(sw.quadratic_form(u.coefficients()).abs() < 1e-13 * scale);
    }

    #[test]
    fn sv_matches_broken_evaluation() {
        let m = hadamard(5, 3, 0.2);
        let s = Space::unconstrained(&m);
        let u = s.interpolate(|p| (2.0 * p[0]).sin() * (1.0 + p[1] * p[1]));
        let sv = assemble_sv(&s, &params());
        let assembled = sv.quadratic_form(u.coefficients());
        let broken = broken_jump_penalty(&m, sv_face_weight(&params()), |t, p| u.eval(t, p), 3).unwrap();
        assert!((assembled - broken).abs() <= 1e-12 * broken.abs().max(1e-30));
        assert!(assembled > 0.0);
    }

    /// Two triangles sharing the diagonal of the unit square. The broken field is affine on
    /// the first element and zero on the second; the shared-face penalty is checked against
    /// a hand-evaluated two-point Gauss rule.
    #[test]
    fn broken_two_triangle_penalty() {
        let m = Mesh::from_parts(
            Rect::new(1.0, 1.0).unwrap(),
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let p = params();
        let interior_only = |face: &Face| face.is_interior().then_some(p.gamma_v());
        let field = |t: usize, x: Point| if t == 0 { x[0] + 2.0 * x[1] } else { 0.0 };
        let value = broken_jump_penalty(&m, interior_only, field, 3).unwrap();
        // shared face (1,0)-(0,1): x = 1 - s, y = s, jump = 1 + s, length √2
        let g = 0.5 / 3f64.sqrt();
        let s = [0.5 - g, 0.5 + g];
        let len = 2f64.sqrt();
        let hand = p.gamma_v() / len * len * 0.5 * s.iter().map(|s| (1.0 + s).powi(2)).sum::<f64>();
        assert!((value - hand).abs() < 1e-14);
        // ∫_0^1 (1+s)² ds = 7/3
        assert!((value - p.gamma_v() * 7.0 / 3.0).abs() < 1e-14);

        let constant = |t: usize, _: Point| if t == 0 { 1.0 } else { 0.0 };
        let v = broken_jump_penalty(&m, interior_only, constant, 1).unwrap();
        assert!((v - p.gamma_v()).abs() < 1e-15);
    }

    #[test]
    fn sv_of_interpolant_decays() {
        let u = |p: Point| p[0].sin() * p[1].sinh();
        let value = |nx: usize, ny: usize| {
            let m = hadamard(nx, ny, 0.0);
            let s = Space::unconstrained(&m);
            let fe = s.interpolate(u);
            (assemble_sv(&s, &params()).quadratic_form(fe.coefficients()).sqrt(), m.h_max())
        };
        let (a, ha) = value(16, 8);
        let (b, hb) = value(32, 16);
        let (c, hc) = value(64, 32);
        let r1 = (a / b).ln() / (ha / hb).ln();
        let r2 = (b / c).ln() / (hb / hc).ln();
        assert!(r1 >= 0.9 && r2 >= 0.9, "{r1} {r2}");
        // squared form shrinks roughly fourfold
        assert!((b / c).powi(2) > 3.0);
    }

    #[test]
    fn gradls_part_persists_while_jump_part_decays() {
        let u = |p: Point| p[0].sin() * p[1].sinh();
        let forms = |nx: usize, ny: usize| {
            let m = hadamard(nx, ny, 0.0);
            let s = Space::unconstrained(&m);
            let fe = s.interpolate(u);
            let p = StabParams::new(0.01, 0.01, 1e-300).unwrap();
            let ls = assemble_sw(&s, &p, StabKind::GradLS, BcPath::Weak).quadratic_form(fe.coefficients());
            let jump = assemble_sw(&s, &p, StabKind::JumpPenalty, BcPath::Weak).quadratic_form(fe.coefficients());
            (ls, jump.sqrt(), m.h_max())
        };
        let (ls0, j0, h0) = forms(16, 8);
        let (ls1, j1, h1) = forms(32, 16);
        assert!((ls0 / ls1 - 1.0).abs() < 0.05, "{}", ls0 / ls1);
        // γ_W ‖∇u‖² with ‖∇u‖² = (π/2) sinh(2)/2
        let target = 0.01 * (PI / 2.0) * 2f64.sinh() / 2.0;
        assert!((ls1 / target - 1.0).abs() < 0.01);
        let order = (j0 / j1).ln() / (h0 / h1).ln();
        assert!(order >= 0.9, "{order}");
    }

    fn data(f: f64, psi: ScalarField) -> ProblemData {
        ProblemData::new(field(move |_| f), psi, zero_field())
    }

    #[test]
    fn zero_data_gives_zero_vectors() {
        let m = hadamard(4, 2, 0.1);
        let form = Formulation::new(params(), StabKind::JumpPenalty, BcPath::Weak);
        let s = Space::unconstrained(&m);
        let d = data(0.0, zero_field());
        assert!(assemble_load(&s, &d, &form, false).unwrap().iter().all(|&v| v == 0.0));
        assert!(assemble_dirichlet_rhs(&s, &d, &form).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_source_sums_to_area() {
        let m = Mesh::build_structured(Rect::new(1.0, 1.0).unwrap(), 1, 1, 0.0, 0)
            .unwrap()
            .tag_boundary(BoundaryLayout::Hadamard)
            .unwrap();
        let form = Formulation::new(params(), StabKind::JumpPenalty, BcPath::Weak);
        let s = Space::unconstrained(&m);
        let load = assemble_load(&s, &data(1.0, zero_field()), &form, false).unwrap();
        assert!((load.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn flux_load_integrates_psi() {
        let m = hadamard(32, 10, 0.0);
        let form = Formulation::new(params(), StabKind::JumpPenalty, BcPath::Weak);
        let s = Space::unconstrained(&m);
        let load = assemble_load(&s, &data(0.0, field(|p| (3.0 * p[0]).sin())), &form, false).unwrap();
        // only Γ_C basis functions see ψ; their face sums give ∫ψ
        assert!((load.iter().sum::<f64>() - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_load_requires_data() {
        let m = hadamard(2, 2, 0.0);
        let form = Formulation::new(params(), StabKind::GradLS, BcPath::Weak);
        let s = Space::unconstrained(&m);
        let d = data(0.0, zero_field());
        assert!(matches!(assemble_load(&s, &d, &form, true), Err(Error::MissingPerturbation)));
        let d = d.with_perturbation(zero_field(), field(|p| p[0]));
        let plain = assemble_load(&s, &d, &form, false).unwrap();
        let pert = assemble_load(&s, &d, &form, true).unwrap();
        assert!(plain.iter().all(|&v| v == 0.0));
        assert!((pert.iter().sum::<f64>() - PI * PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_rhs_penalizes_g() {
        let m = hadamard(4, 2, 0.0);
        let form = Formulation::new(params(), StabKind::JumpPenalty, BcPath::Weak);
        let s = Space::unconstrained(&m);
        let d = ProblemData::new(zero_field(), zero_field(), field(|_| 1.0));
        let rhs = assemble_dirichlet_rhs(&s, &d, &form).unwrap();
        // each Γ_D face: γ_V h_F⁻¹ |F| = γ_V
        let n_d = m.faces().iter().filter(|f| PartSet::GAMMA_D.contains_face(f)).count();
        assert!((rhs.iter().sum::<f64>() - 0.01 * n_d as f64).abs() < 1e-14);
        let strong = Formulation::new(params(), StabKind::JumpPenalty, BcPath::Strong);
        assert!(assemble_dirichlet_rhs(&s, &d, &strong).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn assembly_is_reproducible() {
        let m = hadamard(7, 5, 0.2);
        let s = Space::unconstrained(&m);
        let a = assemble_sw(&s, &params(), StabKind::JumpPenalty, BcPath::Weak);
        let b = assemble_sw(&s, &params(), StabKind::JumpPenalty, BcPath::Weak);
        assert_eq!(a, b);
    }
}
