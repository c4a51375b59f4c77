//! Experiment drivers for the Hadamard test case: single runs, convergence series,
//! parameter sweeps and perturbed-data studies.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{self, SubdomainSpec};
use crate::error::{Error, Result};
use crate::forms::{field, zero_field, BcPath, Formulation, ProblemData, QuadratureDegrees, StabKind, StabParams};
use crate::linsys::{SolveReport, SolverConfig, SolverMethod};
use crate::mesh::{BoundaryLayout, Mesh, Rect};
use crate::rng::signed_unit;
use crate::solver::solve_problem;
use crate::Point;

/// Number of sine modes in seeded noise.
const NOISE_MODES: u32 = 16;
/// Largest row-count multiple considered when aligning rows with the ζ lines.
const MAX_ROW_MULTIPLE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationMode {
    /// δψ = ε sin(m x).
    Sine(u32),
    /// δψ = ε Σ_k ξ_k sin(k x) / √K with ξ_k ∈ [−1, 1] drawn from the run seed.
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub epsilon: f64,
    pub mode: PerturbationMode,
}

impl Perturbation {
    fn delta_psi(&self, seed: u64) -> impl Fn(Point) -> f64 + Send + Sync + 'static {
        let eps = self.epsilon;
        let coeffs: Vec<(f64, f64)> = match self.mode {
            PerturbationMode::Sine(m) => vec![(f64::from(m), 1.0)],
            PerturbationMode::Noise => {
                let scale = 1.0 / f64::from(NOISE_MODES).sqrt();
                (1..=NOISE_MODES).map(|k| (f64::from(k), scale * signed_unit(seed, u64::from(k), 7))).collect()
            }
        };
        move |p: Point| eps * coeffs.iter().map(|&(k, c)| c * (k * p[0]).sin()).sum::<f64>()
    }
}

/// Fully resolved description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: u32,
    pub amplitude: f64,
    pub h: f64,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub jitter: f64,
    pub seed: u64,
    pub stab: StabKind,
    pub bc: BcPath,
    pub gamma_v: f64,
    pub gamma_w: f64,
    pub gamma_bc: f64,
    pub zetas: Vec<f64>,
    pub solver: SolverMethod,
    pub tol: f64,
    pub quad: QuadratureDegrees,
    pub perturbation: Option<Perturbation>,
    /// Mesh sizes of a convergence or perturbation study.
    pub h_list: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 1,
            amplitude: 1.0,
            h: 0.1,
            nx: None,
            ny: None,
            jitter: 0.15,
            seed: 20,
            stab: StabKind::JumpPenalty,
            bc: BcPath::Weak,
            gamma_v: 0.01,
            gamma_w: 0.01,
            gamma_bc: 100.0,
            zetas: vec![0.125, 0.25, 0.5, 1.0],
            solver: SolverMethod::DirectLU,
            tol: 1e-10,
            quad: QuadratureDegrees::default(),
            perturbation: None,
            h_list: vec![0.1, 0.05, 0.025, 0.0125],
        }
    }
}

/// Default dual stabilization weight for each kind.
pub fn default_gamma_w(kind: StabKind) -> f64 {
    match kind {
        StabKind::JumpPenalty => 0.01,
        StabKind::GradLS => 1e-5,
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_f64(key, s)).collect()
}

fn parse_int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| Error::Config(format!("{key}: '{value}' is not a valid integer")))
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses a flat `key = value` file; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse { line: i + 1, msg: format!("expected key = value, got '{line}'") });
            };
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key. Switching the stabilization kind replaces γ_W by the new kind's
    /// default when it still holds the old kind's default.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = parse_int(key, value)?,
            "amplitude" => self.amplitude = parse_f64(key, value)?,
            "h" => self.h = parse_f64(key, value)?,
            "nx" => self.nx = Some(parse_int(key, value)?),
            "ny" => self.ny = Some(parse_int(key, value)?),
            "jitter" => self.jitter = parse_f64(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "stab" => {
                let stab = StabKind::parse(value).ok_or_else(|| Error::Config(format!("unknown stabilization '{value}'")))?;
                if self.gamma_w == default_gamma_w(self.stab) {
                    self.gamma_w = default_gamma_w(stab);
                }
                self.stab = stab;
            }
            "bc" => self.bc = BcPath::parse(value).ok_or_else(|| Error::Config(format!("unknown boundary path '{value}'")))?,
            "gamma_v" => self.gamma_v = parse_f64(key, value)?,
            "gamma_w" => self.gamma_w = parse_f64(key, value)?,
            "gamma_bc" => self.gamma_bc = parse_f64(key, value)?,
            "zeta_list" => self.zetas = parse_list(key, value)?,
            "solver" => {
                self.solver = SolverMethod::parse(value).ok_or_else(|| Error::Config(format!("unknown solver '{value}'")))?
            }
            "tol" => self.tol = parse_f64(key, value)?,
            "quad_face" => self.quad.face = parse_int(key, value)?,
            "quad_triangle" => self.quad.triangle = parse_int(key, value)?,
            "h_list" => self.h_list = parse_list(key, value)?,
            "epsilon" => {
                let epsilon = parse_f64(key, value)?;
                let mode = self.perturbation.map_or(PerturbationMode::Sine(7), |p| p.mode);
                self.perturbation = Some(Perturbation { epsilon, mode });
            }
            "perturbation" => {
                let mode = match value {
                    "none" => {
                        self.perturbation = None;
                        return Ok(());
                    }
                    "noise" => PerturbationMode::Noise,
                    v => match v.strip_prefix("sine") {
                        Some("") => PerturbationMode::Sine(7),
                        Some(m) => PerturbationMode::Sine(parse_int(key, m.trim_start_matches(':'))?),
                        None => return Err(Error::Config(format!("unknown perturbation mode '{value}'"))),
                    },
                };
                let epsilon = self.perturbation.map_or(0.0, |p| p.epsilon);
                self.perturbation = Some(Perturbation { epsilon, mode });
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn params(&self) -> Result<StabParams> {
        StabParams::new(self.gamma_v, self.gamma_w, self.gamma_bc)
    }

    pub fn formulation(&self) -> Result<Formulation> {
        let mut form = Formulation::new(self.params()?, self.stab, self.bc);
        form.quad = self.quad;
        Ok(form)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { method: self.solver, tol: self.tol, ..SolverConfig::default() }
    }

    /// Smallest row count `m` with `m ζ` integral for every ζ.
    fn row_multiple(&self) -> Option<usize> {
        (1..=MAX_ROW_MULTIPLE).find(|&m| self.zetas.iter().all(|&z| is_integral(m as f64 * z)))
    }

    /// Grid dimensions: `nx ≈ π/h`; `ny ≈ 1/h` rounded to a multiple that puts every
    /// ζ line on a row of the unperturbed grid.
    pub fn grid(&self) -> Result<(usize, usize)> {
        let rect = Rect::hadamard();
        let nx = self.nx.unwrap_or_else(|| ((rect.x_max() / self.h).round() as usize).max(1));
        let ny = match self.ny {
            Some(ny) => {
                if let Some(z) = self.zetas.iter().find(|&&z| !is_integral(ny as f64 * z)) {
                    return Err(Error::Config(format!("ny = {ny} does not align with zeta = {z}")));
                }
                ny
            }
            None => {
                let m = self
                    .row_multiple()
                    .ok_or_else(|| Error::Config(format!("zeta list {:?} needs more than {MAX_ROW_MULTIPLE} rows", self.zetas)))?;
                let rows = rect.y_max() / self.h / m as f64;
                m * (rows.round() as usize).max(1)
            }
        };
        Ok((nx, ny))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return bad(format!("amplitude must be finite and nonzero, got {}", self.amplitude));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad(format!("h must be positive, got {}", self.h));
        }
        if !(0.0..0.3).contains(&self.jitter) {
            return bad(format!("jitter must lie in [0, 0.3), got {}", self.jitter));
        }
        if self.zetas.is_empty() {
            return bad("zeta list is empty".into());
        }
        for &z in &self.zetas {
            SubdomainSpec::new(z).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.params().map_err(|e| Error::Config(e.to_string()))?;
        if self.solver == SolverMethod::KrylovILU && !(self.tol > 0.0) {
            return bad(format!("tol must be positive for the iterative solver, got {}", self.tol));
        }
        for d in [self.quad.face, self.quad.triangle] {
            if !(1..=crate::quadrature::MAX_DEGREE).contains(&d) {
                return bad(format!("quadrature degree {d} outside 1..={}", crate::quadrature::MAX_DEGREE));
            }
        }
        if let Some(p) = self.perturbation {
            if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
                return bad(format!("epsilon must be nonnegative, got {}", p.epsilon));
            }
            if p.mode == PerturbationMode::Sine(0) {
                return bad("sine perturbation needs m >= 1".into());
            }
        }
        if self.h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return bad(format!("h list must contain positive sizes, got {:?}", self.h_list));
        }
        self.grid()?;
        Ok(())
    }

    /// Advisory notes that do not prevent a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(p) = self.params() {
            if !p.small_product() {
                out.push(format!("gamma_v * gamma_w = {:e} exceeds 1", self.gamma_v * self.gamma_w));
            }
        }
        out
    }

    /// One `key = value` line per setting, keys sorted, floats in round-trip form.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("amplitude", format!("{:?}", self.amplitude));
        map.insert("bc", self.bc.name().to_string());
        map.insert("gamma_bc", format!("{:?}", self.gamma_bc));
        map.insert("gamma_v", format!("{:?}", self.gamma_v));
        map.insert("gamma_w", format!("{:?}", self.gamma_w));
        map.insert("h", format!("{:?}", self.h));
        map.insert("h_list", fmt_list(&self.h_list));
        map.insert("jitter", format!("{:?}", self.jitter));
        map.insert("n", self.n.to_string());
        if let Some(nx) = self.nx {
            map.insert("nx", nx.to_string());
        }
        if let Some(ny) = self.ny {
            map.insert("ny", ny.to_string());
        }
        match self.perturbation {
            None => {
                map.insert("perturbation", "none".into());
            }
            Some(p) => {
                map.insert("epsilon", format!("{:?}", p.epsilon));
                let mode = match p.mode {
                    PerturbationMode::Sine(m) => format!("sine:{m}"),
                    PerturbationMode::Noise => "noise".into(),
                };
                map.insert("perturbation", mode);
            }
        }
        map.insert("quad_face", self.quad.face.to_string());
        map.insert("quad_triangle", self.quad.triangle.to_string());
        map.insert("seed", self.seed.to_string());
        map.insert("solver", self.solver.name().to_string());
        map.insert("stab", self.stab.name().to_string());
        map.insert("tol", format!("{:?}", self.tol));
        map.insert("zeta_list", fmt_list(&self.zetas));
        map.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    fn with_h(&self, h: f64) -> Self {
        Self { h, ..self.clone() }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let (nx, ny) = self.grid()?;
        Mesh::build_structured(Rect::hadamard(), nx, ny, self.jitter, self.seed)?.tag_boundary(BoundaryLayout::Hadamard)
    }

    /// Hadamard data with `f = 0`, `g = 0` and `∂_y u = A sin(nx)` on y = 0, plus the
    /// configured perturbation.
    ///
    /// The load takes the flux along the outward normal `(0, −1)`, hence the sign.
    pub fn problem_data(&self) -> ProblemData {
        let (a, n) = (self.amplitude, f64::from(self.n));
        let data = ProblemData::new(zero_field(), field(move |p| -a * (n * p[0]).sin()), zero_field());
        match self.perturbation {
            Some(p) => data.with_perturbation(zero_field(), field(p.delta_psi(self.seed))),
            None => data,
        }
    }
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() < 1e-9
}

/// `u_n = A n⁻¹ sin(nx) sinh(ny)`.
pub fn hadamard_solution(n: u32, a: f64) -> impl Fn(Point) -> f64 {
    let nf = f64::from(n);
    move |p| a / nf * (nf * p[0]).sin() * (nf * p[1]).sinh()
}

pub fn hadamard_gradient(n: u32, a: f64) -> impl Fn(Point) -> [f64; 2] {
    let nf = f64::from(n);
    move |p| [a * (nf * p[0]).cos() * (nf * p[1]).sinh(), a * (nf * p[0]).sin() * (nf * p[1]).cosh()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `(ζ, ‖u − u_h‖_{Ω_ζ} / ‖u‖_{Ω_ζ})`, in configuration order.
    pub rel_l2: Vec<(f64, f64)>,
    pub h1_semi_error: f64,
    pub broken_h1_error: f64,
    pub s_v_seminorm: f64,
    pub s_w_norm: f64,
    /// Triple norm of `(r_h u − u_h, z_h)`.
    pub triple_norm: f64,
    pub eta: f64,
    pub eta_delta: Option<f64>,
    pub perturbation_norm: Option<f64>,
    pub exact_h1_semi: f64,
}

impl ErrorReport {
    pub fn rel_l2_at(&self, zeta: f64) -> Option<f64> {
        self.rel_l2.iter().find(|(z, _)| (z - zeta).abs() < 1e-12).map(|&(_, e)| e)
    }

    /// Error on the whole domain.
    pub fn global(&self) -> Option<f64> {
        self.rel_l2_at(1.0)
    }
}

/// Mesh summary of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshInfo {
    pub nx: usize,
    pub ny: usize,
    pub h_max: f64,
    pub n_dofs: usize,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config: RunConfig,
    pub digest: String,
    pub mesh: MeshInfo,
    pub report: ErrorReport,
    pub solve: SolveReport,
    /// `(|u_h|²_{s_V} + ‖z_h‖²_{s_W}, −l(z_h) + rhs_v·u_h)`.
    pub energy_balance: (f64, f64),
}

pub fn run_single(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let mesh = config.build_mesh()?;
    let (nx, ny) = config.grid()?;
    let form = config.formulation()?;
    let data = config.problem_data();
    let sol = solve_problem(&mesh, &data, &form, &config.solver_config())?;
    let u_h = sol.u_h();
    let z_h = sol.z_h();

    let exact = hadamard_solution(config.n, config.amplitude);
    let grad = hadamard_gradient(config.n, config.amplitude);
    let mut rel_l2 = Vec::with_capacity(config.zetas.len());
    for &zeta in &config.zetas {
        rel_l2.push((zeta, analysis::error_l2_relative(&u_h, &exact, SubdomainSpec::new(zeta)?)?));
    }
    let interp = sol.primal.interpolate_with_degree(&exact, config.quad.face)?;
    let diff = interp.minus(&u_h)?;
    let (eta_delta, perturbation_norm) = match (&data.delta_f, &data.delta_psi) {
        (Some(df), Some(dpsi)) => {
            let pn = analysis::perturbation_norm(&**df, &**dpsi, &mesh, config.quad.triangle, config.quad.face)?;
            (Some(analysis::eta_delta(&u_h, &z_h, &data, &form, pn)?), Some(pn))
        }
        _ => (None, None),
    };
    let report = ErrorReport {
        rel_l2,
        h1_semi_error: analysis::h1_semi_error(&u_h, &grad)?,
        broken_h1_error: analysis::broken_h1_error(&u_h, &exact, &grad)?,
        s_v_seminorm: analysis::sv_seminorm(&u_h, &form.params),
        s_w_norm: analysis::sw_norm(&z_h, &form.params, form.kind, form.bc),
        triple_norm: analysis::triple_norm(&diff, &z_h, &form),
        eta: analysis::eta(&u_h, &z_h, &data, &form)?,
        eta_delta,
        perturbation_norm,
        exact_h1_semi: analysis::exact_energy(config.n, config.amplitude),
    };
    Ok(RunRecord {
        config: config.clone(),
        digest: config.digest(),
        mesh: MeshInfo { nx, ny, h_max: mesh.h_max(), n_dofs: sol.n_dofs() },
        report,
        solve: sol.report.clone(),
        energy_balance: sol.energy_balance(),
    })
}

/// Least-squares fit of `log e = slope · log h + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub quantity: String,
    pub slope: f64,
    /// Root of the summed squared residuals in log space.
    pub residual: f64,
}

pub fn fit_rate(quantity: &str, h: &[f64], e: &[f64]) -> Result<RateFit> {
    if h.len() != e.len() {
        return Err(Error::Dimension(format!("{} mesh sizes for {} values", h.len(), e.len())));
    }
    if h.len() < 3 {
        return Err(Error::Config(format!("rate fits need at least 3 levels, got {}", h.len())));
    }
    if h.iter().chain(e).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(format!("rate fit of {quantity} needs positive values")));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct mesh sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let c = my - slope * mx;
    let residual = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - c).powi(2)).sum::<f64>().sqrt();
    Ok(RateFit { quantity: quantity.to_string(), slope, residual })
}

#[derive(Debug, Clone, Default)]
pub struct StudyResult {
    pub runs: Vec<RunRecord>,
    pub rates: Vec<RateFit>,
    pub warnings: Vec<String>,
}

fn zeta_label(z: f64) -> String {
    format!("{z}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| format!("{v:.12e}"))
}

/// Column header of `results.csv` for the given ζ list.
pub fn csv_header(zetas: &[f64]) -> String {
    let mut cols: Vec<String> = [
        "digest", "n", "amplitude", "h", "h_max", "nx", "ny", "n_dofs", "stab", "bc", "gamma_v", "gamma_w", "gamma_bc",
        "epsilon", "jitter", "seed",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend(zetas.iter().map(|&z| format!("rel_l2_zeta_{}", zeta_label(z))));
    cols.extend(
        [
            "h1_semi_error", "broken_h1_error", "s_v", "s_w", "triple_norm", "eta", "eta_delta", "perturbation_norm",
            "exact_h1_semi", "residual_norm", "iterations", "dual_norm_surrogate",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols.join(",")
}

/// One CSV row. Timing is left out so repeated runs produce identical files.
pub fn csv_row(rec: &RunRecord) -> String {
    let c = &rec.config;
    let r = &rec.report;
    let mut cols = vec![
        rec.digest.clone(),
        c.n.to_string(),
        format!("{:?}", c.amplitude),
        format!("{:?}", c.h),
        format!("{:.12e}", rec.mesh.h_max),
        rec.mesh.nx.to_string(),
        rec.mesh.ny.to_string(),
        rec.mesh.n_dofs.to_string(),
        c.stab.name().to_string(),
        c.bc.name().to_string(),
        format!("{:?}", c.gamma_v),
        format!("{:?}", c.gamma_w),
        format!("{:?}", c.gamma_bc),
        c.perturbation.map_or_else(|| "0".to_string(), |p| format!("{:?}", p.epsilon)),
        format!("{:?}", c.jitter),
        c.seed.to_string(),
    ];
    cols.extend(r.rel_l2.iter().map(|&(_, e)| format!("{e:.12e}")));
    cols.extend([
        format!("{:.12e}", r.h1_semi_error),
        format!("{:.12e}", r.broken_h1_error),
        format!("{:.12e}", r.s_v_seminorm),
        format!("{:.12e}", r.s_w_norm),
        format!("{:.12e}", r.triple_norm),
        format!("{:.12e}", r.eta),
        opt(r.eta_delta),
        opt(r.perturbation_norm),
        format!("{:.12e}", r.exact_h1_semi),
        format!("{:.6e}", rec.solve.residual_norm),
        rec.solve.iterations.to_string(),
        (r.perturbation_norm.is_some() as u8).to_string(),
    ]);
    cols.join(",")
}

/// Runs every configuration, in parallel, returning the results in input order up to
/// (not including) the first failure.
fn run_all(configs: &[RunConfig]) -> (Vec<RunRecord>, Option<Error>) {
    let results: Vec<Result<RunRecord>> = configs.par_iter().map(run_single).collect();
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(rec) => runs.push(rec),
            Err(e) => return (runs, Some(e)),
        }
    }
    (runs, None)
}

fn write_results(out: &Path, zetas: &[f64], runs: &[RunRecord]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(out.join("results.csv"))?);
    writeln!(file, "{}", csv_header(zetas))?;
    for rec in runs {
        writeln!(file, "{}", csv_row(rec))?;
    }
    file.flush()?;
    Ok(())
}

fn write_lock(out: &Path, config: &RunConfig) -> Result<()> {
    fs::write(out.join("config.lock"), format!("{}digest = {}\n", config.canonical(), config.digest()))?;
    Ok(())
}

fn prepare(out: Option<&Path>, config: &RunConfig) -> Result<()> {
    config.validate()?;
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        write_lock(out, config)?;
    }
    Ok(())
}

/// Runs the base configuration and writes `results.csv` and `config.lock` under `out`.
pub fn run_and_record(config: &RunConfig, out: Option<&Path>) -> Result<RunRecord> {
    prepare(out, config)?;
    let rec = run_single(config)?;
    if let Some(out) = out {
        write_results(out, &config.zetas, std::slice::from_ref(&rec))?;
    }
    Ok(rec)
}

fn rate_fits(zetas: &[f64], runs: &[RunRecord]) -> Result<Vec<RateFit>> {
    let h: Vec<f64> = runs.iter().map(|r| r.mesh.h_max).collect();
    let mut rates = Vec::new();
    for (k, &z) in zetas.iter().enumerate() {
        let e: Vec<f64> = runs.iter().map(|r| r.report.rel_l2[k].1).collect();
        rates.push(fit_rate(&format!("rel_l2_zeta_{}", zeta_label(z)), &h, &e)?);
    }
    let h1: Vec<f64> = runs.iter().map(|r| r.report.h1_semi_error).collect();
    rates.push(fit_rate("h1_semi_error", &h, &h1)?);
    let stab: Vec<f64> = runs.iter().map(|r| r.report.s_v_seminorm + r.report.s_w_norm).collect();
    rates.push(fit_rate("stabilization", &h, &stab)?);
    let eta: Vec<f64> = runs.iter().map(|r| r.report.eta).collect();
    rates.push(fit_rate("eta", &h, &eta)?);
    Ok(rates)
}

fn write_rates(out: &Path, rates: &[RateFit]) -> Result<()> {
    let mut s = String::from("quantity,slope,residual\n");
    for r in rates {
        let _ = writeln!(s, "{},{:.6},{:.6e}", r.quantity, r.slope, r.residual);
    }
    fs::write(out.join("rates.csv"), s)?;
    Ok(())
}

fn write_series(out: &Path, zetas: &[f64], runs: &[RunRecord]) -> Result<()> {
    for (k, &z) in zetas.iter().enumerate() {
        let mut s = format!("# zeta = {}\n# h_max rel_l2 h\n", zeta_label(z));
        for r in runs {
            let _ = writeln!(s, "{:.12e} {:.12e} {:?}", r.mesh.h_max, r.report.rel_l2[k].1, r.config.h);
        }
        fs::write(out.join(format!("series_zeta_{}.dat", zeta_label(z))), s)?;
    }
    Ok(())
}

/// One run per mesh size of `h_list`, rates fitted against the largest element diameter.
pub fn run_convergence(base: &RunConfig, h_list: &[f64], out: Option<&Path>) -> Result<StudyResult> {
    if h_list.len() < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 mesh sizes, got {}", h_list.len())));
    }
    let base = RunConfig { h_list: h_list.to_vec(), ..base.clone() };
    prepare(out, &base)?;
    let configs: Vec<RunConfig> = h_list.iter().map(|&h| base.with_h(h)).collect();
    for c in &configs {
        c.validate()?;
    }
    let (runs, failure) = run_all(&configs);
    if let Some(out) = out {
        write_results(out, &base.zetas, &runs)?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let rates = rate_fits(&base.zetas, &runs)?;
    if let Some(out) = out {
        write_rates(out, &rates)?;
        write_series(out, &base.zetas, &runs)?;
    }
    Ok(StudyResult { runs, rates, warnings: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// γ_V = γ_W varied together.
    GammaVW,
    GammaW,
    GammaV,
    GammaBc,
    Epsilon,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GammaVW => "gamma_vw",
            SweepAxis::GammaW => "gamma_w",
            SweepAxis::GammaV => "gamma_v",
            SweepAxis::GammaBc => "gamma_bc",
            SweepAxis::Epsilon => "epsilon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SweepAxis::GammaVW, SweepAxis::GammaW, SweepAxis::GammaV, SweepAxis::GammaBc, SweepAxis::Epsilon]
            .into_iter()
            .find(|a| a.name() == s)
    }

    fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            SweepAxis::GammaVW => {
                c.gamma_v = value;
                c.gamma_w = value;
            }
            SweepAxis::GammaW => c.gamma_w = value,
            SweepAxis::GammaV => c.gamma_v = value,
            SweepAxis::GammaBc => c.gamma_bc = value,
            SweepAxis::Epsilon => {
                let mode = base.perturbation.map_or(PerturbationMode::Sine(7), |p| p.mode);
                c.perturbation = Some(Perturbation { epsilon: value, mode });
            }
        }
        c
    }
}

/// One run per value of `axis` on the base mesh. Writes `results.csv` and `sweep.dat`.
pub fn run_sweep(base: &RunConfig, axis: SweepAxis, values: &[f64], out: Option<&Path>) -> Result<StudyResult> {
    if values.is_empty() {
        return Err(Error::Config(format!("sweep over {} has no values", axis.name())));
    }
    prepare(out, base)?;
    let configs: Vec<RunConfig> = values.iter().map(|&v| axis.apply(base, v)).collect();
    for c in &configs {
        c.validate()?;
    }
    let (runs, failure) = run_all(&configs);
    if let Some(out) = out {
        write_results(out, &base.zetas, &runs)?;
        let mut s = format!("# {} rel_l2_global\n", axis.name());
        for (v, r) in values.iter().zip(&runs) {
            let _ = writeln!(s, "{v:?} {}", opt(r.report.global()));
        }
        fs::write(out.join("sweep.dat"), s)?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(StudyResult { runs, rates: Vec::new(), warnings: Vec::new() })
}

/// Runs the `epsilons × h_list` grid with `δψ` given by `mode`, `δf = 0`.
pub fn run_perturbed(
    base: &RunConfig,
    epsilons: &[f64],
    mode: PerturbationMode,
    out: Option<&Path>,
) -> Result<StudyResult> {
    if epsilons.is_empty() {
        return Err(Error::Config("perturbation study has no epsilon values".into()));
    }
    if base.h_list.is_empty() {
        return Err(Error::Config("perturbation study has no mesh sizes".into()));
    }
    prepare(out, base)?;
    let mut warnings = Vec::new();
    if base.stab == StabKind::JumpPenalty {
        warnings.push("perturbation bounds are only established for the gradient least-squares stabilization".to_string());
    }
    let configs: Vec<RunConfig> = epsilons
        .iter()
        .flat_map(|&epsilon| {
            base.h_list.iter().map(move |&h| RunConfig { perturbation: Some(Perturbation { epsilon, mode }), ..base.with_h(h) })
        })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let (runs, failure) = run_all(&configs);
    if let Some(out) = out {
        write_results(out, &base.zetas, &runs)?;
        for (k, &eps) in epsilons.iter().enumerate() {
            let mut s = format!("# epsilon = {eps:?}\n# h_max rel_l2_global eta_delta perturbation_norm\n");
            for r in runs.iter().skip(k * base.h_list.len()).take(base.h_list.len()) {
                let _ = writeln!(
                    s,
                    "{:.12e} {} {} {}",
                    r.mesh.h_max,
                    opt(r.report.global()),
                    opt(r.report.eta_delta),
                    opt(r.report.perturbation_norm)
                );
            }
            fs::write(out.join(format!("series_eps_{eps:?}.dat")), s)?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(StudyResult { runs, rates: Vec::new(), warnings })
}
