//! The controlled state equation `dX = b(t,X,u,v) dt + σ(t,X,u,v) dW`.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::noise;

/// Coefficient evaluators of a controlled SDE and its terminal payoff.
///
/// Implementations must be deterministic; `diffusion` writes a row-major
/// `dim × dim_w` matrix.
pub trait Coefficients: Send + Sync {
    fn drift(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], u: &[f64], v: &[f64], out: &mut [f64]);
    fn payoff(&self, x: &[f64]) -> f64;
}

/// A finite discretization of a compact control space.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    label: String,
    dim: usize,
    points: Vec<f64>,
}

impl ControlSet {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        let label = label.into();
        let Some(first) = points.first() else {
            return Err(Error::InvalidModel(alloc::format!("control set {label} is empty")));
        };
        let dim = first.len();
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidModel(alloc::format!(
                "control set {label} has inconsistent point dimensions"
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(alloc::format!(
                "control set {label} has non-finite points"
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].iter().any(|q| q == p) {
                return Err(Error::InvalidModel(alloc::format!(
                    "control set {label} has duplicate point {p:?}"
                )));
            }
        }
        Ok(Self {
            label,
            dim,
            points: points.into_iter().flatten().collect(),
        })
    }

    /// Scalar control set from a list of values.
    pub fn scalar(label: impl Into<String>, values: &[f64]) -> Result<Self> {
        Self::new(label, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&i| self.point(i) == point)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidInput(alloc::format!(
                "index {i} is not a point of control set {} (size {})",
                self.label,
                self.len()
            )))
        }
    }
}

/// The full game / model-uncertainty specification.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: String,
    pub dim: usize,
    pub dim_w: usize,
    pub horizon: f64,
    /// Declared bound on `|g|`.
    pub payoff_bound: f64,
    pub coefficients: Arc<dyn Coefficients>,
    pub u: ControlSet,
    pub v: ControlSet,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("dim_w", &self.dim_w)
            .field("horizon", &self.horizon)
            .field("payoff_bound", &self.payoff_bound)
            .field("u", &self.u)
            .field("v", &self.v)
            .finish()
    }
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        dim_w: usize,
        horizon: f64,
        payoff_bound: f64,
        coefficients: Arc<dyn Coefficients>,
        u: ControlSet,
        v: ControlSet,
    ) -> Result<Self> {
        if dim == 0 || dim_w == 0 {
            return Err(Error::InvalidModel(
                "state and noise dimensions must be positive".into(),
            ));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidModel("horizon must be positive and finite".into()));
        }
        if !(payoff_bound >= 0.0) {
            return Err(Error::InvalidModel("payoff bound must be non-negative".into()));
        }
        Ok(Self {
            id: id.into(),
            dim,
            dim_w,
            horizon,
            payoff_bound,
            coefficients,
            u,
            v,
        })
    }

    pub fn drift_into(&self, t: f64, x: &[f64], u: usize, v: usize, out: &mut [f64]) -> Result<()> {
        self.coefficients.drift(t, x, self.u.point(u), self.v.point(v), out);
        if out.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(self.model_error("drift", t, x, u, v))
        }
    }

    pub fn diffusion_into(&self, t: f64, x: &[f64], u: usize, v: usize, out: &mut [f64]) -> Result<()> {
        self.coefficients.diffusion(t, x, self.u.point(u), self.v.point(v), out);
        if out.iter().all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(self.model_error("diffusion", t, x, u, v))
        }
    }

    /// Terminal payoff; errors if non-finite or outside the declared bound.
    pub fn payoff(&self, x: &[f64]) -> Result<f64> {
        let g = self.coefficients.payoff(x);
        if !g.is_finite() {
            return Err(Error::ModelEvaluation {
                what: "payoff",
                t: self.horizon,
                x: x.to_vec(),
                u: Vec::new(),
                v: Vec::new(),
            });
        }
        if libm::fabs(g) > self.payoff_bound * (1.0 + 1e-12) {
            return Err(Error::InvalidModel(alloc::format!(
                "payoff {g} at {x:?} exceeds the declared bound {}",
                self.payoff_bound
            )));
        }
        Ok(g)
    }

    fn model_error(&self, what: &'static str, t: f64, x: &[f64], u: usize, v: usize) -> Error {
        Error::ModelEvaluation {
            what,
            t,
            x: x.to_vec(),
            u: self.u.point(u).to_vec(),
            v: self.v.point(v).to_vec(),
        }
    }

    fn check_args(&self, t: f64, x: &[f64], u: usize, v: usize) -> Result<()> {
        self.u.check(u)?;
        self.v.check(v)?;
        if x.len() != self.dim {
            return Err(Error::InvalidInput(alloc::format!(
                "state has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::InvalidInput(alloc::format!(
                "time {t} outside [0, {}]",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// `b(t, x, u, v)` for control indices `u ∈ U`, `v ∈ V`.
pub fn eval_drift(spec: &ProblemSpec, t: f64, x: &[f64], u: usize, v: usize) -> Result<Vec<f64>> {
    spec.check_args(t, x, u, v)?;
    let mut out = vec![0.0; spec.dim];
    spec.drift_into(t, x, u, v, &mut out)?;
    Ok(out)
}

/// `σ(t, x, u, v)` as a row-major `dim × dim_w` matrix.
pub fn eval_diffusion(spec: &ProblemSpec, t: f64, x: &[f64], u: usize, v: usize) -> Result<Vec<f64>> {
    spec.check_args(t, x, u, v)?;
    let mut out = vec![0.0; spec.dim * spec.dim_w];
    spec.diffusion_into(t, x, u, v, &mut out)?;
    Ok(out)
}

/// Reusable buffers for the Euler step.
#[derive(Debug, Clone)]
pub struct StepScratch {
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

impl StepScratch {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            drift: vec![0.0; spec.dim],
            diffusion: vec![0.0; spec.dim * spec.dim_w],
        }
    }
}

/// One Euler–Maruyama step, in place: `x += b dt + σ dW`.
#[allow(clippy::too_many_arguments)]
pub fn euler_step_in_place(
    spec: &ProblemSpec,
    scratch: &mut StepScratch,
    t: f64,
    dt: f64,
    x: &mut [f64],
    u: usize,
    v: usize,
    dw: &[f64],
) -> Result<()> {
    spec.drift_into(t, x, u, v, &mut scratch.drift)?;
    spec.diffusion_into(t, x, u, v, &mut scratch.diffusion)?;
    let dim_w = spec.dim_w;
    for (i, xi) in x.iter_mut().enumerate() {
        let row = &scratch.diffusion[i * dim_w..(i + 1) * dim_w];
        let noise: f64 = row.iter().zip(dw).map(|(s, w)| s * w).sum();
        *xi += scratch.drift[i] * dt + noise;
    }
    if x.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::SimulationBlowUp { t, x: x.to_vec() })
    }
}

/// One Euler–Maruyama step returning the new state.
pub fn euler_step(spec: &ProblemSpec, t: f64, dt: f64, x: &[f64], u: usize, v: usize, dw: &[f64]) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("euler step needs dt > 0".into()));
    }
    if dw.len() != spec.dim_w {
        return Err(Error::InvalidInput(alloc::format!(
            "increment has dimension {}, expected {}",
            dw.len(),
            spec.dim_w
        )));
    }
    spec.u.check(u)?;
    spec.v.check(v)?;
    let mut out = x.to_vec();
    let mut scratch = StepScratch::new(spec);
    euler_step_in_place(spec, &mut scratch, t, dt, &mut out, u, v, dw)?;
    Ok(out)
}

/// Sampled Lipschitz and linear-growth constants of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Radius of the smallest origin-centred ball containing the sampling box.
    pub radius: f64,
    pub lipschitz_estimate: f64,
    pub growth_estimate: f64,
    pub sample_count: usize,
    pub declared_lipschitz: f64,
    pub declared_growth: f64,
    pub slack: f64,
    pub lipschitz_pass: bool,
    pub growth_pass: bool,
}

impl AssumptionReport {
    pub fn pass(&self) -> bool {
        self.lipschitz_pass && self.growth_pass
    }
}

/// Declared constants and sampling controls for [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub bounds: Vec<(f64, f64)>,
    pub samples: usize,
    pub lipschitz: f64,
    pub growth: f64,
    pub slack: f64,
    pub seed: u64,
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|c| c * c).sum())
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Falsification test of the local Lipschitz and linear growth conditions.
///
/// Samples `samples` pairs of states in the box, times in `[0, T]` and control
/// pairs; the box corners are always included in the growth estimate. A model
/// that fails is certainly outside the declared constants, a model that passes
/// is merely not refuted.
pub fn validate_assumptions(spec: &ProblemSpec, check: &AssumptionCheck) -> Result<AssumptionReport> {
    if check.samples < 2 {
        return Err(Error::InvalidInput("assumption check needs at least 2 samples".into()));
    }
    if check.bounds.len() != spec.dim || check.bounds.iter().any(|(lo, hi)| !(hi > lo)) {
        return Err(Error::InvalidInput(
            "sampling box must be non-degenerate with one interval per axis".into(),
        ));
    }
    let mut rng = noise::stream_rng(noise::subkey(check.seed, noise::STREAM_SAMPLER));
    let d = spec.dim;
    let md = d * spec.dim_w;
    let (mut bx, mut by) = (vec![0.0; d], vec![0.0; d]);
    let (mut sx, mut sy) = (vec![0.0; md], vec![0.0; md]);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut lipschitz: f64 = 0.0;
    let mut growth: f64 = 0.0;

    let pick = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> usize {
        ((noise::uniform(rng) * n as f64) as usize).min(n - 1)
    };

    let growth_at = |t: f64, x: &[f64], u: usize, v: usize, growth: &mut f64| -> Result<()> {
        let mut b = vec![0.0; d];
        let mut s = vec![0.0; md];
        spec.drift_into(t, x, u, v, &mut b)?;
        spec.diffusion_into(t, x, u, v, &mut s)?;
        let q = (norm(&b) + norm(&s)) / (1.0 + norm(x));
        *growth = growth.max(q);
        Ok(())
    };

    // Box corners at t = 0 and t = T, every control pair.
    let corners = 1usize << d;
    let mut radius: f64 = 0.0;
    for c in 0..corners {
        for (axis, xi) in x.iter_mut().enumerate() {
            let (lo, hi) = check.bounds[axis];
            *xi = if c >> axis & 1 == 0 { lo } else { hi };
        }
        radius = radius.max(norm(&x));
        for t in [0.0, spec.horizon] {
            for u in 0..spec.u.len() {
                for v in 0..spec.v.len() {
                    growth_at(t, &x, u, v, &mut growth)?;
                }
            }
        }
    }

    for _ in 0..check.samples {
        for axis in 0..d {
            let (lo, hi) = check.bounds[axis];
            x[axis] = lo + (hi - lo) * noise::uniform(&mut rng);
            y[axis] = lo + (hi - lo) * noise::uniform(&mut rng);
        }
        let t = spec.horizon * noise::uniform(&mut rng);
        let u = pick(&mut rng, spec.u.len());
        let v = pick(&mut rng, spec.v.len());
        spec.drift_into(t, &x, u, v, &mut bx)?;
        spec.drift_into(t, &y, u, v, &mut by)?;
        spec.diffusion_into(t, &x, u, v, &mut sx)?;
        spec.diffusion_into(t, &y, u, v, &mut sy)?;
        let dist = diff_norm(&x, &y);
        if dist > 0.0 {
            let q = (diff_norm(&bx, &by) + diff_norm(&sx, &sy)) / dist;
            lipschitz = lipschitz.max(q);
        }
        growth = growth
            .max((norm(&bx) + norm(&sx)) / (1.0 + norm(&x)))
            .max((norm(&by) + norm(&sy)) / (1.0 + norm(&y)));
    }

    let within = |estimate: f64, declared: f64| estimate <= declared * (1.0 + check.slack);
    Ok(AssumptionReport {
        radius,
        lipschitz_estimate: lipschitz,
        growth_estimate: growth,
        sample_count: check.samples,
        declared_lipschitz: check.lipschitz,
        declared_growth: check.growth,
        slack: check.slack,
        lipschitz_pass: within(lipschitz, check.lipschitz),
        growth_pass: within(growth, check.growth),
    })
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L({:.3}) ≈ {:.6} (declared {}, {}), C ≈ {:.6} (declared {}, {})",
            self.radius,
            self.lipschitz_estimate,
            self.declared_lipschitz,
            if self.lipschitz_pass { "pass" } else { "FAIL" },
            self.growth_estimate,
            self.declared_growth,
            if self.growth_pass { "pass" } else { "FAIL" },
        )
    }
}

impl fmt::Display for ControlSetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlSetLabel::U => "U",
            ControlSetLabel::V => "V",
        })
    }
}

/// Which player owns a control set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlSetLabel {
    U,
    V,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;

    const S2: f64 = core::f64::consts::SQRT_2;

    #[test]
    fn drift_examples() {
        let pennies = problems::pennies(1.0).unwrap();
        // U = V = {-1, +1}: u = 1 is index 1, v = -1 is index 0.
        assert_eq!(eval_drift(&pennies, 0.0, &[0.0], 1, 0).unwrap(), vec![-1.0]);
        let heat = problems::heat(0.5).unwrap();
        assert_eq!(eval_drift(&heat, 0.3, &[2.0], 0, 0).unwrap(), vec![0.0]);
        let dc = problems::drift_control(1.0).unwrap();
        // U = {-1, 0, 1}, V = {-0.5, 0, 0.5}
        assert_eq!(eval_drift(&dc, 0.0, &[0.0], 2, 0).unwrap(), vec![0.5]);
    }

    #[test]
    fn diffusion_examples() {
        let heat = problems::heat(0.5).unwrap();
        assert!((eval_diffusion(&heat, 0.1, &[4.0], 0, 0).unwrap()[0] - core::f64::consts::SQRT_2).abs() < 1e-15);
        let pennies = problems::pennies(1.0).unwrap();
        assert_eq!(eval_diffusion(&pennies, 0.1, &[4.0], 0, 1).unwrap(), vec![1.0]);
        let frozen = problems::frozen(1.0).unwrap();
        assert_eq!(eval_diffusion(&frozen, 0.1, &[4.0], 0, 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn rejects_points_outside_sets_and_bad_times() {
        let pennies = problems::pennies(1.0).unwrap();
        assert!(eval_drift(&pennies, 0.0, &[0.0], 2, 0).is_err());
        assert!(eval_drift(&pennies, 2.0, &[0.0], 0, 0).is_err());
        assert!(eval_drift(&pennies, 0.0, &[0.0, 1.0], 0, 0).is_err());
    }

    struct Exploding;
    impl Coefficients for Exploding {
        fn drift(&self, _t: f64, x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) {
            out[0] = 1.0 / x[0];
        }
        fn diffusion(&self, _t: f64, _x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn payoff(&self, _x: &[f64]) -> f64 {
            0.0
        }
    }

    #[test]
    fn non_finite_drift_names_inputs() {
        let u = ControlSet::scalar("U", &[0.0]).unwrap();
        let v = ControlSet::scalar("V", &[0.0]).unwrap();
        let spec = ProblemSpec::new("bad", 1, 1, 1.0, 1.0, Arc::new(Exploding), u, v).unwrap();
        match eval_drift(&spec, 0.5, &[0.0], 0, 0) {
            Err(Error::ModelEvaluation { what, t, x, .. }) => {
                assert_eq!(what, "drift");
                assert_eq!(t, 0.5);
                assert_eq!(x, vec![0.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn euler_examples() {
        let frozen = problems::frozen(1.0).unwrap();
        assert_eq!(euler_step(&frozen, 0.0, 0.7, &[3.0], 0, 0, &[0.4]).unwrap(), vec![3.0]);
        let dc = problems::drift_control_with(1.0, 0.0).unwrap();
        // u = 1 (index 2), v = 0 (index 1), σ = 0
        let x = euler_step(&dc, 0.0, 0.1, &[0.0], 2, 1, &[0.3]).unwrap();
        assert!((x[0] - 0.1).abs() < 1e-15);
        let heat = problems::heat(0.5).unwrap();
        let x = euler_step(&heat, 0.0, 0.01, &[0.0], 0, 0, &[0.5]).unwrap();
        assert!((x[0] - S2 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn euler_blow_up_is_reported() {
        let u = ControlSet::scalar("U", &[0.0]).unwrap();
        let v = ControlSet::scalar("V", &[0.0]).unwrap();
        let spec = ProblemSpec::new("bad", 1, 1, 1.0, 1.0, Arc::new(Exploding), u, v).unwrap();
        assert!(matches!(
            euler_step(&spec, 0.0, 0.1, &[0.0], 0, 0, &[0.0]),
            Err(Error::ModelEvaluation { .. })
        ));
        let grow = problems::growth_violator(1.0).unwrap();
        assert!(matches!(
            euler_step(&grow, 0.0, 1.0, &[1e154], 0, 0, &[1e308]),
            Err(Error::SimulationBlowUp { .. })
        ));
    }

    #[test]
    fn euler_is_affine_in_increment() {
        let spec = problems::drift_control(1.0).unwrap();
        let base = euler_step(&spec, 0.2, 0.05, &[0.3], 0, 2, &[0.0]).unwrap();
        for a in [-2.0, -0.3, 0.7, 5.0] {
            let x = euler_step(&spec, 0.2, 0.05, &[0.3], 0, 2, &[a]).unwrap();
            assert!((x[0] - base[0] - a * 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn control_set_invariants() {
        assert!(ControlSet::scalar("U", &[]).is_err());
        assert!(ControlSet::scalar("U", &[1.0, 1.0]).is_err());
        assert!(ControlSet::scalar("U", &[f64::NAN]).is_err());
        let s = ControlSet::scalar("V", &[-1.0, 1.0]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.index_of(&[1.0]), Some(1));
    }

    fn check(bounds: (f64, f64), lipschitz: f64, growth: f64) -> AssumptionCheck {
        AssumptionCheck {
            bounds: vec![bounds],
            samples: 2000,
            lipschitz,
            growth,
            slack: 0.01,
            seed: 3,
        }
    }

    #[test]
    fn x_free_coefficients_have_zero_lipschitz_estimate() {
        let dc = problems::drift_control(1.0).unwrap();
        let r = validate_assumptions(&dc, &check((-5.0, 5.0), 0.0, 2.5)).unwrap();
        assert_eq!(r.lipschitz_estimate, 0.0);
        assert!(r.lipschitz_pass);
        let heat = problems::heat(0.5).unwrap();
        let r = validate_assumptions(&heat, &check((-5.0, 5.0), 0.0, 2.0)).unwrap();
        assert!(r.pass(), "{r}");
    }

    #[test]
    fn growth_violator_fails_growth() {
        let bad = problems::growth_violator(1.0).unwrap();
        let r = validate_assumptions(&bad, &check((-10.0, 10.0), 100.0, 1.0)).unwrap();
        assert!(!r.growth_pass);
        // The corner x = 10 alone gives (100 + 1) / 11 with σ = 1.
        assert!(r.growth_estimate >= 101.0 / 11.0 - 1e-12);
    }

    #[test]
    fn assumption_check_preconditions() {
        let heat = problems::heat(0.5).unwrap();
        let mut c = check((-1.0, 1.0), 0.0, 2.0);
        c.samples = 1;
        assert!(validate_assumptions(&heat, &c).is_err());
        assert!(validate_assumptions(&heat, &check((1.0, 1.0), 0.0, 2.0)).is_err());
    }
}
