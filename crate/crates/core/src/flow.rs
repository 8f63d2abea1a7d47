//! Semigroup engine.
//!
//! A [`FlowModel`] bundles a vector field `f` (the generator of the
//! semigroup) with an optional closed-form flow `F_t`. [`FlowModel::evolve`]
//! uses the closed form when present and otherwise integrates the Cauchy
//! problem `du/dt = f(u)` with fixed-step RK4. Leaving the domain is an
//! error, never a clamp.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, NormTag, Scalar};
use crate::error::{Error, Result};
use crate::ode::{rk4_step, time_grid};
use crate::options::SolverOptions;

pub type VectorField = Arc<dyn Fn(&[Scalar]) -> Vec<Scalar> + Send + Sync>;
pub type FlowMap = Arc<dyn Fn(f64, &[Scalar]) -> Vec<Scalar> + Send + Sync>;
pub type JacobianField = Arc<dyn Fn(&[Scalar]) -> AlgebraElement + Send + Sync>;

/// A point of the state space together with the norm measuring it.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorState {
    coords: Vec<Scalar>,
    tag: NormTag,
}

impl VectorState {
    pub fn new(coords: Vec<Scalar>, tag: NormTag) -> Self {
        assert!(!coords.is_empty(), "state dimension must be positive");
        Self { coords, tag }
    }

    pub fn real(coords: &[f64], tag: NormTag) -> Self {
        Self::new(coords.iter().map(|&v| Scalar::new(v, 0.0)).collect(), tag)
    }

    pub fn zeros(n: usize, tag: NormTag) -> Self {
        Self::new(vec![Scalar::new(0.0, 0.0); n], tag)
    }

    /// `r·e_k`
    pub fn basis(n: usize, k: usize, r: f64, tag: NormTag) -> Self {
        let mut v = Self::zeros(n, tag);
        v.coords[k] = Scalar::new(r, 0.0);
        v
    }

    pub fn coords(&self) -> &[Scalar] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn tag(&self) -> NormTag {
        self.tag
    }

    pub fn norm(&self) -> f64 {
        self.tag.vector_norm(&self.coords)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn distance(&self, other: &VectorState) -> f64 {
        let diff: Vec<Scalar> = self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect();
        self.tag.vector_norm(&diff)
    }

    /// `self + c·v`
    pub fn offset(&self, c: f64, v: &[Scalar]) -> VectorState {
        let coords = self.coords.iter().zip(v).map(|(a, b)| a + b * c).collect();
        VectorState::new(coords, self.tag)
    }

    fn with_coords(&self, coords: Vec<Scalar>) -> VectorState {
        VectorState::new(coords, self.tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    OpenBall {
        radius: f64,
    },
    /// Real interval; states are one-dimensional.
    Interval {
        a: f64,
        b: f64,
    },
    WholeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub tag: NormTag,
    pub dim: usize,
}

impl DomainDescriptor {
    pub fn ball(radius: f64, tag: NormTag, dim: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::BadParameter(format!("ball radius {radius} must be positive")));
        }
        Self::checked(DomainKind::OpenBall { radius }, tag, dim)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::BadParameter(format!("interval ({a}, {b}) is empty")));
        }
        Self::checked(DomainKind::Interval { a, b }, NormTag::LInf, 1)
    }

    pub fn whole_space(tag: NormTag, dim: usize) -> Result<Self> {
        Self::checked(DomainKind::WholeSpace, tag, dim)
    }

    fn checked(kind: DomainKind, tag: NormTag, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::BadParameter("domain dimension must be positive".into()));
        }
        Ok(Self { kind, tag, dim })
    }

    /// Distance to the boundary; positive exactly on the open domain.
    pub fn boundary_distance(&self, x: &VectorState) -> f64 {
        match self.kind {
            DomainKind::OpenBall { radius } => radius - x.norm(),
            DomainKind::Interval { a, b } => {
                let z = x.coords()[0];
                if z.im != 0.0 {
                    return -z.im.abs();
                }
                (z.re - a).min(b - z.re)
            }
            DomainKind::WholeSpace => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &VectorState) -> bool {
        x.dim() == self.dim && x.is_finite() && self.boundary_distance(x) > 0.0
    }

    /// Deterministic points at distance at least `delta` from the boundary.
    ///
    /// The first point is the worst case on the margin, `(radius − δ)·e₁`
    /// (for an interval, `b − δ`); the rest are seeded random real points.
    /// On the whole space `delta` is ignored and points fill the unit ball.
    pub fn sample_strictly_inside(&self, delta: f64, count: usize, seed: u64) -> Result<SampleSet> {
        if count == 0 {
            return Err(Error::BadParameter("sample count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(count);
        match self.kind {
            DomainKind::OpenBall { radius } => {
                if !(delta > 0.0 && delta < radius) {
                    return Err(Error::BadMargin { delta });
                }
                let reach = radius - delta;
                points.push(VectorState::basis(self.dim, 0, reach, self.tag));
                while points.len() < count {
                    points.push(random_in_ball(&mut rng, self.dim, reach, self.tag));
                }
            }
            DomainKind::Interval { a, b } => {
                if !(delta > 0.0 && 2.0 * delta < b - a) {
                    return Err(Error::BadMargin { delta });
                }
                points.push(VectorState::real(&[b - delta], self.tag));
                while points.len() < count {
                    let v = rng.gen_range(a + delta..=b - delta);
                    points.push(VectorState::real(&[v], self.tag));
                }
            }
            DomainKind::WholeSpace => {
                points.push(VectorState::basis(self.dim, 0, 1.0, self.tag));
                while points.len() < count {
                    points.push(random_in_ball(&mut rng, self.dim, 1.0, self.tag));
                }
            }
        }
        Ok(SampleSet {
            points,
            margin: delta,
            seed,
        })
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, reach: f64, tag: NormTag) -> VectorState {
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let dir = VectorState::real(&raw, tag);
        let n = dir.norm();
        if n < 1e-12 {
            continue;
        }
        let r = reach * rng.gen::<f64>();
        let coords = raw.iter().map(|v| Scalar::new(v * r / n, 0.0)).collect();
        return VectorState::new(coords, tag);
    }
}

/// Points bounded away from the boundary of a domain by `margin`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<VectorState>,
    pub margin: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<VectorState>,
    pub step: f64,
    pub method: Method,
}

impl Trajectory {
    pub fn final_state(&self) -> &VectorState {
        self.states.last().expect("trajectory has at least one node")
    }
}

/// A one-parameter semigroup on a domain.
#[derive(Clone)]
pub struct FlowModel {
    pub domain: DomainDescriptor,
    generator: VectorField,
    closed_form: Option<FlowMap>,
    reversible: bool,
    jacobian: Option<JacobianField>,
    fixed_point: Option<VectorState>,
    invariant_margin: Option<f64>,
}

impl fmt::Debug for FlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowModel")
            .field("domain", &self.domain)
            .field("closed_form", &self.closed_form.is_some())
            .field("reversible", &self.reversible)
            .field("jacobian", &self.jacobian.is_some())
            .field("fixed_point", &self.fixed_point)
            .field("invariant_margin", &self.invariant_margin)
            .finish()
    }
}

impl FlowModel {
    pub fn new(domain: DomainDescriptor, generator: VectorField) -> Self {
        Self {
            domain,
            generator,
            closed_form: None,
            reversible: false,
            jacobian: None,
            fixed_point: None,
            invariant_margin: None,
        }
    }

    /// Attach `F_t`. `reversible` declares that the map is also valid for
    /// negative `t` (a group), which the backward cocycle needs.
    pub fn with_closed_form(mut self, map: FlowMap, reversible: bool) -> Self {
        self.closed_form = Some(map);
        self.reversible = reversible;
        self
    }

    pub fn with_jacobian(mut self, jacobian: JacobianField) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    /// Fails unless `f(x₀)` vanishes to `1e-12`.
    pub fn with_fixed_point(mut self, x0: VectorState) -> Result<Self> {
        let residual = x0.tag().vector_norm(&(self.generator)(x0.coords()));
        if !(residual <= 1e-12) {
            return Err(Error::BadParameter(format!(
                "declared fixed point has |f(x0)| = {residual:e}"
            )));
        }
        self.fixed_point = Some(x0);
        Ok(self)
    }

    pub fn with_invariant_margin(mut self, delta: f64) -> Self {
        self.invariant_margin = Some(delta);
        self
    }

    /// Same generator, closed form dropped: forces integration.
    pub fn generator_only(&self) -> Self {
        Self {
            closed_form: None,
            reversible: false,
            ..self.clone()
        }
    }

    pub fn generator(&self, x: &[Scalar]) -> Vec<Scalar> {
        (self.generator)(x)
    }

    pub fn vector_field(&self) -> &VectorField {
        &self.generator
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible && self.closed_form.is_some()
    }

    pub fn jacobian(&self) -> Option<&JacobianField> {
        self.jacobian.as_ref()
    }

    pub fn fixed_point(&self) -> Option<&VectorState> {
        self.fixed_point.as_ref()
    }

    pub fn invariant_margin(&self) -> Option<f64> {
        self.invariant_margin
    }

    /// `F_t(x)` from the closed form for any real `t` the model accepts.
    pub fn closed_form_at(&self, t: f64, x: &VectorState) -> Option<VectorState> {
        let map = self.closed_form.as_ref()?;
        if t < 0.0 && !self.reversible {
            return None;
        }
        Some(x.with_coords(map(t, x.coords())))
    }

    /// Solve the Cauchy problem `du/dt = f(u)`, `u(0) = x₀`, on `[0, T]`.
    pub fn evolve(&self, x0: &VectorState, t_end: f64, opts: &SolverOptions) -> Result<Trajectory> {
        opts.validate()?;
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::BadParameter(format!(
                "final time {t_end} must be finite and ≥ 0"
            )));
        }
        if x0.dim() != self.domain.dim {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim,
                got: x0.dim(),
            });
        }
        if !self.domain.contains(x0) {
            return Err(Error::LeftDomain { t: 0.0 });
        }
        let times = time_grid(t_end, opts.h);
        let step = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let mut states = Vec::with_capacity(times.len());
        states.push(x0.clone());
        let method = if self.closed_form.is_some() {
            Method::ClosedForm
        } else {
            Method::Rk4
        };
        for w in times.windows(2) {
            let next = match &self.closed_form {
                Some(map) => x0.with_coords(map(w[1], x0.coords())),
                None => {
                    let prev = states.last().expect("non-empty");
                    x0.with_coords(rk4_step(self.generator.as_ref(), prev.coords(), w[1] - w[0]))
                }
            };
            if !next.is_finite() {
                return Err(Error::NonFinite { t: w[1] });
            }
            if !self.domain.contains(&next) {
                return Err(Error::LeftDomain { t: w[1] });
            }
            states.push(next);
        }
        Ok(Trajectory {
            times,
            states,
            step,
            method,
        })
    }

    pub fn flow_at(&self, x: &VectorState, t: f64, opts: &SolverOptions) -> Result<VectorState> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        if let Some(y) = self.closed_form_at(t, x) {
            if !y.is_finite() {
                return Err(Error::NonFinite { t });
            }
            if !self.domain.contains(&y) {
                return Err(Error::LeftDomain { t });
            }
            return Ok(y);
        }
        Ok(self.evolve(x, t, opts)?.final_state().clone())
    }

    /// `‖F_{t+s}(x) − F_t(F_s(x))‖`
    pub fn semigroup_residual(&self, x: &VectorState, s: f64, t: f64, opts: &SolverOptions) -> Result<f64> {
        let direct = self.flow_at(x, t + s, opts)?;
        let composed = self.flow_at(&self.flow_at(x, s, opts)?, t, opts)?;
        Ok(direct.distance(&composed))
    }

    /// Richardson-extrapolated difference quotient `(F_τ(x) − x)/τ` from
    /// `τ ∈ {h, h/2}`; the error is `O(h²)` for smooth flows.
    pub fn numeric_generator(&self, x: &VectorState, h: f64) -> Result<Vec<Scalar>> {
        if !(h > 0.0) {
            return Err(Error::BadParameter(format!("difference step {h} must be positive")));
        }
        let quotient = |tau: f64| -> Result<Vec<Scalar>> {
            let opts = SolverOptions::default().with_step(tau / 4.0);
            let y = self.flow_at(x, tau, &opts)?;
            Ok(y.coords().iter().zip(x.coords()).map(|(a, b)| (a - b) / tau).collect())
        };
        let coarse = quotient(h)?;
        let fine = quotient(h / 2.0)?;
        Ok(fine.iter().zip(&coarse).map(|(f, c)| 2.0 * f - c).collect())
    }
}
