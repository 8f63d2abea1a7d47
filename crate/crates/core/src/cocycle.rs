//! Semicocycle engine.
//!
//! A [`CocycleModel`] is a family `Γ_t : D → L(ℂ^m)` over a base flow,
//! given in closed form, through its generator `B` (then `Γ_t(x)` solves
//! `dv/dt = B(F_t(x)) v`, `v(0) = 1`), or both. Every algebraic identity a
//! semicocycle must satisfy is exposed as a residual so the same code checks
//! closed forms, integrated families and deliberately broken ones.

use std::fmt;
use std::sync::Arc;

use crate::algebra::{AlgebraElement, NormTag, Scalar};
use crate::error::{Error, Result};
use crate::flow::{FlowModel, VectorState};
use crate::ode::{rk4_step, running_simpson, time_grid};
use crate::options::SolverOptions;

pub type CocycleMap = Arc<dyn Fn(f64, &[Scalar]) -> Result<AlgebraElement> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[Scalar]) -> AlgebraElement + Send + Sync>;

#[derive(Clone)]
pub struct CocycleModel {
    dim: usize,
    tag: NormTag,
    base_flow: FlowModel,
    closed_form: Option<CocycleMap>,
    generator: Option<MatrixField>,
}

impl fmt::Debug for CocycleModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CocycleModel")
            .field("dim", &self.dim)
            .field("tag", &self.tag)
            .field("base_flow", &self.base_flow)
            .field("closed_form", &self.closed_form.is_some())
            .field("generator", &self.generator.is_some())
            .finish()
    }
}

/// Time grid with flow states, cocycle values and the running integral
/// `V(t, x) = ∫₀^t Γ_τ(x) dτ`.
#[derive(Debug, Clone)]
pub struct CocyclePath {
    pub times: Vec<f64>,
    pub flow_states: Vec<VectorState>,
    pub gamma: Vec<AlgebraElement>,
    pub v: Vec<AlgebraElement>,
}

impl CocyclePath {
    pub fn final_gamma(&self) -> &AlgebraElement {
        self.gamma.last().expect("path has at least one node")
    }

    pub fn final_v(&self) -> &AlgebraElement {
        self.v.last().expect("path has at least one node")
    }

    pub fn step(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }
}

impl CocycleModel {
    pub fn closed_form(base_flow: FlowModel, dim: usize, tag: NormTag, map: CocycleMap) -> Self {
        Self {
            dim,
            tag,
            base_flow,
            closed_form: Some(map),
            generator: None,
        }
    }

    pub fn generated(base_flow: FlowModel, dim: usize, tag: NormTag, generator: MatrixField) -> Self {
        Self {
            dim,
            tag,
            base_flow,
            closed_form: None,
            generator: Some(generator),
        }
    }

    pub fn with_generator(mut self, generator: MatrixField) -> Self {
        self.generator = Some(generator);
        self
    }

    pub fn with_closed_form(mut self, map: CocycleMap) -> Self {
        self.closed_form = Some(map);
        self
    }

    /// Copy that can only be evaluated by solving the evolution problem.
    pub fn generated_only(&self) -> Result<Self> {
        if self.generator.is_none() {
            return Err(Error::NoGenerator);
        }
        Ok(Self {
            closed_form: None,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> NormTag {
        self.tag
    }

    pub fn base_flow(&self) -> &FlowModel {
        &self.base_flow
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    pub fn has_generator(&self) -> bool {
        self.generator.is_some()
    }

    pub fn generator_at(&self, x: &VectorState) -> Option<AlgebraElement> {
        self.generator.as_ref().map(|b| b(x.coords()))
    }

    fn identity(&self) -> AlgebraElement {
        AlgebraElement::identity(self.dim, self.tag)
    }

    fn check_start(&self, x0: &VectorState, t_end: f64, opts: &SolverOptions) -> Result<()> {
        opts.validate()?;
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::BadParameter(format!(
                "final time {t_end} must be finite and ≥ 0"
            )));
        }
        let domain = &self.base_flow.domain;
        if x0.dim() != domain.dim {
            return Err(Error::DimensionMismatch {
                expected: domain.dim,
                got: x0.dim(),
            });
        }
        if !domain.contains(x0) {
            return Err(Error::LeftDomain { t: 0.0 });
        }
        Ok(())
    }

    /// Solve `dv/dt = B(F_t(x₀)) v`, `v(0) = 1`, on `[0, T]`.
    ///
    /// The flow ODE and the matrix ODE are advanced together as one RK4
    /// system (the generator of the skew-product flow is `(f(x), B(x)a)`).
    /// Models without a generator have their closed form sampled on the same
    /// grid instead. `V` is the running Simpson integral of `Γ`.
    pub fn solve_cocycle(&self, x0: &VectorState, t_end: f64, opts: &SolverOptions) -> Result<CocyclePath> {
        self.check_start(x0, t_end, opts)?;
        match &self.generator {
            Some(generator) => self.integrate(generator, x0, t_end, opts),
            None => self.sample_closed_form(x0, t_end, opts),
        }
    }

    /// Like [`solve_cocycle`](Self::solve_cocycle) but preferring the closed
    /// form, so grid values agree with [`gamma_at`](Self::gamma_at).
    pub fn path(&self, x0: &VectorState, t_end: f64, opts: &SolverOptions) -> Result<CocyclePath> {
        self.check_start(x0, t_end, opts)?;
        match (&self.closed_form, &self.generator) {
            (Some(_), _) => self.sample_closed_form(x0, t_end, opts),
            (None, Some(generator)) => self.integrate(generator, x0, t_end, opts),
            (None, None) => Err(Error::NoGenerator),
        }
    }

    fn integrate(
        &self,
        generator: &MatrixField,
        x0: &VectorState,
        t_end: f64,
        opts: &SolverOptions,
    ) -> Result<CocyclePath> {
        let n = x0.dim();
        let m = self.dim;
        let field = self.base_flow.vector_field().clone();
        let b = generator.clone();
        let tag = self.tag;
        let joint = move |y: &[Scalar]| -> Vec<Scalar> {
            let (x, g) = y.split_at(n);
            let mut out = field(x);
            let gamma = AlgebraElement::from_entries(m, g.to_vec(), tag);
            out.extend_from_slice((&b(x) * &gamma).entries());
            out
        };

        let times = time_grid(t_end, opts.h);
        let mut state: Vec<Scalar> = x0.coords().to_vec();
        state.extend_from_slice(self.identity().entries());
        let mut flow_states = Vec::with_capacity(times.len());
        let mut gamma = Vec::with_capacity(times.len());
        flow_states.push(x0.clone());
        gamma.push(self.identity());
        for w in times.windows(2) {
            state = rk4_step(&joint, &state, w[1] - w[0]);
            if !state.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { t: w[1] });
            }
            let x = VectorState::new(state[..n].to_vec(), x0.tag());
            if !self.base_flow.domain.contains(&x) {
                return Err(Error::LeftDomain { t: w[1] });
            }
            flow_states.push(x);
            gamma.push(AlgebraElement::from_entries(m, state[n..].to_vec(), tag));
        }
        Ok(self.finish(times, flow_states, gamma))
    }

    fn sample_closed_form(&self, x0: &VectorState, t_end: f64, opts: &SolverOptions) -> Result<CocyclePath> {
        let map = self.closed_form.as_ref().ok_or(Error::NoGenerator)?;
        let trajectory = self.base_flow.evolve(x0, t_end, opts)?;
        let mut gamma = Vec::with_capacity(trajectory.times.len());
        for &t in &trajectory.times {
            let g = if t == 0.0 {
                self.identity()
            } else {
                map(t, x0.coords())?
            };
            if !g.is_finite() {
                return Err(Error::NonFinite { t });
            }
            gamma.push(g);
        }
        Ok(self.finish(trajectory.times, trajectory.states, gamma))
    }

    fn finish(&self, times: Vec<f64>, flow_states: Vec<VectorState>, gamma: Vec<AlgebraElement>) -> CocyclePath {
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let v = running_simpson(&gamma, dt);
        CocyclePath {
            times,
            flow_states,
            gamma,
            v,
        }
    }

    /// `Γ_t(x)`: the closed form when available, else the last node of
    /// [`solve_cocycle`](Self::solve_cocycle). `Γ_0` is exactly the identity.
    pub fn gamma_at(&self, x: &VectorState, t: f64, opts: &SolverOptions) -> Result<AlgebraElement> {
        self.check_start(x, t, opts)?;
        if t == 0.0 {
            return Ok(self.identity());
        }
        match &self.closed_form {
            Some(map) => {
                let g = map(t, x.coords())?;
                if !g.is_finite() {
                    return Err(Error::NonFinite { t });
                }
                Ok(g)
            }
            None => Ok(self.solve_cocycle(x, t, opts)?.final_gamma().clone()),
        }
    }

    /// `V(t, x) = ∫₀^t Γ_τ(x) dτ` by Simpson on the solver grid.
    pub fn v_at(&self, x: &VectorState, t: f64, opts: &SolverOptions) -> Result<AlgebraElement> {
        Ok(self.path(x, t, opts)?.final_v().clone())
    }

    /// `‖Γ_{t+s}(x) − Γ_t(F_s(x)) Γ_s(x)‖`
    pub fn chain_rule_residual(&self, x: &VectorState, s: f64, t: f64, opts: &SolverOptions) -> Result<f64> {
        let direct = self.gamma_at(x, t + s, opts)?;
        let moved = self.base_flow.flow_at(x, s, opts)?;
        let composed = &self.gamma_at(&moved, t, opts)? * &self.gamma_at(x, s, opts)?;
        Ok((&direct - &composed).norm())
    }

    /// `‖V(s, F_t(x)) Γ_t(x) − (V(t+s, x) − V(t, x))‖`
    pub fn v_identity_residual(&self, x: &VectorState, s: f64, t: f64, opts: &SolverOptions) -> Result<f64> {
        let moved = self.base_flow.flow_at(x, t, opts)?;
        let lhs = &self.v_at(&moved, s, opts)? * &self.gamma_at(x, t, opts)?;
        let rhs = &self.v_at(x, t + s, opts)? - &self.v_at(x, t, opts)?;
        Ok((&lhs - &rhs).norm())
    }

    /// Recover `B(x)` from the family alone:
    ///
    /// `B(x) = V(s,x)⁻¹ (Γ_s(x) − 1 − ∫₀^s Γ_τ'(x)[f(x)] dτ)`.
    ///
    /// The directional derivative is a central difference along `f(x)` with
    /// step `opts.fd_step`. When `V(s, x)` fails the condition gate `s` is
    /// halved, at most four times.
    pub fn recover_generator(&self, x: &VectorState, s: f64, opts: &SolverOptions) -> Result<AlgebraElement> {
        let mut s = s;
        let mut attempt = 0;
        loop {
            match self.recover_generator_once(x, s, opts) {
                Err(Error::IllConditioned { .. }) if attempt < 4 => {
                    attempt += 1;
                    s /= 2.0;
                }
                other => return other,
            }
        }
    }

    fn recover_generator_once(&self, x: &VectorState, s: f64, opts: &SolverOptions) -> Result<AlgebraElement> {
        if !(s > 0.0) {
            return Err(Error::BadParameter(format!("inner time s = {s} must be positive")));
        }
        let direction = self.base_flow.generator(x.coords());
        let eta = opts.fd_step;
        let center = self.path(x, s, opts)?;
        let plus = self.path(&x.offset(eta, &direction), s, opts)?;
        let minus = self.path(&x.offset(-eta, &direction), s, opts)?;
        let inv_two_eta = Scalar::new(1.0 / (2.0 * eta), 0.0);
        let derivative: Vec<AlgebraElement> = plus
            .gamma
            .iter()
            .zip(&minus.gamma)
            .map(|(p, m)| (p - m).scale(inv_two_eta))
            .collect();
        let transport = running_simpson(&derivative, center.step());
        let transport = transport.last().expect("non-empty");
        let numerator = &(center.final_gamma() - &self.identity()) - transport;
        let v_inv = center.final_v().inverse(opts.max_condition)?;
        Ok(&v_inv * &numerator)
    }

    /// Skew-product image `(F_t(x), Γ_t(x) y)`.
    pub fn extended_step(
        &self,
        x: &VectorState,
        y: &[Scalar],
        t: f64,
        opts: &SolverOptions,
    ) -> Result<(VectorState, Vec<Scalar>)> {
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        let moved = self.base_flow.flow_at(x, t, opts)?;
        let image = self.gamma_at(x, t, opts)?.mul_vec(y);
        Ok((moved, image))
    }

    /// `‖F̃_{s+t}(x,y) − F̃_s(F̃_t(x,y))‖`, the larger of the two component
    /// distances.
    pub fn extended_semigroup_residual(
        &self,
        x: &VectorState,
        y: &[Scalar],
        s: f64,
        t: f64,
        opts: &SolverOptions,
    ) -> Result<f64> {
        let (x_direct, y_direct) = self.extended_step(x, y, s + t, opts)?;
        let (x1, y1) = self.extended_step(x, y, t, opts)?;
        let (x2, y2) = self.extended_step(&x1, &y1, s, opts)?;
        let dy: Vec<Scalar> = y_direct.iter().zip(&y2).map(|(a, b)| a - b).collect();
        Ok(x_direct.distance(&x2).max(self.tag.vector_norm(&dy)))
    }

    /// `Γ_{-t}(x) = (Γ_t(F_{-t}(x)))⁻¹`, defined when the base flow has a
    /// closed-form inverse whose backward orbit stays in the domain.
    pub fn inverse_cocycle_value(&self, x: &VectorState, t: f64, opts: &SolverOptions) -> Result<AlgebraElement> {
        if !self.base_flow.is_reversible() {
            return Err(Error::NoBackwardFlow("base flow has no closed-form inverse".into()));
        }
        let back = self
            .base_flow
            .closed_form_at(-t, x)
            .ok_or_else(|| Error::NoBackwardFlow("base flow has no closed-form inverse".into()))?;
        if !self.base_flow.domain.contains(&back) {
            return Err(Error::NoBackwardFlow(format!(
                "F_(-{t})(x) leaves the domain (norm {:.6})",
                back.norm()
            )));
        }
        self.gamma_at(&back, t, opts)?.inverse(opts.max_condition)
    }
}

/// Derivative cocycle `Γ_t(x) = F_t'(x)`, generated by `B = f'`.
///
/// Uses the flow's exact Jacobian when it has one, otherwise central
/// differences of `f` with step `fd_step`.
pub fn derivative_cocycle(flow: &FlowModel, fd_step: f64) -> CocycleModel {
    let n = flow.domain.dim;
    let tag = flow.domain.tag;
    let generator: MatrixField = match flow.jacobian() {
        Some(j) => j.clone(),
        None => {
            let field = flow.vector_field().clone();
            Arc::new(move |x: &[Scalar]| {
                let mut jac = AlgebraElement::zeros(n, tag);
                for j in 0..n {
                    let mut plus = x.to_vec();
                    let mut minus = x.to_vec();
                    plus[j] += fd_step;
                    minus[j] -= fd_step;
                    let (fp, fm) = (field(&plus), field(&minus));
                    for i in 0..n {
                        jac.set(i, j, (fp[i] - fm[i]) / (2.0 * fd_step));
                    }
                }
                jac
            })
        }
    };
    CocycleModel::generated(flow.clone(), n, tag, generator)
}

/// Coboundary cocycle `Γ_t(x) = M(F_t(x)) M(x)⁻¹`.
///
/// Evaluation fails with `IllConditioned` where `M(x)` does not pass the
/// gate `opts.max_condition`.
pub fn conjugation_cocycle(
    conjugator: MatrixField,
    dim: usize,
    tag: NormTag,
    flow: &FlowModel,
    opts: SolverOptions,
) -> CocycleModel {
    let base = flow.clone();
    let map: CocycleMap = Arc::new(move |t: f64, x: &[Scalar]| {
        let state = VectorState::new(x.to_vec(), base.domain.tag);
        let moved = base.flow_at(&state, t, &opts)?;
        let inv = conjugator(x).inverse(opts.max_condition)?;
        Ok(&conjugator(moved.coords()) * &inv)
    });
    CocycleModel::closed_form(flow.clone(), dim, tag, map)
}
