//! Dual-branch Adam.
//!
//! The event loss and the auxiliary post loss each drive their own Adam
//! instance (separate first/second moments and step counters). Their steps
//! are summed into the shared parameters, with the post-branch step scaled by
//! an attenuation factor β that decays to zero over the first epochs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{in_event_branch, in_post_branch, Mode};
use crate::scalar::Scalar;
use crate::tensor::{Gradients, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Event,
    Post,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Event => "event",
            Branch::Post => "post",
        }
    }

    /// Whether the named parameter is updated by this branch.
    pub fn owns(self, name: &str) -> bool {
        match self {
            Branch::Event => in_event_branch(name),
            Branch::Post => in_post_branch(name),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    /// Learning rate η.
    pub lr: f64,
    /// First-moment decay μ.
    pub mu: f64,
    /// Second-moment decay ν.
    pub nu: f64,
    pub eps: f64,
    /// Per-branch global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            mu: 0.9,
            nu: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// β as a function of the (0-based) epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttenuationSchedule {
    /// `max(0, 1 - epoch / zero_epoch)`
    Linear { zero_epoch: usize },
    Constant { beta: f64 },
}

impl Default for AttenuationSchedule {
    fn default() -> Self {
        AttenuationSchedule::Linear { zero_epoch: 15 }
    }
}

impl AttenuationSchedule {
    pub fn beta(&self, epoch: usize) -> f64 {
        match *self {
            AttenuationSchedule::Linear { zero_epoch } => {
                if zero_epoch == 0 || epoch >= zero_epoch {
                    0.0
                } else {
                    1.0 - epoch as f64 / zero_epoch as f64
                }
            }
            AttenuationSchedule::Constant { beta } => beta,
        }
    }
}

/// Moments and step counter for one branch, aligned with the parameter store.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchState<T> {
    pub m: Vec<Tensor<T>>,
    pub n: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Scalar> BranchState<T> {
    fn zeros_like(params: &ParamStore<T>) -> Self {
        let z: Vec<Tensor<T>> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self {
            m: z.clone(),
            n: z,
            t: 0,
        }
    }
}

/// Parameter deltas from one Adam step; `None` for parameters the branch
/// does not own.
#[derive(Clone, Debug, PartialEq)]
pub struct Update<T> {
    pub names: Vec<String>,
    pub deltas: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Update<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        let i = self.names.iter().position(|n| n == name)?;
        self.deltas[i].as_ref()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub names: Vec<String>,
    pub event: BranchState<T>,
    pub post: BranchState<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamConfig) -> Self {
        Self {
            config,
            names: params.names().to_vec(),
            event: BranchState::zeros_like(params),
            post: BranchState::zeros_like(params),
        }
    }

    pub fn branch(&self, b: Branch) -> &BranchState<T> {
        match b {
            Branch::Event => &self.event,
            Branch::Post => &self.post,
        }
    }

    fn branch_mut(&mut self, b: Branch) -> &mut BranchState<T> {
        match b {
            Branch::Event => &mut self.event,
            Branch::Post => &mut self.post,
        }
    }

    /// One bias-corrected Adam step on `branch`:
    /// `Δθ = -η · m̂ / (√n̂ + ε)`, with the branch counter advanced first.
    pub fn adam_update(&mut self, branch: Branch, grads: &Gradients<T>) -> Result<Update<T>> {
        if grads.names() != self.names.as_slice() {
            return Err(Error::Config("gradient map does not match optimizer state".into()));
        }
        let owned: Vec<bool> = self.names.iter().map(|n| branch.owns(n)).collect();
        for (i, (name, g)) in grads.iter().enumerate() {
            if owned[i] && !g.is_finite() {
                return Err(Error::NonFiniteGradient(name.to_string()));
            }
        }
        let c = self.config;
        let (lr, mu, nu, eps) = (T::of(c.lr), T::of(c.mu), T::of(c.nu), T::of(c.eps));
        let state = self.branch_mut(branch);
        state.t += 1;
        let t = state.t as i32;
        let bias1 = T::one() - mu.powi(t);
        let bias2 = T::one() - nu.powi(t);

        let mut deltas = Vec::with_capacity(owned.len());
        for (i, &own) in owned.iter().enumerate() {
            if !own {
                deltas.push(None);
                continue;
            }
            let g = grads.entry(i).to_dense();
            let m = state.m[i].data_mut();
            let n = state.n[i].data_mut();
            let mut delta = Vec::with_capacity(g.len());
            for ((mi, ni), &gi) in m.iter_mut().zip(n.iter_mut()).zip(g.data()) {
                *mi = mu * *mi + (T::one() - mu) * gi;
                *ni = nu * *ni + (T::one() - nu) * gi * gi;
                let m_hat = *mi / bias1;
                let n_hat = *ni / bias2;
                delta.push(-lr * m_hat / (n_hat.sqrt() + eps));
            }
            deltas.push(Some(Tensor::new(g.shape().to_vec(), delta)?));
        }
        Ok(Update {
            names: self.names.clone(),
            deltas,
        })
    }
}

/// Rescales `grads` in place so their global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut Gradients<T>, max_norm: f64) -> f64 {
    let norm = grads.global_norm().to_f64_lossy();
    if norm > max_norm && norm.is_finite() {
        grads.scale(T::of(max_norm / norm));
    }
    norm
}

fn apply<T: Scalar>(params: &mut ParamStore<T>, update: &Update<T>, scale: Option<T>) {
    for (i, d) in update.deltas.iter().enumerate() {
        let Some(d) = d else { continue };
        let p = params.by_index_mut(i).data_mut();
        match scale {
            None => p.iter_mut().zip(d.data()).for_each(|(p, &d)| *p += d),
            Some(s) => p.iter_mut().zip(d.data()).for_each(|(p, &d)| *p += s * d),
        }
    }
}

/// β actually applied to the post branch for `mode` at `epoch`; zero when
/// the mode has no post branch.
pub fn effective_beta(mode: Mode, schedule: &AttenuationSchedule, epoch: usize) -> f64 {
    match mode {
        Mode::MH => 1.0,
        Mode::MHA => schedule.beta(epoch),
        Mode::H | Mode::Flat | Mode::PostOnly => 0.0,
    }
}

/// Applies one multiloss step and returns the β used.
///
/// * `H` (and the single-loss baselines): `θ += Δθᵉ`.
/// * `MH`: `θ += Δθᵉ + Δθᵖ`.
/// * `MHA`: `θ += Δθᵉ + β(epoch)·Δθᵖ`.
///
/// A branch whose weight is zero is not stepped, so its moments and counter
/// stay put. Gradients are clipped per branch before Adam.
pub fn apply_multiloss_step<T: Scalar>(
    params: &mut ParamStore<T>,
    grads_event: &Gradients<T>,
    grads_post: Option<&Gradients<T>>,
    state: &mut AdamState<T>,
    epoch: usize,
    mode: Mode,
    schedule: &AttenuationSchedule,
) -> Result<f64> {
    let beta = effective_beta(mode, schedule, epoch);
    let clip_norm = state.config.clip_norm;
    let clip = |g: &Gradients<T>| {
        let mut g = g.clone();
        if let Some(max) = clip_norm {
            clip_global_norm(&mut g, max);
        }
        g
    };
    let ge = clip(grads_event);
    let post_update = if beta != 0.0 {
        let gp = grads_post.ok_or_else(|| {
            Error::Config(format!("mode {mode} needs post-branch gradients"))
        })?;
        let gp = clip(gp);
        Some(state.adam_update(Branch::Post, &gp)?)
    } else {
        None
    };
    let event_update = state.adam_update(Branch::Event, &ge)?;
    apply(params, &event_update, None);
    if let Some(u) = post_update {
        let scale = (beta != 1.0).then(|| T::of(beta));
        apply(params, &u, scale);
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Grad;

    fn scalar_store(names: &[&str]) -> ParamStore<f64> {
        let mut p = ParamStore::new();
        for n in names {
            p.insert(*n, Tensor::vector(vec![0.0]));
        }
        p
    }

    fn grads(p: &ParamStore<f64>, values: &[f64]) -> Gradients<f64> {
        let mut g = Gradients::zeros_like(p);
        for (i, &v) in values.iter().enumerate() {
            g.set(i, Grad::Dense(Tensor::vector(vec![v])));
        }
        g
    }

    #[test]
    fn beta_schedule() {
        let s = AttenuationSchedule::default();
        assert_eq!(s.beta(0), 1.0);
        assert_eq!(s.beta(15), 0.0);
        assert_eq!(s.beta(40), 0.0);
        assert!((s.beta(7) - (1.0 - 7.0 / 15.0)).abs() < 1e-15);
        assert!((s.beta(7) - 0.5333).abs() < 1e-4);
        for e in 0..30 {
            assert!(s.beta(e) >= s.beta(e + 1));
            assert_eq!(s.beta(e) == 0.0, e >= 15);
        }
    }

    #[test]
    fn first_step_hand_values() {
        let p = scalar_store(&["embedding.E"]);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let u = st.adam_update(Branch::Event, &grads(&p, &[2.0])).unwrap();
        let m = st.event.m[0].data()[0];
        let n = st.event.n[0].data()[0];
        assert!((m - 0.2).abs() < 1e-15);
        assert!((n - 0.004).abs() < 1e-15);
        assert!((m / (1.0 - 0.9) - 2.0).abs() < 1e-12);
        assert!((n / (1.0 - 0.999) - 4.0).abs() < 1e-12);
        let d = u.get("embedding.E").unwrap().data()[0];
        assert!((d - (-1e-4 * 2.0 / (2.0 + 1e-8))).abs() < 1e-12);
        assert_eq!(st.event.t, 1);
        assert_eq!(st.post.t, 0);
    }

    #[test]
    fn zero_gradient_zero_step() {
        let p = scalar_store(&["embedding.E"]);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let u = st.adam_update(Branch::Event, &grads(&p, &[0.0])).unwrap();
        assert_eq!(u.get("embedding.E").unwrap().data()[0], 0.0);
    }

    #[test]
    fn branches_do_not_share_moments() {
        let p = scalar_store(&["embedding.E"]);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = grads(&p, &[0.7]);
        let ue = st.adam_update(Branch::Event, &g).unwrap();
        let snapshot = st.event.clone();
        let up = st.adam_update(Branch::Post, &g).unwrap();
        assert_eq!(ue.deltas, up.deltas);
        assert_eq!(st.event, snapshot);
        st.adam_update(Branch::Post, &g).unwrap();
        assert_eq!(st.event, snapshot);
        assert_eq!(st.post.t, 2);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let p = scalar_store(&["post.l0.fwd.b"]);
        let mut st = AdamState::new(&p, AdamConfig::default());
        let err = st.adam_update(Branch::Event, &grads(&p, &[f64::NAN])).unwrap_err();
        assert!(err.to_string().contains("post.l0.fwd.b"));
    }

    #[test]
    fn summed_update_matches_hand_computation() {
        // shared parameter gets both branches; each classifier gets one.
        let p0 = scalar_store(&["embedding.E", "clf_event.W_e", "clf_post.W_p"]);
        let cfg = AdamConfig { clip_norm: None, ..Default::default() };
        let ge = grads(&p0, &[2.0, -1.0, 0.0]);
        let gp = grads(&p0, &[0.5, 0.0, 3.0]);
        let sched = AttenuationSchedule::Linear { zero_epoch: 4 };
        let mut p = p0.clone();
        let mut st = AdamState::new(&p, cfg);
        let beta = apply_multiloss_step(&mut p, &ge, Some(&gp), &mut st, 1, Mode::MHA, &sched).unwrap();
        assert_eq!(beta, 0.75);
        // At t = 1 every nonzero entry steps by -η·sign(g)·|g|/(|g|+ε).
        let step = |g: f64| -1e-4 * g / (g.abs() + 1e-8);
        let shared = step(2.0) + 0.75 * step(0.5);
        assert!((p.get("embedding.E").unwrap().data()[0] - shared).abs() < 1e-15);
        assert!((p.get("clf_event.W_e").unwrap().data()[0] - step(-1.0)).abs() < 1e-15);
        assert!((p.get("clf_post.W_p").unwrap().data()[0] - 0.75 * step(3.0)).abs() < 1e-15);
    }

    #[test]
    fn mha_after_zero_epoch_matches_h() {
        let p0 = scalar_store(&["embedding.E", "clf_event.W_e", "clf_post.W_p"]);
        let ge = grads(&p0, &[2.0, -1.0, 0.0]);
        let gp = grads(&p0, &[0.5, 0.0, 3.0]);
        let sched = AttenuationSchedule::default();
        let (mut pa, mut pb) = (p0.clone(), p0.clone());
        let mut sa = AdamState::new(&pa, AdamConfig::default());
        let mut sb = sa.clone();
        for epoch in 15..18 {
            apply_multiloss_step(&mut pa, &ge, Some(&gp), &mut sa, epoch, Mode::MHA, &sched).unwrap();
            apply_multiloss_step(&mut pb, &ge, None, &mut sb, epoch, Mode::H, &sched).unwrap();
        }
        assert_eq!(pa, pb);
        assert_eq!(pa.get("clf_post.W_p").unwrap().data()[0], 0.0);
    }

    #[test]
    fn mh_equals_mha_at_epoch_zero() {
        let p0 = scalar_store(&["embedding.E", "clf_event.W_e", "clf_post.W_p"]);
        let ge = grads(&p0, &[2.0, -1.0, 0.0]);
        let gp = grads(&p0, &[0.5, 0.0, 3.0]);
        let sched = AttenuationSchedule::default();
        let (mut pa, mut pb) = (p0.clone(), p0.clone());
        let mut sa = AdamState::new(&pa, AdamConfig::default());
        let mut sb = sa.clone();
        apply_multiloss_step(&mut pa, &ge, Some(&gp), &mut sa, 0, Mode::MH, &sched).unwrap();
        apply_multiloss_step(&mut pb, &ge, Some(&gp), &mut sb, 0, Mode::MHA, &sched).unwrap();
        assert_eq!(pa, pb);
        assert_eq!(sa, sb);
    }

    #[test]
    fn multiloss_needs_post_grads() {
        let p0 = scalar_store(&["embedding.E"]);
        let mut p = p0.clone();
        let mut st = AdamState::new(&p, AdamConfig::default());
        let g = grads(&p0, &[1.0]);
        let sched = AttenuationSchedule::default();
        assert!(apply_multiloss_step(&mut p, &g, None, &mut st, 0, Mode::MH, &sched).is_err());
    }

    #[test]
    fn clipping_caps_global_norm() {
        let p = scalar_store(&["a", "b"]);
        let mut g = grads(&p, &[30.0, 40.0]);
        assert_eq!(clip_global_norm(&mut g, 5.0), 50.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
        let mut small = grads(&p, &[0.3, 0.4]);
        clip_global_norm(&mut small, 5.0);
        assert_eq!(small.get("a").unwrap().data()[0], 0.3);
    }
}
