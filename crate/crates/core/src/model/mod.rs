//! Model description, validation and the single-step primitives every solver
//! builds on: the joint transition kernel, the reward, and the marginals of
//! a correlated mean field.

mod dist;
mod index;
mod spec;

pub use dist::{pure_prescriptions, MeanField, Prescription, NEG_CLAMP, SUM_TOL};
pub use index::{decode, encode, permutations, JointIndexer};
pub use spec::{Horizon, KernelSpec, ModelSpec, MomentSelector, MomentTerm, RewardSpec, WeightSpec};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for the column-stochasticity and symmetry checks on the kernel.
pub const KERNEL_TOL: f64 = 1e-12;

/// Law of the other `N - 1` agents seen by a focal agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OthersLaw {
    /// The `(N-1)`-slot marginal of `z`, independent of the focal type.
    #[default]
    Marginal,
    /// `z` conditioned on the focal agent's type in slot `N`. Falls back to
    /// the marginal when the focal type has zero mass.
    Conditional,
}

impl std::str::FromStr for OthersLaw {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "marginal" => Ok(OthersLaw::Marginal),
            "conditional" => Ok(OthersLaw::Conditional),
            _ => Err(format!("others-law must be `marginal` or `conditional`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
enum Selector {
    Marginal(usize),
    Linear(Vec<f64>),
}

#[derive(Debug)]
struct Inner {
    spec: ModelSpec,
    n_corr: usize,
    nx: usize,
    na: usize,
    joint_x: JointIndexer,
    joint_a: JointIndexer,
    others_x: JointIndexer,
    others_a: JointIndexer,
    perms: Vec<Vec<usize>>,
    /// `[k][joint_x][joint_a][next]`, rows contiguous.
    tensors: Vec<Vec<f64>>,
    weights: Vec<WeightSpec>,
    reward_base: Vec<f64>,
    moments: Vec<(Vec<f64>, Selector)>,
    initial: MeanField,
    discount: f64,
    horizon: Horizon,
}

/// Immutable, validated model handle. Cheap to clone and safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    inner: Arc<Inner>,
    others_law: OthersLaw,
}

/// Validates a raw model. The kernel symmetry check is exhaustive over all
/// `N!` slot permutations.
pub fn validate_model(spec: ModelSpec) -> Result<ValidatedModel> {
    let n = spec.n_corr;
    let nx = spec.n_states;
    let na = spec.n_actions;
    if n == 0 || nx == 0 || na == 0 {
        return Err(Error::BadShape("n_corr, n_states and n_actions must be at least 1".into()));
    }
    let d = &spec.discount;
    if !d.is_finite() || *d < 0.0 || *d > 1.0 {
        return Err(Error::BadDiscount { discount: *d, reason: "must lie in [0, 1]" });
    }
    if spec.horizon == Horizon::Infinite && *d >= 1.0 {
        return Err(Error::BadDiscount {
            discount: *d,
            reason: "an infinite horizon needs a discount below 1",
        });
    }

    let joint_x = JointIndexer::new(nx, n);
    let joint_a = JointIndexer::new(na, n);
    let (sx, sa) = (joint_x.size(), joint_a.size());

    let kernel = &spec.kernel;
    if kernel.base_tensors.is_empty() {
        return Err(Error::BadShape("kernel has no base tensors".into()));
    }
    if kernel.weights.len() != kernel.base_tensors.len() {
        return Err(Error::BadShape(format!(
            "kernel has {} tensors but {} weights",
            kernel.base_tensors.len(),
            kernel.weights.len()
        )));
    }
    let mut tensors = Vec::with_capacity(kernel.base_tensors.len());
    for (k, tensor) in kernel.base_tensors.iter().enumerate() {
        if tensor.len() != sx || tensor.iter().any(|row| row.len() != sx * sa) {
            return Err(Error::BadShape(format!(
                "kernel tensor {k} must have shape [{sx}][{}]",
                sx * sa
            )));
        }
        let mut flat = vec![0.0; sx * sa * sx];
        for (next, row) in tensor.iter().enumerate() {
            for (col, &v) in row.iter().enumerate() {
                flat[col * sx + next] = v;
            }
        }
        for jx in 0..sx {
            for ja in 0..sa {
                let col = &flat[(jx * sa + ja) * sx..(jx * sa + ja + 1) * sx];
                if let Some(v) = col.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::NonStochasticKernel {
                        tensor: k,
                        joint_x: jx,
                        joint_a: ja,
                        reason: format!("entry {v} is negative or not finite"),
                    });
                }
                let s: f64 = col.iter().sum();
                if (s - 1.0).abs() > KERNEL_TOL {
                    return Err(Error::NonStochasticKernel {
                        tensor: k,
                        joint_x: jx,
                        joint_a: ja,
                        reason: format!("column sums to {s}"),
                    });
                }
            }
        }
        tensors.push(flat);
    }

    // Affine weights: nonnegativity and unit sum on the simplex reduce to
    // checks at its vertices.
    for (k, w) in kernel.weights.iter().enumerate() {
        if w.coeffs.len() != sx {
            return Err(Error::BadShape(format!("weight {k} needs {sx} coefficients")));
        }
        if !w.constant.is_finite() || w.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::BadWeights(format!("weight {k} has non-finite entries")));
        }
    }
    for j in 0..sx {
        let mut total = 0.0;
        for (k, w) in kernel.weights.iter().enumerate() {
            let v = w.constant + w.coeffs[j];
            if v < -KERNEL_TOL {
                return Err(Error::BadWeights(format!(
                    "weight {k} is negative ({v}) at simplex vertex {j}"
                )));
            }
            total += v;
        }
        if (total - 1.0).abs() > KERNEL_TOL {
            return Err(Error::BadWeights(format!(
                "weights sum to {total} at simplex vertex {j}"
            )));
        }
    }

    let perms = permutations(n);
    for (k, flat) in tensors.iter().enumerate() {
        for perm in perms.iter().skip(1) {
            for jx in 0..sx {
                let pjx = joint_x.permute(jx, perm);
                for ja in 0..sa {
                    let pja = joint_a.permute(ja, perm);
                    for next in 0..sx {
                        let pnext = joint_x.permute(next, perm);
                        let lhs = flat[(jx * sa + ja) * sx + next];
                        let rhs = flat[(pjx * sa + pja) * sx + pnext];
                        if (lhs - rhs).abs() > KERNEL_TOL {
                            return Err(Error::AsymmetricKernel {
                                tensor: k,
                                perm: perm.clone(),
                                next,
                                joint_x: jx,
                                joint_a: ja,
                                lhs,
                                rhs,
                            });
                        }
                    }
                }
            }
        }
    }

    let reward = &spec.reward;
    let check_table = |t: &Vec<Vec<f64>>, what: &str| -> Result<Vec<f64>> {
        if t.len() != nx || t.iter().any(|r| r.len() != na) {
            return Err(Error::BadShape(format!("{what} must have shape [{nx}][{na}]")));
        }
        let flat: Vec<f64> = t.iter().flatten().copied().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadShape(format!("{what} has non-finite entries")));
        }
        Ok(flat)
    };
    let reward_base = check_table(&reward.base, "reward.base")?;
    let mut moments = Vec::with_capacity(reward.moment_terms.len());
    for (i, term) in reward.moment_terms.iter().enumerate() {
        let coeffs = check_table(&term.coeffs, &format!("reward.moment_terms[{i}].coeffs"))?;
        let sel = match &term.selector {
            MomentSelector::Marginal { state } => {
                if *state >= nx {
                    return Err(Error::IndexOutOfRange { what: "selector state", index: *state, limit: nx });
                }
                Selector::Marginal(*state)
            }
            MomentSelector::Linear { coeffs } => {
                if coeffs.len() != sx || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::BadShape(format!(
                        "linear selector {i} needs {sx} finite coefficients"
                    )));
                }
                Selector::Linear(coeffs.clone())
            }
        };
        moments.push((coeffs, sel));
    }

    if spec.initial_meanfield.len() != sx {
        return Err(Error::BadSimplex(format!(
            "initial mean field has length {}, expected {sx}",
            spec.initial_meanfield.len()
        )));
    }
    let initial = MeanField::new(spec.initial_meanfield.clone())?;

    let inner = Inner {
        n_corr: n,
        nx,
        na,
        others_x: JointIndexer::new(nx, n - 1),
        others_a: JointIndexer::new(na, n - 1),
        joint_x,
        joint_a,
        perms,
        tensors,
        weights: kernel.weights.clone(),
        reward_base,
        moments,
        initial,
        discount: spec.discount,
        horizon: spec.horizon,
        spec,
    };
    Ok(ValidatedModel { inner: Arc::new(inner), others_law: OthersLaw::Marginal })
}

impl ValidatedModel {
    pub fn from_json(text: &str) -> Result<Self> {
        validate_model(ModelSpec::from_json(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        validate_model(ModelSpec::from_path(path)?)
    }

    pub fn with_others_law(mut self, law: OthersLaw) -> Self {
        self.others_law = law;
        self
    }

    pub fn others_law(&self) -> OthersLaw {
        self.others_law
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.inner.spec
    }

    pub fn n_corr(&self) -> usize {
        self.inner.n_corr
    }

    pub fn n_states(&self) -> usize {
        self.inner.nx
    }

    pub fn n_actions(&self) -> usize {
        self.inner.na
    }

    pub fn discount(&self) -> f64 {
        self.inner.discount
    }

    pub fn horizon(&self) -> Horizon {
        self.inner.horizon
    }

    pub fn initial_meanfield(&self) -> &MeanField {
        &self.inner.initial
    }

    pub fn joint_x(&self) -> &JointIndexer {
        &self.inner.joint_x
    }

    pub fn joint_a(&self) -> &JointIndexer {
        &self.inner.joint_a
    }

    /// Indexer for the `N - 1` non-focal slots (a single empty tuple when
    /// `N = 1`).
    pub fn others_x(&self) -> &JointIndexer {
        &self.inner.others_x
    }

    pub fn others_a(&self) -> &JointIndexer {
        &self.inner.others_a
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.inner.perms
    }

    /// Dimension of the mean-field vector, `Nx^N`.
    pub fn meanfield_dim(&self) -> usize {
        self.inner.joint_x.size()
    }

    /// Copy with a different discount. Validation rules for the discount
    /// are re-applied.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        let mut spec = self.inner.spec.clone();
        spec.discount = discount;
        Ok(validate_model(spec)?.with_others_law(self.others_law))
    }

    pub fn with_horizon(&self, horizon: Horizon) -> Result<Self> {
        let mut spec = self.inner.spec.clone();
        spec.horizon = horizon;
        Ok(validate_model(spec)?.with_others_law(self.others_law))
    }

    pub fn check_meanfield(&self, z: &MeanField) -> Result<()> {
        if z.len() != self.meanfield_dim() {
            return Err(Error::BadSimplex(format!(
                "mean field has length {}, expected {}",
                z.len(),
                self.meanfield_dim()
            )));
        }
        Ok(())
    }

    /// Kernel mixture weights `w_k(z)`.
    pub fn kernel_weights(&self, z: &MeanField) -> Vec<f64> {
        self.inner
            .weights
            .iter()
            .map(|w| w.constant + w.coeffs.iter().zip(z.probs()).map(|(c, p)| c * p).sum::<f64>())
            .collect()
    }

    /// Kernel frozen at a mean field; evaluating rows is then allocation free.
    pub fn kernel_at(&self, z: &MeanField) -> KernelAt<'_> {
        KernelAt { model: self, weights: self.kernel_weights(z) }
    }

    /// Distribution of the next joint type given the current joint type and
    /// joint action.
    pub fn kernel_eval(&self, z: &MeanField, joint_x: usize, joint_a: usize) -> Result<Vec<f64>> {
        let sx = self.meanfield_dim();
        let sa = self.joint_a().size();
        if joint_x >= sx {
            return Err(Error::IndexOutOfRange { what: "joint_x", index: joint_x, limit: sx });
        }
        if joint_a >= sa {
            return Err(Error::IndexOutOfRange { what: "joint_a", index: joint_a, limit: sa });
        }
        let mut out = vec![0.0; sx];
        self.kernel_at(z).row_into(joint_x, joint_a, &mut out);
        Ok(out)
    }

    /// Next-type law of a focal agent placed in slot `N`, with the others in
    /// slots `1..N`.
    pub fn focal_next_state_law(
        &self,
        z: &MeanField,
        x_others: &[usize],
        x_focal: usize,
        a_others: &[usize],
        a_focal: usize,
    ) -> Result<Vec<f64>> {
        let n = self.n_corr();
        if x_others.len() != n - 1 || a_others.len() != n - 1 {
            return Err(Error::BadShape(format!("expected {} other agents", n - 1)));
        }
        let (nx, na) = (self.n_states(), self.n_actions());
        for &x in x_others.iter().chain(std::iter::once(&x_focal)) {
            if x >= nx {
                return Err(Error::IndexOutOfRange { what: "state", index: x, limit: nx });
            }
        }
        for &a in a_others.iter().chain(std::iter::once(&a_focal)) {
            if a >= na {
                return Err(Error::IndexOutOfRange { what: "action", index: a, limit: na });
            }
        }
        let jo_x = self.others_x().encode(x_others);
        let jo_a = self.others_a().encode(a_others);
        let mut out = vec![0.0; nx];
        let mut scratch = vec![0.0; self.meanfield_dim()];
        self.kernel_at(z).focal_law_into(jo_x, x_focal, jo_a, a_focal, &mut scratch, &mut out);
        Ok(out)
    }

    /// Slot-1 marginal of `z`.
    pub fn marginal(&self, z: &MeanField) -> Vec<f64> {
        let nx = self.n_states();
        let block = self.meanfield_dim() / nx;
        (0..nx).map(|x| z.probs()[x * block..(x + 1) * block].iter().sum()).collect()
    }

    /// Marginal of `z` on slots `1..N` (the others of a focal agent in slot
    /// `N`).
    pub fn others_marginal(&self, z: &MeanField) -> Vec<f64> {
        let nx = self.n_states();
        z.probs().chunks(nx).map(|c| c.iter().sum()).collect()
    }

    /// Law of the other `N - 1` agents for a focal agent of type `x_focal`,
    /// according to the configured [`OthersLaw`].
    pub fn others_law_for(&self, z: &MeanField, x_focal: usize) -> Vec<f64> {
        let marg = self.others_marginal(z);
        match self.others_law {
            OthersLaw::Marginal => marg,
            OthersLaw::Conditional => {
                let nx = self.n_states();
                let joint: Vec<f64> = z.probs().chunks(nx).map(|c| c[x_focal]).collect();
                let mass: f64 = joint.iter().sum();
                if mass > 0.0 {
                    joint.into_iter().map(|p| p / mass).collect()
                } else {
                    marg
                }
            }
        }
    }

    pub fn reward_eval(&self, x: usize, a: usize, z: &MeanField) -> Result<f64> {
        let (nx, na) = (self.n_states(), self.n_actions());
        if x >= nx {
            return Err(Error::IndexOutOfRange { what: "state", index: x, limit: nx });
        }
        if a >= na {
            return Err(Error::IndexOutOfRange { what: "action", index: a, limit: na });
        }
        Ok(self.reward_table(z)[x * na + a])
    }

    /// `R(x, a, z)` for all `(x, a)`, row-major.
    pub fn reward_table(&self, z: &MeanField) -> Vec<f64> {
        let mut r = self.inner.reward_base.clone();
        if self.inner.moments.is_empty() {
            return r;
        }
        let marg = self.marginal(z);
        for (coeffs, sel) in &self.inner.moments {
            let m = match sel {
                Selector::Marginal(s) => marg[*s],
                Selector::Linear(c) => c.iter().zip(z.probs()).map(|(c, p)| c * p).sum(),
            };
            for (ri, ci) in r.iter_mut().zip(coeffs) {
                *ri += ci * m;
            }
        }
        r
    }

    /// Upper bound on `|R|` over the whole simplex. `R` is affine in `z`, so
    /// the maximum is attained at a vertex.
    pub fn reward_bound(&self) -> f64 {
        let sx = self.meanfield_dim();
        (0..sx)
            .map(|j| {
                let z = MeanField::point_mass(sx, j);
                self.reward_table(&z).iter().fold(0.0_f64, |m, r| m.max(r.abs()))
            })
            .fold(0.0, f64::max)
    }

    /// Probability of joint action `joint_a` for agents of joint type
    /// `joint_x` acting independently under `gamma`.
    pub fn joint_action_prob(&self, gamma: &Prescription, joint_x: usize, joint_a: usize) -> f64 {
        let xs = self.joint_x().digits(joint_x);
        let acts = self.joint_a().digits(joint_a);
        xs.iter().zip(acts).map(|(&x, &a)| gamma.prob(x, a)).product()
    }

    pub fn check_prescription(&self, gamma: &Prescription) -> Result<()> {
        if gamma.n_states() != self.n_states() || gamma.n_actions() != self.n_actions() {
            return Err(Error::BadShape(format!(
                "prescription is {}x{}, model needs {}x{}",
                gamma.n_states(),
                gamma.n_actions(),
                self.n_states(),
                self.n_actions()
            )));
        }
        Ok(())
    }
}

/// The kernel evaluated at a fixed mean field.
pub struct KernelAt<'a> {
    model: &'a ValidatedModel,
    weights: Vec<f64>,
}

impl KernelAt<'_> {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Writes `Q(. | z, joint_x, joint_a)` into `out` (length `Nx^N`).
    pub fn row_into(&self, joint_x: usize, joint_a: usize, out: &mut [f64]) {
        let inner = &self.model.inner;
        let sx = inner.joint_x.size();
        let sa = inner.joint_a.size();
        let off = (joint_x * sa + joint_a) * sx;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (w, t) in self.weights.iter().zip(&inner.tensors) {
            if *w == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(&t[off..off + sx]) {
                *o += w * q;
            }
        }
    }

    /// Slot-`N` marginal of the next joint type for a focal agent in slot `N`.
    /// `scratch` must have length `Nx^N`, `out` length `Nx`.
    pub fn focal_law_into(
        &self,
        others_x: usize,
        x_focal: usize,
        others_a: usize,
        a_focal: usize,
        scratch: &mut [f64],
        out: &mut [f64],
    ) {
        let nx = self.model.n_states();
        let na = self.model.n_actions();
        let jx = others_x * nx + x_focal;
        let ja = others_a * na + a_focal;
        self.row_into(jx, ja, scratch);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (next, p) in scratch.iter().enumerate() {
            out[next % nx] += p;
        }
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Kernel where every agent keeps its type.
    pub fn identity_spec(n_corr: usize, nx: usize, na: usize, discount: f64) -> ModelSpec {
        let sx = nx.pow(n_corr as u32);
        let sa = na.pow(n_corr as u32);
        let mut tensor = vec![vec![0.0; sx * sa]; sx];
        for jx in 0..sx {
            for ja in 0..sa {
                tensor[jx][jx * sa + ja] = 1.0;
            }
        }
        ModelSpec {
            n_corr,
            n_states: nx,
            n_actions: na,
            discount,
            horizon: Horizon::Finite(3),
            kernel: KernelSpec {
                base_tensors: vec![tensor],
                weights: vec![WeightSpec { constant: 1.0, coeffs: vec![0.0; sx] }],
            },
            reward: RewardSpec {
                base: (0..nx).map(|x| (0..na).map(|a| (x as f64) - 0.5 * a as f64).collect()).collect(),
                moment_terms: vec![],
            },
            initial_meanfield: vec![1.0 / sx as f64; sx],
        }
    }

    pub fn uniform_spec(n_corr: usize, nx: usize, na: usize, discount: f64) -> ModelSpec {
        let mut spec = identity_spec(n_corr, nx, na, discount);
        let sx = nx.pow(n_corr as u32);
        let sa = na.pow(n_corr as u32);
        spec.kernel.base_tensors = vec![vec![vec![1.0 / sx as f64; sx * sa]; sx]];
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    #[test]
    fn identity_kernel_is_valid_for_any_order() {
        for n in 1..=3 {
            let m = validate_model(identity_spec(n, 2, 2, 0.9)).unwrap();
            let z = MeanField::uniform(m.meanfield_dim());
            for jx in 0..m.meanfield_dim() {
                for ja in 0..m.joint_a().size() {
                    let row = m.kernel_eval(&z, jx, ja).unwrap();
                    assert_eq!(row, MeanField::point_mass(m.meanfield_dim(), jx).probs());
                }
            }
        }
    }

    #[test]
    fn asymmetric_entry_is_reported() {
        let mut spec = uniform_spec(2, 2, 2, 0.9);
        // Q(.|(0,1),(0,0)) != Q(.|(1,0),(0,0)) after swapping slots.
        let col = 1 * 4;
        spec.kernel.base_tensors[0][0][col] = 0.4;
        spec.kernel.base_tensors[0][3][col] = 0.1;
        match validate_model(spec) {
            Err(Error::AsymmetricKernel { perm, .. }) => assert_eq!(perm, vec![1, 0]),
            other => panic!("expected AsymmetricKernel, got {other:?}"),
        }
    }

    #[test]
    fn non_stochastic_and_bad_discount_and_bad_simplex() {
        let mut spec = uniform_spec(1, 2, 2, 0.9);
        spec.kernel.base_tensors[0][0][0] = 0.7;
        assert!(matches!(validate_model(spec), Err(Error::NonStochasticKernel { .. })));

        let spec = uniform_spec(1, 2, 2, 1.5);
        assert!(matches!(validate_model(spec), Err(Error::BadDiscount { .. })));
        let mut spec = uniform_spec(1, 2, 2, 1.0);
        spec.horizon = Horizon::Infinite;
        assert!(matches!(validate_model(spec), Err(Error::BadDiscount { .. })));

        let mut spec = uniform_spec(1, 2, 2, 0.9);
        spec.initial_meanfield = vec![0.7, 0.7];
        assert!(matches!(validate_model(spec), Err(Error::BadSimplex(_))));
    }

    #[test]
    fn weights_must_partition_unity() {
        let mut spec = uniform_spec(1, 2, 2, 0.9);
        spec.kernel.base_tensors.push(spec.kernel.base_tensors[0].clone());
        spec.kernel.weights = vec![
            WeightSpec { constant: 0.5, coeffs: vec![0.0, 0.0] },
            WeightSpec { constant: 0.0, coeffs: vec![0.5, 0.6] },
        ];
        assert!(matches!(validate_model(spec.clone()), Err(Error::BadWeights(_))));
        spec.kernel.weights[1].coeffs = vec![0.5, 0.5];
        validate_model(spec).unwrap();
    }

    #[test]
    fn uniform_kernel_gives_uniform_rows() {
        let m = validate_model(uniform_spec(2, 2, 2, 0.9)).unwrap();
        let z = MeanField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let row = m.kernel_eval(&z, 2, 1).unwrap();
        assert!(row.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(matches!(m.kernel_eval(&z, 4, 0), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn marginal_examples() {
        let m = validate_model(uniform_spec(2, 2, 2, 0.9)).unwrap();
        let z = MeanField::new(vec![0.5, 0.3, 0.1, 0.1]).unwrap();
        let marg = m.marginal(&z);
        assert!((marg[0] - 0.8).abs() < 1e-15 && (marg[1] - 0.2).abs() < 1e-15);
        let u = m.marginal(&MeanField::uniform(4));
        assert!(u.iter().all(|&p| (p - 0.5).abs() < 1e-15));

        let m1 = validate_model(uniform_spec(1, 3, 2, 0.9)).unwrap();
        let z1 = MeanField::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(m1.marginal(&z1), z1.probs());
        assert_eq!(m1.others_marginal(&z1), vec![1.0]);
    }

    #[test]
    fn focal_law_with_n1_is_the_kernel_row() {
        let m = validate_model(uniform_spec(1, 3, 2, 0.9)).unwrap();
        let z = MeanField::uniform(3);
        let law = m.focal_next_state_law(&z, &[], 1, &[], 0).unwrap();
        assert_eq!(law, m.kernel_eval(&z, 1, 0).unwrap());
    }

    #[test]
    fn reward_without_moments_ignores_z() {
        let m = validate_model(identity_spec(2, 2, 2, 0.9)).unwrap();
        let z = MeanField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(m.reward_eval(1, 1, &z).unwrap(), 0.5);
        assert!(m.reward_eval(2, 0, &z).is_err());
    }

    #[test]
    fn zero_coefficient_moment_is_inert() {
        let mut spec = identity_spec(2, 2, 2, 0.9);
        spec.reward.moment_terms.push(MomentTerm {
            coeffs: vec![vec![0.0; 2]; 2],
            selector: MomentSelector::Marginal { state: 1 },
        });
        let m = validate_model(spec).unwrap();
        let z = MeanField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(m.reward_eval(0, 1, &z).unwrap(), -0.5);
    }

    #[test]
    fn conditional_law_conditions_on_focal_slot() {
        let m = validate_model(uniform_spec(2, 2, 2, 0.9))
            .unwrap()
            .with_others_law(OthersLaw::Conditional);
        // z over (0,0),(0,1),(1,0),(1,1)
        let z = MeanField::new(vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let law = m.others_law_for(&z, 0);
        assert!((law[0] - 0.8).abs() < 1e-15 && (law[1] - 0.2).abs() < 1e-15);
        let m = m.with_others_law(OthersLaw::Marginal);
        assert_eq!(m.others_law_for(&z, 0), vec![0.5, 0.5]);
    }
}
