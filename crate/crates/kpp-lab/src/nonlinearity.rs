//! Reaction terms: evaluation, differentiation, structural hypothesis
//! checks, cooperativity analysis, and the uniform-monotonicity falsifier.
//!
//! The closed-form kind is Lotka-Volterra competition,
//! `b_i(u) = u_i * sum_j c_ij u_j`. Anything else enters as a sampled
//! callable with finite-difference derivatives.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{CouplingField, SystemSpec};
use serde::Serialize;

/// A reaction term `b : R^n -> R^n` with `b(0) = 0`.
pub trait Nonlinearity: Send + Sync {
    fn species(&self) -> usize;

    /// `b(u)`.
    fn eval(&self, u: &[f64]) -> Vec<f64>;

    /// `Db(u)`; default is central finite differences of [`eval`].
    ///
    /// [`eval`]: Nonlinearity::eval
    fn jacobian(&self, u: &[f64]) -> Mat {
        fd_jacobian(&|v| self.eval(v), u, 1e-6)
    }
}

/// `b_i(u) = u_i * sum_j c_ij u_j`.
pub fn b_eval(u: &[f64], c: &Mat) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|j| c[(i, j)] * u[j]).sum();
            u[i] * s
        })
        .collect()
}

/// `Db(u)` entrywise: `(i,j) = delta_ij * sum_k c_ik u_k + u_i c_ij`.
pub fn b_jacobian(u: &[f64], c: &Mat) -> Mat {
    let n = u.len();
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let s: f64 = (0..n).map(|k| c[(i, k)] * u[k]).sum();
        for j in 0..n {
            let mut v = u[i] * c[(i, j)];
            if i == j {
                v += s;
            }
            m[(i, j)] = v;
        }
    }
    m
}

/// Lotka-Volterra competition term with matrix `C`.
#[derive(Debug, Clone)]
pub struct LotkaVolterra {
    c: Mat,
}

impl LotkaVolterra {
    pub fn new(c: Mat) -> Self {
        LotkaVolterra { c }
    }

    pub fn competition(&self) -> &Mat {
        &self.c
    }

    /// The reaction term of a spec (the only closed-form kind).
    pub fn from_spec(spec: &SystemSpec) -> Self {
        LotkaVolterra {
            c: spec.competition.clone(),
        }
    }
}

impl Nonlinearity for LotkaVolterra {
    fn species(&self) -> usize {
        self.c.nrows()
    }

    fn eval(&self, u: &[f64]) -> Vec<f64> {
        b_eval(u, &self.c)
    }

    fn jacobian(&self, u: &[f64]) -> Mat {
        b_jacobian(u, &self.c)
    }
}

/// Escape hatch for reaction terms given only as a callable; derivatives
/// are finite differences.
pub struct SampledNonlinearity {
    n: usize,
    f: Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
}

impl SampledNonlinearity {
    pub fn new(n: usize, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        SampledNonlinearity { n, f: Box::new(f) }
    }
}

impl Nonlinearity for SampledNonlinearity {
    fn species(&self) -> usize {
        self.n
    }

    fn eval(&self, u: &[f64]) -> Vec<f64> {
        (self.f)(u)
    }
}

/// Central-difference Jacobian of `f` at `u` with the given step.
pub fn fd_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, u: &[f64], step: f64) -> Mat {
    let n = u.len();
    let mut m = Mat::zeros(n, n);
    let mut up = u.to_vec();
    let mut um = u.to_vec();
    for j in 0..n {
        up[j] = u[j] + step;
        um[j] = u[j] - step;
        let fp = f(&up);
        let fm = f(&um);
        for i in 0..n {
            m[(i, j)] = (fp[i] - fm[i]) / (2.0 * step);
        }
        up[j] = u[j];
        um[j] = u[j];
    }
    m
}

/// Outcome of one structural hypothesis check.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisCheck {
    pub pass: bool,
    pub witness: Option<HypothesisWitness>,
}

impl HypothesisCheck {
    fn pass() -> Self {
        HypothesisCheck {
            pass: true,
            witness: None,
        }
    }

    fn fail(w: HypothesisWitness) -> Self {
        HypothesisCheck {
            pass: false,
            witness: Some(w),
        }
    }
}

/// Witness attached to a failed hypothesis; species indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum HypothesisWitness {
    /// Entry pair `(i,j)` violating a sign condition.
    Pair { i: usize, j: usize },
    /// Single species violating the condition.
    Species { i: usize },
    /// Concrete point where a derivative has the wrong sign.
    Point {
        u: Vec<f64>,
        i: usize,
        j: usize,
        value: f64,
    },
}

/// Verdicts for the three structural hypotheses on `b`:
/// (a) nondecreasing on the positive box, (b) `b_i(u)/u_i` strictly
/// increasing in every coordinate on the open cone, (c) `b_i(u)/u_i`
/// unbounded as `u_i` grows.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesesReport {
    pub nondecreasing: HypothesisCheck,
    pub ratio_increasing: HypothesisCheck,
    pub superlinear: HypothesisCheck,
}

impl HypothesesReport {
    pub fn all_pass(&self) -> bool {
        self.nondecreasing.pass && self.ratio_increasing.pass && self.superlinear.pass
    }
}

/// Checks the structural hypotheses for the Lotka-Volterra term with
/// matrix `C`, analytically plus on a confirmation lattice of `samples`
/// points per axis over `(0, box]`.
///
/// Analytic criteria: (a) holds iff `C >= 0` entrywise, since every
/// Jacobian entry is then a nonnegative combination on the positive cone;
/// (b) `b_i/u_i = sum_j c_ij u_j` is strictly increasing in `u_j` iff
/// `c_ij > 0`; (c) `c_ii > 0` makes `b_i/u_i` grow without bound in `u_i`.
pub fn check_hypotheses(c: &Mat, bounds: &[f64], samples: usize) -> Result<HypothesesReport> {
    let n = c.nrows();
    if bounds.len() != n {
        return Err(Error::ShapeMismatch(
            "hypothesis box must have one bound per species".into(),
        ));
    }
    if bounds.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::InvalidInput("box entries must be positive".into()));
    }

    let mut nondecreasing = HypothesisCheck::pass();
    'outer_a: for i in 0..n {
        for j in 0..n {
            if c[(i, j)] < 0.0 {
                // Db(u)[i][j] = u_i c_ij < 0 at any interior point.
                nondecreasing = HypothesisCheck::fail(HypothesisWitness::Point {
                    u: bounds.to_vec(),
                    i: i + 1,
                    j: j + 1,
                    value: b_jacobian(bounds, c)[(i, j)],
                });
                break 'outer_a;
            }
        }
    }

    let mut ratio_increasing = HypothesisCheck::pass();
    'outer_b: for i in 0..n {
        for j in 0..n {
            if c[(i, j)] <= 0.0 {
                ratio_increasing =
                    HypothesisCheck::fail(HypothesisWitness::Pair { i: i + 1, j: j + 1 });
                break 'outer_b;
            }
        }
    }

    let mut superlinear = HypothesisCheck::pass();
    for i in 0..n {
        if c[(i, i)] <= 0.0 {
            superlinear = HypothesisCheck::fail(HypothesisWitness::Species { i: i + 1 });
            break;
        }
    }

    // Lattice confirmation of (a): sampled Jacobians must agree with the
    // analytic verdict. Redundant for LV, cheap insurance against a broken
    // formula.
    if nondecreasing.pass {
        let b = LotkaVolterra::new(c.clone());
        if let Some((u, i, j, value)) = lattice_negative_entry(&b, bounds, samples) {
            nondecreasing = HypothesisCheck::fail(HypothesisWitness::Point {
                u,
                i: i + 1,
                j: j + 1,
                value,
            });
        }
    }

    Ok(HypothesesReport {
        nondecreasing,
        ratio_increasing,
        superlinear,
    })
}

/// Sampled hypothesis check for a black-box reaction term. (a) and (b)
/// are verified on the lattice; (c) compares the ratio at the box edge
/// with the ratio at half the edge, a growth proxy rather than a limit.
pub fn check_hypotheses_sampled(
    b: &dyn Nonlinearity,
    bounds: &[f64],
    samples: usize,
) -> Result<HypothesesReport> {
    let n = b.species();
    if bounds.len() != n {
        return Err(Error::ShapeMismatch(
            "hypothesis box must have one bound per species".into(),
        ));
    }
    if bounds.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("box entries must be positive".into()));
    }
    let samples = samples.max(2);

    let nondecreasing = match lattice_negative_entry(b, bounds, samples) {
        Some((u, i, j, value)) => HypothesisCheck::fail(HypothesisWitness::Point {
            u,
            i: i + 1,
            j: j + 1,
            value,
        }),
        None => HypothesisCheck::pass(),
    };

    // (b): along each axis j, the ratio b_i/u_i must strictly increase
    // between consecutive lattice points, for every i.
    let mut ratio_increasing = HypothesisCheck::pass();
    'outer: for j in 0..n {
        let base: Vec<f64> = bounds.iter().map(|&v| v / 2.0).collect();
        let mut prev: Option<Vec<f64>> = None;
        for m in 1..=samples {
            let mut u = base.clone();
            u[j] = bounds[j] * m as f64 / samples as f64;
            let bu = b.eval(&u);
            let ratios: Vec<f64> = (0..n).map(|i| bu[i] / u[i]).collect();
            if let Some(p) = &prev {
                for i in 0..n {
                    if ratios[i] <= p[i] {
                        ratio_increasing =
                            HypothesisCheck::fail(HypothesisWitness::Pair { i: i + 1, j: j + 1 });
                        break 'outer;
                    }
                }
            }
            prev = Some(ratios);
        }
    }

    let mut superlinear = HypothesisCheck::pass();
    for i in 0..n {
        let mut u_half = bounds.to_vec();
        u_half[i] = bounds[i] / 2.0;
        let r_half = b.eval(&u_half)[i] / u_half[i];
        let r_full = b.eval(bounds)[i] / bounds[i];
        if r_full <= r_half {
            superlinear = HypothesisCheck::fail(HypothesisWitness::Species { i: i + 1 });
            break;
        }
    }

    Ok(HypothesesReport {
        nondecreasing,
        ratio_increasing,
        superlinear,
    })
}

/// Scans a lattice over `(0, box]` for a negative Jacobian entry of `b`.
/// Returns `(point, i, j, value)` with 0-based indices.
fn lattice_negative_entry(
    b: &dyn Nonlinearity,
    bounds: &[f64],
    samples: usize,
) -> Option<(Vec<f64>, usize, usize, f64)> {
    let n = bounds.len();
    let samples = effective_samples(samples, n);
    let mut idx = vec![0usize; n];
    loop {
        let u: Vec<f64> = (0..n)
            .map(|a| bounds[a] * (idx[a] + 1) as f64 / samples as f64)
            .collect();
        let jac = b.jacobian(&u);
        for i in 0..n {
            for j in 0..n {
                // Slack absorbs finite-difference noise from sampled terms.
                if jac[(i, j)] < -1e-9 {
                    return Some((u, i, j, jac[(i, j)]));
                }
            }
        }
        let mut axis = 0;
        loop {
            if axis == n {
                return None;
            }
            idx[axis] += 1;
            if idx[axis] < samples {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

/// Caps the per-axis sample count so the full lattice stays below 1e5
/// points.
fn effective_samples(samples: usize, n: usize) -> usize {
    let mut s = samples.max(2);
    while (s as f64).powi(n as i32) > 1e5 && s > 2 {
        s -= 1;
    }
    s
}

/// Threshold for one ordered species pair: largest `u_i` keeping
/// `dF_i/du_j >= 0` everywhere. Indices 1-based; infinite when the
/// competition entry vanishes.
#[derive(Debug, Clone, Serialize)]
pub struct PairThreshold {
    pub i: usize,
    pub j: usize,
    #[serde(serialize_with = "ser_extended")]
    pub threshold: f64,
}

fn ser_extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum CooperativityVerdict {
    CooperativeOnBox,
    NotCooperativeAt {
        point: Vec<f64>,
        i: usize,
        j: usize,
        value: f64,
    },
}

/// Cooperativity analysis of `F(u) = A u - b(u)` on a box `[0, r]`.
#[derive(Debug, Clone, Serialize)]
pub struct CooperativityReport {
    pub thresholds: Vec<PairThreshold>,
    /// Largest box `[0, r]` on which all off-diagonal entries of `DF` are
    /// nonnegative: `r_i = min over j != i of t_ij`.
    pub cooperative_box: Vec<f64>,
    pub verdict: CooperativityVerdict,
}

/// Computes per-pair cooperativity thresholds and checks the queried box.
///
/// For the Lotka-Volterra kind, `dF_i/du_j = a_ij(x) - u_i c_ij` for
/// `i != j`; on `[0, bounds]` the minimum sits at `u_i = bounds_i` and the
/// worst node of `a_ij`, so the threshold is
/// `t_ij = min over nodes of a_ij(x) / c_ij`.
pub fn cooperativity_box(spec: &SystemSpec, bounds: &[f64]) -> Result<CooperativityReport> {
    let n = spec.n;
    if bounds.len() != n {
        return Err(Error::ShapeMismatch(
            "box must have one bound per species".into(),
        ));
    }
    if bounds.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "box entries must be nonnegative".into(),
        ));
    }

    let min_a = |i: usize, j: usize| -> f64 {
        match &spec.coupling {
            CouplingField::Constant(m) => m[(i, j)],
            CouplingField::PerNode(ms) => {
                ms.iter().map(|m| m[(i, j)]).fold(f64::INFINITY, f64::min)
            }
        }
    };

    let mut thresholds = Vec::new();
    let mut cooperative_box = vec![f64::INFINITY; n];
    let mut verdict = CooperativityVerdict::CooperativeOnBox;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let a = min_a(i, j);
            let c = spec.competition[(i, j)];
            let t = if c == 0.0 {
                if a >= 0.0 {
                    f64::INFINITY
                } else {
                    // Negative coupling with no competition: never
                    // cooperative in this pair.
                    f64::NEG_INFINITY
                }
            } else {
                a / c
            };
            thresholds.push(PairThreshold {
                i: i + 1,
                j: j + 1,
                threshold: t,
            });
            cooperative_box[i] = cooperative_box[i].min(t);
            if bounds[i] > t && matches!(verdict, CooperativityVerdict::CooperativeOnBox) {
                // Witness at the box corner, where the entry is smallest.
                verdict = CooperativityVerdict::NotCooperativeAt {
                    point: bounds.to_vec(),
                    i: i + 1,
                    j: j + 1,
                    value: a - bounds[i] * c,
                };
            }
        }
    }
    for r in cooperative_box.iter_mut() {
        *r = r.max(0.0);
    }
    Ok(CooperativityReport {
        thresholds,
        cooperative_box,
        verdict,
    })
}

/// A concrete failure of the claimed uniform monotonicity of
/// `M u - b(u)`: a base point and a one-coordinate bump for which some
/// other component of `b` moves the wrong way. Species indices 1-based.
///
/// The reported value is `b_i(v) - b_i(v + eps*e_k)` with `i != k`. Any
/// linear shift `M u` contributes `M * eps` only in component `k`, so the
/// value, and with it the refutation, is independent of `M`.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCounterexample {
    pub base_point: Vec<f64>,
    pub direction: usize,
    pub epsilon: f64,
    pub component: usize,
    pub value: f64,
}

/// Searches the box `[lower, upper]` for a violation of uniform
/// monotonicity, using the bump construction `u1 = v + eps*e_k`,
/// `u2 = v = lower` with `eps` half the smallest box gap; on a degenerate
/// miss, `eps` shrinks tenfold down to `1e-8`. Returns `None` when every
/// candidate difference is nonnegative (always the case for `n = 1`).
pub fn falsify_uniform_monotonicity(
    spec: &SystemSpec,
    lower: &[f64],
    upper: &[f64],
) -> Result<Option<MonotonicityCounterexample>> {
    let b = LotkaVolterra::from_spec(spec);
    falsify_uniform_monotonicity_for(&b, lower, upper)
}

/// Same search against any reaction term.
pub fn falsify_uniform_monotonicity_for(
    b: &dyn Nonlinearity,
    lower: &[f64],
    upper: &[f64],
) -> Result<Option<MonotonicityCounterexample>> {
    let n = b.species();
    if lower.len() != n || upper.len() != n {
        return Err(Error::ShapeMismatch(
            "box bounds must have one entry per species".into(),
        ));
    }
    if lower.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput(
            "lower bound must be strictly positive".into(),
        ));
    }
    if lower.iter().zip(upper).any(|(&lo, &hi)| !(hi > lo)) {
        return Err(Error::InvalidInput(
            "upper bound must be strictly above lower".into(),
        ));
    }
    if n == 1 {
        return Ok(None);
    }

    let v = lower.to_vec();
    let bv = b.eval(&v);
    let gap = lower
        .iter()
        .zip(upper)
        .map(|(&lo, &hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);
    let mut eps = gap / 2.0;
    while eps >= 1e-8 {
        for k in 0..n {
            let mut bumped = v.clone();
            bumped[k] += eps;
            let bb = b.eval(&bumped);
            for i in 0..n {
                if i == k {
                    continue;
                }
                let value = bv[i] - bb[i];
                if value < 0.0 {
                    return Ok(Some(MonotonicityCounterexample {
                        base_point: v,
                        direction: k + 1,
                        epsilon: eps,
                        component: i + 1,
                        value,
                    }));
                }
            }
        }
        eps /= 10.0;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_norm_diff;
    use crate::scenario;
    use proptest::prelude::*;

    fn competition() -> Mat {
        Mat::from_rows(&[vec![0.1, 0.9], vec![0.9, 0.1]]).unwrap()
    }

    #[test]
    fn b_eval_at_ones() {
        let b = b_eval(&[1.0, 1.0], &competition());
        assert_eq!(b, vec![1.0, 1.0]);
    }

    #[test]
    fn b_vanishes_at_origin() {
        let b = b_eval(&[0.0, 0.0], &competition());
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn b_eval_off_ones() {
        let b = b_eval(&[1.1, 1.0], &competition());
        assert!((b[0] - 1.111).abs() < 1e-15);
        assert!((b[1] - 1.09).abs() < 1e-15);
    }

    #[test]
    fn jacobian_vanishes_at_origin() {
        let j = b_jacobian(&[0.0, 0.0], &competition());
        assert_eq!(j.data(), &[0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobian_at_ones() {
        let j = b_jacobian(&[1.0, 1.0], &competition());
        let want = Mat::from_rows(&[vec![1.1, 0.9], vec![0.9, 1.1]]).unwrap();
        assert!(max_norm_diff(j.data(), want.data()) < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let c = competition();
        let u = [0.3, 0.7];
        let analytic = b_jacobian(&u, &c);
        let step = 1e-5;
        let fd = fd_jacobian(&|v| b_eval(v, &c), &u, step);
        assert!(max_norm_diff(analytic.data(), fd.data()) < 10.0 * step * step);
    }

    #[test]
    fn hypotheses_pass_for_positive_competition() {
        let report = check_hypotheses(&competition(), &[2.0, 2.0], 17).unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn hypotheses_flag_constant_ratio() {
        let c = Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let report = check_hypotheses(&c, &[2.0, 2.0], 17).unwrap();
        assert!(report.nondecreasing.pass);
        assert!(!report.ratio_increasing.pass);
        assert_eq!(
            report.ratio_increasing.witness,
            Some(HypothesisWitness::Pair { i: 1, j: 2 })
        );
        assert!(report.superlinear.pass);
    }

    #[test]
    fn hypotheses_flag_missing_self_limitation() {
        let c = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let report = check_hypotheses(&c, &[2.0, 2.0], 17).unwrap();
        assert!(!report.superlinear.pass);
        assert_eq!(
            report.superlinear.witness,
            Some(HypothesisWitness::Species { i: 1 })
        );
    }

    #[test]
    fn sampled_hypotheses_agree_on_lv() {
        let c = competition();
        let c2 = c.clone();
        let sampled = SampledNonlinearity::new(2, move |u| b_eval(u, &c2));
        let report = check_hypotheses_sampled(&sampled, &[2.0, 2.0], 9).unwrap();
        assert!(report.all_pass());
    }

    #[test]
    fn cooperative_on_derived_threshold_box() {
        // dF1/du2 = 0.2 - 0.9*u1 stays nonnegative up to u1 = 2/9.
        let spec = scenario::counterexample().spec;
        let t = 0.2 / 0.9;
        let report = cooperativity_box(&spec, &[2.0 / 9.0, 2.0 / 9.0]).unwrap();
        assert_eq!(report.verdict, CooperativityVerdict::CooperativeOnBox);
        for pt in &report.thresholds {
            assert_eq!(pt.threshold, t);
        }
        assert_eq!(report.cooperative_box, vec![t, t]);
    }

    #[test]
    fn not_cooperative_on_unit_box() {
        let spec = scenario::counterexample().spec;
        let report = cooperativity_box(&spec, &[1.0, 1.0]).unwrap();
        match report.verdict {
            CooperativityVerdict::NotCooperativeAt { point, i, j, value } => {
                assert_eq!(point, vec![1.0, 1.0]);
                assert_eq!((i, j), (1, 2));
                assert!((value + 0.7).abs() < 1e-15);
            }
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn cooperative_at_origin() {
        let spec = scenario::counterexample().spec;
        let report = cooperativity_box(&spec, &[0.0, 0.0]).unwrap();
        assert_eq!(report.verdict, CooperativityVerdict::CooperativeOnBox);
    }

    #[test]
    fn falsifier_pins_the_unit_box_instance() {
        let spec = scenario::counterexample().spec;
        let cx = falsify_uniform_monotonicity(&spec, &[1.0, 1.0], &[2.0, 2.0])
            .unwrap()
            .expect("violation must exist");
        assert_eq!(cx.base_point, vec![1.0, 1.0]);
        assert_eq!(cx.direction, 1);
        assert_eq!(cx.epsilon, 0.5);
        assert_eq!(cx.component, 2);
        assert!((cx.value + 0.45).abs() < 1e-15);
    }

    #[test]
    fn falsifier_tenth_epsilon_instance() {
        // b2(1,1) - b2(1.1,1) = 1.0 - 1.09, exactly -0.09 up to rounding.
        let c = competition();
        let value = b_eval(&[1.0, 1.0], &c)[1] - b_eval(&[1.1, 1.0], &c)[1];
        assert!((value + 0.09).abs() < 1e-15);
    }

    #[test]
    fn falsifier_returns_none_for_scalar() {
        let spec = SystemSpec::lotka_volterra(
            vec![1.0],
            Mat::from_rows(&[vec![0.8]]).unwrap(),
            Mat::from_rows(&[vec![0.1]]).unwrap(),
        );
        assert!(falsify_uniform_monotonicity(&spec, &[1.0], &[2.0])
            .unwrap()
            .is_none());
    }

    #[test]
    fn falsifier_rejects_bad_box() {
        let spec = scenario::counterexample().spec;
        assert!(falsify_uniform_monotonicity(&spec, &[0.0, 1.0], &[2.0, 2.0]).is_err());
        assert!(falsify_uniform_monotonicity(&spec, &[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn falsifier_works_through_sampled_term() {
        let c = competition();
        let sampled = SampledNonlinearity::new(2, move |u| b_eval(u, &c));
        let cx = falsify_uniform_monotonicity_for(&sampled, &[1.0, 1.0], &[2.0, 2.0])
            .unwrap()
            .expect("violation must exist");
        assert!(cx.value < 0.0);
    }

    proptest! {
        // b_i(v) - b_i(v + eps*e_k) = v_i * (b_i(v)/v_i - b_i(v+eps*e_k)/v_i)
        // for i != k: the i-th coordinate is untouched by the bump.
        #[test]
        fn bump_identity_holds(
            v0 in 0.1f64..5.0, v1 in 0.1f64..5.0,
            eps in 0.01f64..1.0, k in 0usize..2
        ) {
            let c = competition();
            let v = [v0, v1];
            let i = 1 - k;
            let mut bumped = v;
            bumped[k] += eps;
            let lhs = b_eval(&v, &c)[i] - b_eval(&bumped, &c)[i];
            let rhs = v[i] * (b_eval(&v, &c)[i] / v[i] - b_eval(&bumped, &c)[i] / v[i]);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }

        // Strictly positive competition defeats uniform monotonicity on
        // every admissible box.
        #[test]
        fn falsifier_succeeds_for_positive_competition(
            c00 in 0.05f64..5.0, c01 in 0.05f64..5.0,
            c10 in 0.05f64..5.0, c11 in 0.05f64..5.0,
            lo0 in 0.1f64..3.0, lo1 in 0.1f64..3.0,
            gap0 in 0.1f64..2.0, gap1 in 0.1f64..2.0
        ) {
            let spec = SystemSpec::lotka_volterra(
                vec![1.0, 1.0],
                Mat::from_rows(&[vec![0.5, 0.2], vec![0.2, 0.5]]).unwrap(),
                Mat::from_rows(&[vec![c00, c01], vec![c10, c11]]).unwrap(),
            );
            let lower = [lo0, lo1];
            let upper = [lo0 + gap0, lo1 + gap1];
            let cx = falsify_uniform_monotonicity(&spec, &lower, &upper).unwrap();
            prop_assert!(cx.is_some());
            let cx = cx.unwrap();
            prop_assert!(cx.value < 0.0);
            prop_assert!(cx.component != cx.direction);
            // The bumped point stays inside the box.
            let k = cx.direction - 1;
            prop_assert!(lower[k] + cx.epsilon <= upper[k] + 1e-12);
        }

        // Shrinking the box preserves cooperativity.
        #[test]
        fn cooperativity_is_monotone(
            r0 in 0.0f64..0.5, r1 in 0.0f64..0.5,
            s0 in 0.0f64..1.0, s1 in 0.0f64..1.0
        ) {
            let spec = scenario::counterexample().spec;
            let big = cooperativity_box(&spec, &[r0, r1]).unwrap();
            let small = cooperativity_box(&spec, &[r0 * s0, r1 * s1]).unwrap();
            if big.verdict == CooperativityVerdict::CooperativeOnBox {
                prop_assert_eq!(small.verdict, CooperativityVerdict::CooperativeOnBox);
            }
        }

        // Central differences track the analytic Jacobian.
        #[test]
        fn fd_jacobian_matches(
            u0 in 0.05f64..4.0, u1 in 0.05f64..4.0,
            c00 in 0.0f64..3.0, c01 in 0.0f64..3.0,
            c10 in 0.0f64..3.0, c11 in 0.0f64..3.0
        ) {
            let c = Mat::from_rows(&[vec![c00, c01], vec![c10, c11]]).unwrap();
            let u = [u0, u1];
            let step = 1e-5;
            let analytic = b_jacobian(&u, &c);
            let fd = fd_jacobian(&|v| b_eval(v, &c), &u, step);
            prop_assert!(max_norm_diff(analytic.data(), fd.data()) < 10.0 * step * step
                + 1e-9 * analytic.data().iter().fold(0.0f64, |a, &b| a.max(b.abs())));
        }
    }
}
