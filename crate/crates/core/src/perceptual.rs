//! The multiplicative group model of perceived colors.
//!
//! Scaled display colors live in the open cube (0,1)³. The componentwise
//! `-ln` map carries them onto the positive octant `(R+)^3`, which is an
//! abelian group under componentwise multiplication and acts on itself by
//! the same product; one more `ln` lands in `(R^3, +)`. Pulling the products
//! back through those maps induces a group structure `∗` on the cube itself,
//! with identity `(1/e, 1/e, 1/e)`.
//!
//! Equality of two group means is equivalent to their group difference
//! being the identity element, which is what the statistical pipeline in
//! [`crate::mvstat`] tests after mapping observations through these
//! coordinates.

use std::f64::consts::E;
use std::fmt;

use crate::colorimetry::{
    integrate_product, ColorMatchingFunctions, ColorimetryError, SpectralDistribution, UnitRgb,
};

#[derive(Debug)]
pub enum PerceptualError {
    /// A triple component is nonpositive or non-finite.
    NonPositive { component: usize, value: f64 },
    /// Sensitivity channels do not share one wavelength grid.
    GridMismatch,
    /// No common wavelength range between stimulus and sensitivities.
    EmptyOverlap,
    /// Activation coefficients must be nonnegative.
    NegativeActivation(f64),
    /// Tolerance must be positive.
    BadTolerance(f64),
    /// Scalars for the axiom checks must be positive and finite.
    BadScalar(f64),
    /// Axiom checks need nonempty samples and scalars.
    EmptyInput(&'static str),
    /// Error bubbled up from the spectral layer.
    Colorimetry(ColorimetryError),
}

impl fmt::Display for PerceptualError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerceptualError::NonPositive { component, value } => {
                write!(f, "component {component} = {value} is not positive")
            }
            PerceptualError::GridMismatch => {
                write!(f, "sensitivity channels must share one wavelength grid")
            }
            PerceptualError::EmptyOverlap => {
                write!(f, "no common wavelength range to integrate over")
            }
            PerceptualError::NegativeActivation(v) => {
                write!(f, "activation coefficient {v} is negative")
            }
            PerceptualError::BadTolerance(t) => write!(f, "tolerance {t} must be positive"),
            PerceptualError::BadScalar(s) => write!(f, "scalar {s} must be positive and finite"),
            PerceptualError::EmptyInput(what) => write!(f, "{what} must be nonempty"),
            PerceptualError::Colorimetry(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PerceptualError {}

impl From<ColorimetryError> for PerceptualError {
    fn from(e: ColorimetryError) -> Self {
        match e {
            ColorimetryError::EmptyOverlap => PerceptualError::EmptyOverlap,
            ColorimetryError::GridMismatch => PerceptualError::GridMismatch,
            other => PerceptualError::Colorimetry(other),
        }
    }
}

/// A point of the multiplicative group `((R+)^3, ·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveTriple {
    x: f64,
    y: f64,
    z: f64,
}

impl PositiveTriple {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, PerceptualError> {
        for (component, value) in [x, y, z].into_iter().enumerate() {
            if value <= 0.0 || !value.is_finite() {
                return Err(PerceptualError::NonPositive { component, value });
            }
        }
        Ok(Self { x, y, z })
    }

    fn new_unchecked(x: f64, y: f64, z: f64) -> Self {
        debug_assert!(x > 0.0 && y > 0.0 && z > 0.0);
        debug_assert!(x.is_finite() && y.is_finite() && z.is_finite());
        Self { x, y, z }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn components(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// A point of `(R^3, +)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuclideanTriple {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl EuclideanTriple {
    pub fn new(p: f64, q: f64, r: f64) -> Self {
        Self { p, q, r }
    }

    pub fn components(&self) -> [f64; 3] {
        [self.p, self.q, self.r]
    }
}

/// Clamps into the open interval `(eps, 1-eps)`.
pub fn clamp_open_unit(v: f64, eps: f64) -> f64 {
    assert!(eps > 0.0 && eps < 0.5, "clamp eps must lie in (0, 0.5)");
    assert!(!v.is_nan(), "cannot clamp NaN");
    v.clamp(eps, 1.0 - eps)
}

/// Componentwise `-ln`, carrying (0,1)³ onto the positive octant.
pub fn h_map(c: UnitRgb) -> PositiveTriple {
    let [u, v, w] = c.components();
    PositiveTriple::new_unchecked(-u.ln(), -v.ln(), -w.ln())
}

/// Componentwise `exp(-·)`, the inverse of [`h_map`].
pub fn h_inverse(t: PositiveTriple) -> UnitRgb {
    let [x, y, z] = t.components();
    UnitRgb::interior((-x).exp(), (-y).exp(), (-z).exp())
}

/// Componentwise `ln(-ln ·)`, carrying (0,1)³ onto all of R³. Sends the
/// induced identity `(1/e, 1/e, 1/e)` to the origin.
pub fn loglog_map(c: UnitRgb) -> EuclideanTriple {
    let [u, v, w] = c.components();
    EuclideanTriple::new((-u.ln()).ln(), (-v.ln()).ln(), (-w.ln()).ln())
}

/// Componentwise `exp(-exp(·))`, the inverse of [`loglog_map`].
pub fn loglog_inverse(t: EuclideanTriple) -> UnitRgb {
    let [p, q, r] = t.components();
    UnitRgb::interior((-p.exp()).exp(), (-q.exp()).exp(), (-r.exp()).exp())
}

/// Identity of the induced operation on (0,1)³.
pub fn induced_identity() -> UnitRgb {
    UnitRgb::interior(1.0 / E, 1.0 / E, 1.0 / E)
}

/// The group operation on (0,1)³ pulled back through the log coordinates:
/// componentwise `a ∗ b = exp(-(ln a)(ln b))`. Associative and commutative
/// with identity [`induced_identity`].
pub fn induced_op(a: UnitRgb, b: UnitRgb) -> UnitRgb {
    let x = a.components();
    let y = b.components();
    UnitRgb::interior(
        (-(x[0].ln() * y[0].ln())).exp(),
        (-(x[1].ln() * y[1].ln())).exp(),
        (-(x[2].ln() * y[2].ln())).exp(),
    )
}

/// Inverse for [`induced_op`]: componentwise `exp(1/ln a)`.
pub fn induced_inverse(a: UnitRgb) -> UnitRgb {
    let [u, v, w] = a.components();
    UnitRgb::interior(
        (1.0 / u.ln()).exp(),
        (1.0 / v.ln()).exp(),
        (1.0 / w.ln()).exp(),
    )
}

/// Identity element (1, 1, 1) of the multiplicative group.
pub fn group_identity() -> PositiveTriple {
    PositiveTriple::new_unchecked(1.0, 1.0, 1.0)
}

/// Action of the group on itself: componentwise product.
pub fn group_act(g: PositiveTriple, x: PositiveTriple) -> PositiveTriple {
    PositiveTriple::new_unchecked(g.x * x.x, g.y * x.y, g.z * x.z)
}

/// Componentwise reciprocal.
pub fn group_inverse(g: PositiveTriple) -> PositiveTriple {
    PositiveTriple::new_unchecked(1.0 / g.x, 1.0 / g.y, 1.0 / g.z)
}

/// The unique element moving `m1` to `m2`: componentwise `m2 / m1`.
///
/// Two means agree exactly when the difference is the identity (1, 1, 1).
pub fn group_difference(m1: PositiveTriple, m2: PositiveTriple) -> PositiveTriple {
    PositiveTriple::new_unchecked(m2.x / m1.x, m2.y / m1.y, m2.z / m1.z)
}

/// [`group_difference`] expressed in additive coordinates: componentwise
/// `ln(m2/m1)`, zero exactly when the means agree.
pub fn group_difference_coordinates(m1: PositiveTriple, m2: PositiveTriple) -> EuclideanTriple {
    let d = group_difference(m1, m2);
    EuclideanTriple::new(d.x.ln(), d.y.ln(), d.z.ln())
}

/// Spectral sensitivities of the three receptor types on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSensitivities {
    grid: Vec<f64>,
    channels: [Vec<f64>; 3],
}

impl ConeSensitivities {
    pub fn from_channels(
        s1: SpectralDistribution,
        s2: SpectralDistribution,
        s3: SpectralDistribution,
    ) -> Result<Self, PerceptualError> {
        if s1.wavelengths() != s2.wavelengths() || s1.wavelengths() != s3.wavelengths() {
            return Err(PerceptualError::GridMismatch);
        }
        Ok(Self {
            grid: s1.wavelengths().to_vec(),
            channels: [
                s1.values().to_vec(),
                s2.values().to_vec(),
                s3.values().to_vec(),
            ],
        })
    }

    /// Treats the three matching channels as sensitivities; convenient when
    /// no separate receptor data is at hand.
    pub fn from_cmf(cmf: &ColorMatchingFunctions) -> Self {
        Self {
            grid: cmf.grid().to_vec(),
            channels: [
                cmf.xbar().to_vec(),
                cmf.ybar().to_vec(),
                cmf.zbar().to_vec(),
            ],
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }
}

/// Receptor activation levels (α₁, α₂, α₃); nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationVector {
    a: [f64; 3],
}

impl ActivationVector {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self, PerceptualError> {
        for v in [a1, a2, a3] {
            if !v.is_finite() || v < 0.0 {
                return Err(PerceptualError::NegativeActivation(v));
            }
        }
        Ok(Self { a: [a1, a2, a3] })
    }

    pub fn components(&self) -> [f64; 3] {
        self.a
    }
}

/// Integrates the stimulus against each sensitivity channel, with the same
/// trapezoid engine used for tristimulus integration.
pub fn activation_coefficients(
    stimulus: &SpectralDistribution,
    sensitivities: &ConeSensitivities,
) -> Result<ActivationVector, PerceptualError> {
    let mut a = [0.0; 3];
    for (slot, channel) in a.iter_mut().zip(&sensitivities.channels) {
        *slot = integrate_product(stimulus, &sensitivities.grid, channel)?;
    }
    ActivationVector::new(a[0], a[1], a[2])
}

/// Two stimuli are metameric when all three activation coefficients agree
/// within `tol·max(1, |α_i|)`: they produce the same perceived color even
/// if their spectra differ.
pub fn is_metameric(
    x: &SpectralDistribution,
    y: &SpectralDistribution,
    sensitivities: &ConeSensitivities,
    tol: f64,
) -> Result<bool, PerceptualError> {
    if tol <= 0.0 || !tol.is_finite() {
        return Err(PerceptualError::BadTolerance(tol));
    }
    let ax = activation_coefficients(x, sensitivities)?.components();
    let ay = activation_coefficients(y, sensitivities)?.components();
    Ok(ax
        .iter()
        .zip(&ay)
        .all(|(a, b)| (a - b).abs() <= tol * a.abs().max(1.0)))
}

/// Outcome of one axiom check.
#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub axiom: u8,
    pub name: &'static str,
    pub passed: bool,
    pub counterexample: Option<String>,
}

/// Pass/fail verdicts for the executable axioms, with a counterexample for
/// any failure.
#[derive(Debug, Clone)]
pub struct AxiomReport {
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for AxiomReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for check in &self.checks {
            write!(
                f,
                "axiom {} ({}): {}",
                check.axiom,
                check.name,
                if check.passed { "PASS" } else { "FAIL" }
            )?;
            if let Some(ref ce) = check.counterexample {
                write!(f, " [{ce}]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

const ACTION_TOL: f64 = 1e-12;

/// Verifies the executable model axioms on a finite sample:
///
/// 1. closure under the positive scalar action `α ⊙ x = (αx₁, αx₂, αx₃)`;
/// 2. no additive inverses — componentwise sums of positive triples never
///    reach the origin;
/// 3. closure under convex combinations;
/// 5. homogeneity — for every ordered pair the group difference moves one
///    element exactly onto the other.
///
/// Axiom 4 (dimension at most three) holds by construction of the carrier
/// and has no runtime content.
pub fn check_axioms(
    sample: &[PositiveTriple],
    scalars: &[f64],
) -> Result<AxiomReport, PerceptualError> {
    if sample.is_empty() {
        return Err(PerceptualError::EmptyInput("sample"));
    }
    if scalars.is_empty() {
        return Err(PerceptualError::EmptyInput("scalars"));
    }
    for &s in scalars {
        if s <= 0.0 || !s.is_finite() {
            return Err(PerceptualError::BadScalar(s));
        }
    }

    let mut checks = Vec::with_capacity(4);

    // Axiom 1: scalar action stays in the positive octant.
    let mut counterexample = None;
    'a1: for x in sample {
        for &alpha in scalars {
            let scaled = x.components().map(|c| alpha * c);
            if scaled.iter().any(|c| *c <= 0.0 || !c.is_finite()) {
                counterexample = Some(format!("alpha = {alpha}, x = {:?}", x.components()));
                break 'a1;
            }
        }
    }
    checks.push(AxiomCheck {
        axiom: 1,
        name: "scalar action closure",
        passed: counterexample.is_none(),
        counterexample,
    });

    // Axiom 2: x ⊕ y keeps every coordinate positive, so no inverse can
    // cancel a color down to the origin.
    let mut counterexample = None;
    'a2: for x in sample {
        for y in sample {
            let sum: Vec<f64> = x
                .components()
                .iter()
                .zip(y.components())
                .map(|(a, b)| a + b)
                .collect();
            if sum.iter().any(|c| *c <= 0.0) {
                counterexample = Some(format!(
                    "x = {:?}, y = {:?} sums to {:?}",
                    x.components(),
                    y.components(),
                    sum
                ));
                break 'a2;
            }
        }
    }
    checks.push(AxiomCheck {
        axiom: 2,
        name: "no additive inverse",
        passed: counterexample.is_none(),
        counterexample,
    });

    // Axiom 3: convex combinations stay in the carrier. Interior weights are
    // derived from the provided scalars via s ↦ s/(1+s).
    let mut weights: Vec<f64> = scalars.iter().map(|s| s / (1.0 + s)).collect();
    weights.push(0.0);
    weights.push(1.0);
    let mut counterexample = None;
    'a3: for x in sample {
        for y in sample {
            for &alpha in &weights {
                let mixed: Vec<f64> = x
                    .components()
                    .iter()
                    .zip(y.components())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect();
                if mixed.iter().any(|c| *c <= 0.0 || !c.is_finite()) {
                    counterexample = Some(format!(
                        "alpha = {alpha}, x = {:?}, y = {:?}",
                        x.components(),
                        y.components()
                    ));
                    break 'a3;
                }
            }
        }
    }
    checks.push(AxiomCheck {
        axiom: 3,
        name: "convex closure",
        passed: counterexample.is_none(),
        counterexample,
    });

    // Axiom 5: the action is transitive on the sample — the reported
    // difference element carries x onto y.
    let mut counterexample = None;
    'a5: for x in sample {
        for y in sample {
            let g = group_difference(*x, *y);
            let moved = group_act(g, *x).components();
            for (m, t) in moved.iter().zip(y.components()) {
                if (m - t).abs() > ACTION_TOL * t.abs().max(1.0) {
                    counterexample = Some(format!(
                        "g = {:?} moves {:?} to {:?}, expected {:?}",
                        g.components(),
                        x.components(),
                        moved,
                        y.components()
                    ));
                    break 'a5;
                }
            }
        }
    }
    checks.push(AxiomCheck {
        axiom: 5,
        name: "homogeneous action",
        passed: counterexample.is_none(),
        counterexample,
    });

    Ok(AxiomReport { checks })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // indexed matrix checks
mod tests {
    use super::*;
    use crate::colorimetry::DEFAULT_CLAMP_EPS;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn rand_unit(rng: &mut ChaCha8Rng) -> UnitRgb {
        UnitRgb::new(
            rng.random_range(0.02..0.98),
            rng.random_range(0.02..0.98),
            rng.random_range(0.02..0.98),
        )
    }

    fn rand_positive(rng: &mut ChaCha8Rng) -> PositiveTriple {
        PositiveTriple::new(
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
            rng.random_range(0.01..10.0),
        )
        .unwrap()
    }

    #[test]
    fn h_map_identities() {
        let e_inv = 1.0 / std::f64::consts::E;
        let t = h_map(UnitRgb::new(e_inv, e_inv, e_inv));
        for c in t.components() {
            assert!((c - 1.0).abs() < 1e-15);
        }
        let t = h_map(UnitRgb::new(
            (-2.0f64).exp(),
            (-3.0f64).exp(),
            (-1.0f64).exp(),
        ));
        assert!((t.x() - 2.0).abs() < 1e-12);
        assert!((t.y() - 3.0).abs() < 1e-12);
        assert!((t.z() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_round_trip() {
        let c = UnitRgb::new(0.3, 0.5, 0.7);
        let back = h_inverse(h_map(c));
        for (a, b) in back.components().iter().zip(c.components()) {
            assert!((a - b).abs() < 1e-12);
        }
        let t = h_inverse(PositiveTriple::new(1.0, 1.0, 1.0).unwrap());
        for c in t.components() {
            assert!((c - 1.0 / std::f64::consts::E).abs() < 1e-15);
        }
        let half = h_inverse(PositiveTriple::new(2f64.ln(), 2f64.ln(), 2f64.ln()).unwrap());
        for c in half.components() {
            assert!((c - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn loglog_identities() {
        let e = std::f64::consts::E;
        let origin = loglog_map(UnitRgb::new(1.0 / e, 1.0 / e, 1.0 / e));
        for c in origin.components() {
            assert!(c.abs() < 1e-15);
        }
        let one = loglog_map(UnitRgb::new((-e).exp(), (-e).exp(), (-e).exp()));
        for c in one.components() {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn loglog_round_trip() {
        let c = UnitRgb::new(0.2, 0.5, 0.9);
        let back = loglog_inverse(loglog_map(c));
        for (a, b) in back.components().iter().zip(c.components()) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = loglog_inverse(EuclideanTriple::new(0.0, 0.0, 0.0));
        for c in back.components() {
            assert!((c - 1.0 / std::f64::consts::E).abs() < 1e-15);
        }
    }

    #[test]
    fn induced_identity_law() {
        let a = UnitRgb::new(0.3, 0.6, 0.9);
        let r = induced_op(a, induced_identity());
        for (x, y) in r.components().iter().zip(a.components()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn induced_op_multiplies_log_coordinates() {
        let a = (-2.0f64).exp();
        let b = (-3.0f64).exp();
        let r = induced_op(UnitRgb::new(a, a, a), UnitRgb::new(b, b, b));
        for c in r.components() {
            assert!(close(c, (-6.0f64).exp(), 1e-12));
        }
    }

    #[test]
    fn induced_inverse_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rand_unit(&mut rng);
            let r = induced_op(a, induced_inverse(a));
            for c in r.components() {
                assert!((c - 1.0 / std::f64::consts::E).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn isomorphism_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let a = rand_unit(&mut rng);
            let b = rand_unit(&mut rng);
            let lhs = loglog_map(induced_op(a, b)).components();
            let rhs: Vec<f64> = loglog_map(a)
                .components()
                .iter()
                .zip(loglog_map(b).components())
                .map(|(x, y)| x + y)
                .collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                assert!((l - r).abs() <= 1e-10 * r.abs().max(1.0));
            }
            // h intertwines the induced operation with the product
            let hl = h_map(induced_op(a, b)).components();
            let hr: Vec<f64> = h_map(a)
                .components()
                .iter()
                .zip(h_map(b).components())
                .map(|(x, y)| x * y)
                .collect();
            for (l, r) in hl.iter().zip(&hr) {
                assert!((l - r).abs() <= 1e-10 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn group_and_action_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let id = group_identity();
        for _ in 0..500 {
            let g = rand_positive(&mut rng);
            let h = rand_positive(&mut rng);
            let x = rand_positive(&mut rng);
            // identity action
            assert_eq!(group_act(id, x), x);
            // compatibility g·(h·x) = (gh)·x
            let lhs = group_act(g, group_act(h, x)).components();
            let rhs = group_act(group_act(g, h), x).components();
            for (l, r) in lhs.iter().zip(rhs) {
                assert!(close(*l, r, 1e-12));
            }
            // commutativity and inverse
            assert_eq!(group_act(g, h), group_act(h, g));
            let back = group_act(g, group_inverse(g)).components();
            for c in back {
                assert!(close(c, 1.0, 1e-12));
            }
        }
    }

    #[test]
    fn group_difference_defining_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let a = rand_positive(&mut rng);
            let b = rand_positive(&mut rng);
            let g = group_difference(a, b);
            let moved = group_act(g, a).components();
            for (m, t) in moved.iter().zip(b.components()) {
                assert!(close(*m, t, 1e-12));
            }
        }
        let same = PositiveTriple::new(5.0, 6.0, 7.0).unwrap();
        assert_eq!(group_difference(same, same), group_identity());
        let d = group_difference(
            PositiveTriple::new(1.0, 2.0, 4.0).unwrap(),
            PositiveTriple::new(2.0, 2.0, 2.0).unwrap(),
        );
        assert_eq!(d.components(), [2.0, 1.0, 0.5]);
        // additive coordinates vanish exactly on equal means
        let zero = group_difference_coordinates(same, same);
        assert_eq!(zero.components(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn order_reversal_under_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..200 {
            let lo = rng.random_range(0.01..0.5);
            let hi = rng.random_range(lo + 1e-6..0.99);
            let a = h_map(UnitRgb::new(lo, lo, lo));
            let b = h_map(UnitRgb::new(hi, hi, hi));
            assert!(a.x() > b.x());
        }
    }

    #[test]
    fn clamp_open_unit_cases() {
        let eps = DEFAULT_CLAMP_EPS;
        assert_eq!(clamp_open_unit(0.0, eps), eps);
        assert_eq!(clamp_open_unit(1.0, eps), 1.0 - eps);
        assert_eq!(clamp_open_unit(0.5, eps), 0.5);
        assert_eq!(clamp_open_unit(-3.0, eps), eps);
    }

    #[test]
    #[should_panic]
    fn clamp_rejects_bad_eps() {
        clamp_open_unit(0.5, 0.7);
    }

    #[test]
    fn positive_triple_rejects_boundary() {
        assert!(PositiveTriple::new(0.0, 1.0, 1.0).is_err());
        assert!(PositiveTriple::new(1.0, -2.0, 1.0).is_err());
        assert!(PositiveTriple::new(1.0, 1.0, f64::NAN).is_err());
        assert!(PositiveTriple::new(1.0, 1.0, f64::INFINITY).is_err());
    }

    fn grid_81() -> Vec<f64> {
        (0..81).map(|i| 380.0 + 5.0 * i as f64).collect()
    }

    fn cie_sensitivities() -> ConeSensitivities {
        ConeSensitivities::from_cmf(&ColorMatchingFunctions::cie_1931_2deg())
    }

    #[test]
    fn activation_simple_cases() {
        let grid = vec![400.0, 500.0, 600.0];
        let flat = SpectralDistribution::new(grid.clone(), vec![1.0; 3]).unwrap();
        let s = ConeSensitivities::from_channels(flat.clone(), flat.clone(), flat.clone()).unwrap();
        // x ≡ 1 against S ≡ 1 integrates to the interval length
        let a = activation_coefficients(&flat, &s).unwrap();
        for c in a.components() {
            assert!((c - 200.0).abs() < 1e-12);
        }
        // x ≡ 0 gives the zero vector
        let zero = SpectralDistribution::new(grid, vec![0.0; 3]).unwrap();
        let a = activation_coefficients(&zero, &s).unwrap();
        assert_eq!(a.components(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn activation_against_refined_riemann_sum() {
        // triangular stimulus vs a brute-force midpoint sum at 0.1 nm; the
        // support must be wide against the 5 nm grid for the quadrature to
        // hold 0.1%
        let grid = grid_81();
        let tri: Vec<f64> = grid
            .iter()
            .map(|&w| (1.0 - (w - 530.0f64).abs() / 150.0).max(0.0) * 80.0)
            .collect();
        let x = SpectralDistribution::new(grid.clone(), tri.clone()).unwrap();
        let s = cie_sensitivities();
        let a = activation_coefficients(&x, &s).unwrap().components();

        let interp = |xs: &[f64], ys: &[f64], at: f64| -> f64 {
            let i = xs.partition_point(|v| *v <= at).min(xs.len() - 1).max(1);
            let t = (at - xs[i - 1]) / (xs[i] - xs[i - 1]);
            ys[i - 1] + t * (ys[i] - ys[i - 1])
        };
        for i in 0..3 {
            let mut sum = 0.0;
            let mut wl = 380.0;
            while wl < 780.0 - 1e-9 {
                let mid = wl + 0.05;
                sum += interp(&grid, &tri, mid) * interp(&grid, s.channel(i), mid) * 0.1;
                wl += 0.1;
            }
            assert!(
                (a[i] - sum).abs() <= 1e-3 * sum.abs().max(1e-12),
                "channel {i}: {} vs {}",
                a[i],
                sum
            );
        }
    }

    /// Trapezoid weights for a grid: the quadrature form is the weighted dot
    /// product of the node values.
    fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
        let n = grid.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = grid[i + 1] - grid[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    /// Builds a perturbation orthogonal (under the trapezoid inner product)
    /// to all three sensitivity channels.
    fn orthogonal_perturbation(s: &ConeSensitivities, seed: u64, scale: f64) -> Vec<f64> {
        let grid = s.grid();
        let w = trapezoid_weights(grid);
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(&w).map(|((x, y), wi)| x * y * wi).sum()
        };
        // Gram–Schmidt on the channels, then project the random vector out
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for i in 0..3 {
            let mut v = s.channel(i).to_vec();
            for b in &basis {
                let c = dot(&v, b) / dot(b, b);
                for (vj, bj) in v.iter_mut().zip(b) {
                    *vj -= c * bj;
                }
            }
            basis.push(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut delta: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        for b in &basis {
            let c = dot(&delta, b) / dot(b, b);
            for (dj, bj) in delta.iter_mut().zip(b) {
                *dj -= c * bj;
            }
        }
        let max = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        for d in delta.iter_mut() {
            *d *= scale / max;
        }
        delta
    }

    #[test]
    fn metamerism_detects_constructed_pairs() {
        let s = cie_sensitivities();
        let grid = grid_81();
        let base = SpectralDistribution::new(grid.clone(), vec![60.0; 81]).unwrap();
        let delta = orthogonal_perturbation(&s, 21, 5.0);
        let perturbed = SpectralDistribution::new(
            grid.clone(),
            base.values()
                .iter()
                .zip(&delta)
                .map(|(v, d)| v + d)
                .collect(),
        )
        .unwrap();

        // reflexive, and invariant under perception-orthogonal perturbation
        assert!(is_metameric(&base, &base, &s, 1e-12).unwrap());
        assert!(is_metameric(&base, &perturbed, &s, 1e-9).unwrap());
        assert!(is_metameric(&perturbed, &base, &s, 1e-9).unwrap());

        // scaling the spectrum scales the activations: not metameric
        let doubled =
            SpectralDistribution::new(grid, base.values().iter().map(|v| 2.0 * v).collect())
                .unwrap();
        assert!(!is_metameric(&base, &doubled, &s, 1e-9).unwrap());

        // transitivity on exact constructions: stack two orthogonal deltas
        let delta2 = orthogonal_perturbation(&s, 22, 4.0);
        let third = SpectralDistribution::new(
            perturbed.wavelengths().to_vec(),
            perturbed
                .values()
                .iter()
                .zip(&delta2)
                .map(|(v, d)| v + d)
                .collect(),
        )
        .unwrap();
        assert!(is_metameric(&perturbed, &third, &s, 1e-9).unwrap());
        assert!(is_metameric(&base, &third, &s, 1e-9).unwrap());
    }

    #[test]
    fn metamerism_rejects_bad_tolerance() {
        let s = cie_sensitivities();
        let grid = grid_81();
        let flat = SpectralDistribution::new(grid, vec![1.0; 81]).unwrap();
        assert!(matches!(
            is_metameric(&flat, &flat, &s, 0.0),
            Err(PerceptualError::BadTolerance(_))
        ));
    }

    #[test]
    fn metamerism_constant_levels_differ() {
        let grid = vec![400.0, 500.0, 600.0];
        let one = SpectralDistribution::new(grid.clone(), vec![1.0; 3]).unwrap();
        let two = SpectralDistribution::new(grid.clone(), vec![2.0; 3]).unwrap();
        let flat = SpectralDistribution::new(grid, vec![1.0; 3]).unwrap();
        let s = ConeSensitivities::from_channels(flat.clone(), flat.clone(), flat).unwrap();
        assert!(!is_metameric(&one, &two, &s, 1e-9).unwrap());
    }

    #[test]
    fn axioms_pass_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let sample: Vec<PositiveTriple> = (0..40).map(|_| rand_positive(&mut rng)).collect();
        let scalars: Vec<f64> = (0..10)
            .map(|_| rng.random_range(0.0f64..10.0).max(1e-3))
            .collect();
        let report = check_axioms(&sample, &scalars).unwrap();
        assert!(report.all_passed(), "{report}");
        assert_eq!(report.checks.len(), 4);
        assert_eq!(
            report.checks.iter().map(|c| c.axiom).collect::<Vec<_>>(),
            vec![1, 2, 3, 5]
        );
    }

    #[test]
    fn axioms_validate_inputs() {
        let x = PositiveTriple::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            check_axioms(&[], &[1.0]),
            Err(PerceptualError::EmptyInput("sample"))
        ));
        assert!(matches!(
            check_axioms(&[x], &[]),
            Err(PerceptualError::EmptyInput("scalars"))
        ));
        assert!(matches!(
            check_axioms(&[x], &[-1.0]),
            Err(PerceptualError::BadScalar(_))
        ));
    }
}
