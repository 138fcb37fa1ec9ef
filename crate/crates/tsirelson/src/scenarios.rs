//! Reference quantum behaviors and trial distributions.
//!
//! The optimization targets used throughout are the quantum behaviors that
//! saturate the tilted bound `2 sqrt(1 + alpha^2)`. The bound is saturated
//! by a unique behavior with uniform marginals, fixed here in correlator
//! form; an explicit two-qubit computation ([`tilted_maximizer_qubit`])
//! reproduces the same 16 probabilities from a maximally entangled state
//! and serves as an independent oracle in the test suites.

use thiserror::Error;

use crate::bell::{self, cell_index, Behavior, BellError, CELLS, STRUCT_TOL};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error("weights must be nonnegative (weight {index} = {value})")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("{behaviors} behaviors but {weights} weights")]
    LengthMismatch { behaviors: usize, weights: usize },
    #[error("settings probabilities sum to {0}, expected 1")]
    SettingsSum(f64),
    #[error("unknown scenario {0:?} (expected \"chsh-max\" or \"tilted:alpha=A\")")]
    UnknownScenario(String),
}

/// Distribution over the four setting pairs `[ab, ab', a'b, a'b']`.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingsDistribution {
    pi: [f64; 4],
}

impl SettingsDistribution {
    /// Equiprobable settings, the default everywhere in this crate.
    pub fn uniform() -> Self {
        Self { pi: [0.25; 4] }
    }

    pub fn new(pi: [f64; 4]) -> Result<Self, ScenarioError> {
        for (index, &value) in pi.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ScenarioError::NegativeWeight { index, value });
            }
        }
        let sum: f64 = pi.iter().sum();
        if (sum - 1.0).abs() > STRUCT_TOL {
            return Err(ScenarioError::SettingsSum(sum));
        }
        Ok(Self { pi })
    }

    pub fn probabilities(&self) -> &[f64; 4] {
        &self.pi
    }

    pub fn prob(&self, setting: usize) -> f64 {
        self.pi[setting]
    }
}

impl Default for SettingsDistribution {
    fn default() -> Self {
        Self::uniform()
    }
}

/// A behavior together with a settings distribution: the joint distribution
/// `q(o, s) = pi(s) P(o | s)` governing one experimental trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDistribution {
    pub behavior: Behavior,
    pub settings: SettingsDistribution,
}

impl TrialDistribution {
    pub fn new(behavior: Behavior, settings: SettingsDistribution) -> Self {
        Self { behavior, settings }
    }

    /// A behavior under equiprobable settings.
    pub fn uniform(behavior: Behavior) -> Self {
        Self::new(behavior, SettingsDistribution::uniform())
    }

    /// The 16 joint probabilities in behavior cell order; they sum to 1.
    pub fn joint(&self) -> [f64; CELLS] {
        let mut q = [0.0; CELLS];
        for s in 0..4 {
            for o in 0..4 {
                q[cell_index(s, o)] = self.settings.prob(s) * self.behavior.get(s, o);
            }
        }
        q
    }
}

/// Correlators `(E_ab, E_ab', E_a'b, E_a'b')` of the behavior saturating the
/// tilted bound: the ab rows carry `alpha / sqrt(1 + alpha^2)` and the a'b
/// rows `±1 / sqrt(1 + alpha^2)`.
fn tilted_correlators(alpha: f64) -> [f64; 4] {
    let root = (1.0 + alpha * alpha).sqrt();
    [alpha / root, alpha / root, 1.0 / root, -1.0 / root]
}

fn behavior_from_correlators(correlators: [f64; 4]) -> Behavior {
    let mut p = [0.0; CELLS];
    for (s, &e) in correlators.iter().enumerate() {
        for o in 0..4 {
            // ++ and 00 carry (1 + E)/4; +0 and 0+ carry (1 - E)/4.
            let sign = if o == 0 || o == 3 { 1.0 } else { -1.0 };
            p[cell_index(s, o)] = (1.0 + sign * e) / 4.0;
        }
    }
    Behavior::new(p).expect("uniform-marginal correlator form is a valid behavior")
}

/// The unique quantum behavior saturating the tilted bound
/// `2 sqrt(1 + alpha^2)`, in uniform-marginal correlator form.
///
/// `alpha = 1` is allowed and gives the standard CHSH maximizer with all
/// correlators at `1/sqrt 2`.
pub fn tilted_maximizer(alpha: f64) -> Result<Behavior, ScenarioError> {
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(BellError::AlphaBelowOne(alpha).into());
    }
    Ok(behavior_from_correlators(tilted_correlators(alpha)))
}

/// The same behavior as [`tilted_maximizer`], computed from an explicit
/// two-qubit model instead of the correlator form.
///
/// State: the maximally entangled `(|00> + |11>)/sqrt 2`. Measurements are
/// `cos(theta) Z + sin(theta) X` with angles `a = 0`, `a' = pi/2`,
/// `b = atan(1/alpha)`, `b' = -atan(1/alpha)`, chosen so the correlators
/// `cos(theta_A - theta_B)` match the tilted maximizer. Each probability is
/// computed as the expectation of a projector pair on the joint state.
pub fn tilted_maximizer_qubit(alpha: f64) -> Result<Behavior, ScenarioError> {
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(BellError::AlphaBelowOne(alpha).into());
    }
    let phi = (1.0 / alpha).atan();
    let alice = [0.0, std::f64::consts::FRAC_PI_2];
    let bob = [phi, -phi];

    // Projector onto the `sign` eigenspace of cos(theta) Z + sin(theta) X.
    let projector = |theta: f64, sign: f64| -> [[f64; 2]; 2] {
        let (sin, cos) = theta.sin_cos();
        [
            [(1.0 + sign * cos) / 2.0, sign * sin / 2.0],
            [sign * sin / 2.0, (1.0 - sign * cos) / 2.0],
        ]
    };

    // |psi> = (|00> + |11>)/sqrt 2 as a length-4 vector over |00 01 10 11>.
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [inv_sqrt2, 0.0, 0.0, inv_sqrt2];

    let mut p = [0.0; CELLS];
    for (sa, &theta_a) in alice.iter().enumerate() {
        for (sb, &theta_b) in bob.iter().enumerate() {
            let s = 2 * sa + sb;
            for o in 0..4usize {
                // Outcome column -> (+1, -1) eigenvalue pair.
                let sign_a = if o == 0 || o == 1 { 1.0 } else { -1.0 };
                let sign_b = if o == 0 || o == 2 { 1.0 } else { -1.0 };
                let pa = projector(theta_a, sign_a);
                let pb = projector(theta_b, sign_b);
                // <psi| PA (x) PB |psi> via the Kronecker product.
                let mut value = 0.0;
                for (ra, rb, row_amp) in [(0, 0, psi[0]), (1, 1, psi[3])] {
                    if row_amp == 0.0 {
                        continue;
                    }
                    for (ca, cb, col_amp) in [(0, 0, psi[0]), (1, 1, psi[3])] {
                        value += row_amp * col_amp * pa[ra][ca] * pb[rb][cb];
                    }
                }
                p[cell_index(s, o)] = value.max(0.0);
            }
        }
    }
    Ok(Behavior::new(p).expect("projective measurement probabilities are normalized"))
}

/// Coordinate-wise convex combination of behaviors.
pub fn mix(behaviors: &[Behavior], weights: &[f64]) -> Result<Behavior, ScenarioError> {
    if behaviors.len() != weights.len() {
        return Err(ScenarioError::LengthMismatch {
            behaviors: behaviors.len(),
            weights: weights.len(),
        });
    }
    for (index, &value) in weights.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(ScenarioError::NegativeWeight { index, value });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > STRUCT_TOL {
        return Err(ScenarioError::WeightSum(sum));
    }
    let parts: Vec<(f64, &Behavior)> = weights.iter().copied().zip(behaviors.iter()).collect();
    Ok(bell::convex_combination(&parts))
}

/// Resolves a scenario name: `"chsh-max"` or `"tilted:alpha=A"`.
pub fn by_name(name: &str) -> Result<Behavior, ScenarioError> {
    let normalized = name.trim().replace('\u{3b1}', "alpha");
    if normalized == "chsh-max" {
        return tilted_maximizer(1.0);
    }
    if let Some(rest) = normalized.strip_prefix("tilted:alpha=") {
        let alpha: f64 = rest
            .parse()
            .map_err(|_| ScenarioError::UnknownScenario(name.to_string()))?;
        return tilted_maximizer(alpha);
    }
    Err(ScenarioError::UnknownScenario(name.to_string()))
}
