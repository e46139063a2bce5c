//! Hindmarsh-Rose neuron dynamics.
//!
//! The model in dimensionless form:
//!
//! ```text
//! dS/dt = P + 3S² - S³ - Q + I
//! dP/dt = 1 - 5S² - P
//! dQ/dt = -r [Q - 4 (S + 8/5)]
//! ```
//!
//! `S` is the membrane voltage, `P` and `Q` the fast and slow transport
//! variables. Trajectories are integrated with fixed-step RK4 and sampled
//! to discrete-time signals.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HrParams {
    /// External applied current `I`.
    pub current: f64,
    /// Internal-state parameter `r`, the rate of the slow variable.
    pub slow_rate: f64,
    /// Integration step.
    pub dt: f64,
    /// Sampling period of the discrete signal.
    pub sample_interval: f64,
    /// Model time discarded before the first sample.
    pub transient: f64,
    /// Any state component above this magnitude aborts integration.
    pub divergence_bound: f64,
}

impl Default for HrParams {
    fn default() -> Self {
        Self {
            current: 3.28,
            slow_rate: 0.0021,
            dt: 0.01,
            sample_interval: 1.0,
            transient: 500.0,
            divergence_bound: 1e6,
        }
    }
}

impl HrParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !self.current.is_finite() || !self.slow_rate.is_finite() {
            return bad("current and slow_rate must be finite");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.sample_interval > 0.0) || !self.sample_interval.is_finite() {
            return bad("sample_interval must be positive");
        }
        let ratio = self.sample_interval / self.dt;
        if (ratio - ratio.round()).abs() > 1e-12 * ratio || ratio.round() < 1.0 {
            return bad("sample_interval must be an integer multiple of dt");
        }
        if !(self.transient >= 0.0) || !self.transient.is_finite() {
            return bad("transient must be non-negative");
        }
        if !(self.divergence_bound > 0.0) {
            return bad("divergence_bound must be positive");
        }
        Ok(())
    }

    /// Integration steps per sample.
    pub fn sample_stride(&self) -> usize {
        (self.sample_interval / self.dt).round() as usize
    }

    /// Integration steps discarded before the first sample.
    pub fn transient_steps(&self) -> usize {
        (self.transient / self.dt).round() as usize
    }
}

/// A point `(S, P, Q)` in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HrState {
    pub voltage: f64,
    pub fast: f64,
    pub slow: f64,
}

impl HrState {
    pub const fn new(voltage: f64, fast: f64, slow: f64) -> Self {
        Self { voltage, fast, slow }
    }

    /// Uniform draw from the cube `[-1, 1]³`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.voltage.is_finite() && self.fast.is_finite() && self.slow.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.voltage.abs().max(self.fast.abs()).max(self.slow.abs())
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let d = *self - *other;
        (d.voltage * d.voltage + d.fast * d.fast + d.slow * d.slow).sqrt()
    }

    fn axpy(&self, h: f64, d: &Self) -> Self {
        Self::new(
            self.voltage + h * d.voltage,
            self.fast + h * d.fast,
            self.slow + h * d.slow,
        )
    }
}

impl std::ops::Sub for HrState {
    type Output = HrState;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.voltage - rhs.voltage, self.fast - rhs.fast, self.slow - rhs.slow)
    }
}

/// Right-hand side of an autonomous three-variable ODE.
pub trait VectorField {
    fn derivative(&self, state: &HrState) -> HrState;
}

impl<F: Fn(&HrState) -> HrState> VectorField for F {
    fn derivative(&self, state: &HrState) -> HrState {
        self(state)
    }
}

/// The Hindmarsh-Rose vector field for a given current and slow rate.
#[derive(Debug, Clone, Copy)]
pub struct HindmarshRose {
    pub current: f64,
    pub slow_rate: f64,
}

impl From<&HrParams> for HindmarshRose {
    fn from(p: &HrParams) -> Self {
        Self { current: p.current, slow_rate: p.slow_rate }
    }
}

impl VectorField for HindmarshRose {
    #[inline]
    fn derivative(&self, st: &HrState) -> HrState {
        let s = st.voltage;
        let s2 = s * s;
        HrState::new(
            st.fast + 3.0 * s2 - s2 * s - st.slow + self.current,
            1.0 - 5.0 * s2 - st.fast,
            -self.slow_rate * (st.slow - 4.0 * (s + 1.6)),
        )
    }
}

/// `(dS, dP, dQ)` at `state`.
pub fn hr_derivative(state: &HrState, params: &HrParams) -> HrState {
    HindmarshRose::from(params).derivative(state)
}

/// One classical fourth-order Runge-Kutta step.
#[inline]
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, state: &HrState, h: f64) -> HrState {
    let k1 = field.derivative(state);
    let k2 = field.derivative(&state.axpy(0.5 * h, &k1));
    let k3 = field.derivative(&state.axpy(0.5 * h, &k2));
    let k4 = field.derivative(&state.axpy(h, &k3));
    HrState::new(
        state.voltage + h / 6.0 * (k1.voltage + 2.0 * k2.voltage + 2.0 * k3.voltage + k4.voltage),
        state.fast + h / 6.0 * (k1.fast + 2.0 * k2.fast + 2.0 * k3.fast + k4.fast),
        state.slow + h / 6.0 * (k1.slow + 2.0 * k2.slow + 2.0 * k3.slow + k4.slow),
    )
}

/// Steps `field` forward, calling `visit(step_index, state)` for the initial
/// state and after every step.
fn march<F, V>(field: &F, params: &HrParams, initial: HrState, steps: usize, mut visit: V) -> Result<HrState>
where
    F: VectorField + ?Sized,
    V: FnMut(usize, &HrState),
{
    if !initial.is_finite() {
        return Err(Error::InvalidParameter("initial state must be finite".into()));
    }
    let mut state = initial;
    visit(0, &state);
    for i in 1..=steps {
        state = rk4_step(field, &state, params.dt);
        if !state.is_finite() || state.max_abs() > params.divergence_bound {
            return Err(Error::IntegrationDiverged {
                time: i as f64 * params.dt,
                bound: params.divergence_bound,
            });
        }
        visit(i, &state);
    }
    Ok(state)
}

fn step_count(duration: f64, dt: f64) -> usize {
    // tolerate representation error in duration / dt
    (duration / dt + 1e-9).floor() as usize
}

/// RK4 trajectory of the Hindmarsh-Rose system over `duration`, one state
/// per step of `params.dt` including the initial state.
pub fn integrate(params: &HrParams, initial: HrState, duration: f64) -> Result<Vec<HrState>> {
    integrate_field(&HindmarshRose::from(params), params, initial, duration)
}

/// [`integrate`] for an arbitrary vector field.
pub fn integrate_field<F: VectorField + ?Sized>(
    field: &F,
    params: &HrParams,
    initial: HrState,
    duration: f64,
) -> Result<Vec<HrState>> {
    params.validate()?;
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    let steps = step_count(duration, params.dt);
    let mut out = Vec::with_capacity(steps + 1);
    march(field, params, initial, steps, |_, s| out.push(*s))?;
    Ok(out)
}

/// A finite, fixed-length discrete-time signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
}

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(n) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("sample {n} is not finite")));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Voltage at `transient, transient + sample_interval, ...` for `length`
/// samples.
pub fn sample_signal(trajectory: &[HrState], params: &HrParams, length: usize) -> Result<Signal> {
    params.validate()?;
    let stride = params.sample_stride();
    let offset = params.transient_steps();
    if length == 0 {
        return Signal::new(Vec::new());
    }
    let last = offset + (length - 1) * stride;
    if last >= trajectory.len() {
        return Err(Error::TrajectoryTooShort { needed: last, available: trajectory.len() });
    }
    Signal::new((0..length).map(|i| trajectory[offset + i * stride].voltage).collect())
}

/// Integrates and samples in one pass without storing the trajectory.
/// Produces exactly the samples `sample_signal(integrate(..))` would.
pub fn simulate_signal(params: &HrParams, initial: HrState, length: usize) -> Result<Signal> {
    params.validate()?;
    if length == 0 {
        return Signal::new(Vec::new());
    }
    let stride = params.sample_stride();
    let offset = params.transient_steps();
    let last = offset + (length - 1) * stride;
    let mut samples = Vec::with_capacity(length);
    march(&HindmarshRose::from(params), params, initial, last, |i, s| {
        if i >= offset && (i - offset).is_multiple_of(stride) {
            samples.push(s.voltage);
        }
    })?;
    Signal::new(samples)
}

/// Adds i.i.d. `N(0, variance)` noise to every sample.
pub fn add_gaussian_noise<R: Rng + ?Sized>(signal: &Signal, variance: f64, rng: &mut R) -> Result<Signal> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter("noise variance must be non-negative".into()));
    }
    if variance == 0.0 {
        return Ok(signal.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive deviation");
    Signal::new(signal.samples.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Model time between renormalizations in [`divergence_exponent`].
pub const RENORMALIZATION_INTERVAL: f64 = 1.0;

/// Largest-exponent estimate by the two-trajectory renormalization method.
///
/// The reference trajectory first runs through `params.transient`. A twin
/// is then placed `separation` away along the voltage axis, both are
/// advanced, and every [`RENORMALIZATION_INTERVAL`] the twin is pulled back
/// to distance `separation` along the current difference. The result is the
/// mean of the logged stretch factors per unit time over `horizon`.
pub fn divergence_exponent(params: &HrParams, initial: HrState, separation: f64, horizon: f64) -> Result<f64> {
    divergence_exponent_field(&HindmarshRose::from(params), params, initial, separation, horizon)
}

/// [`divergence_exponent`] for an arbitrary vector field.
pub fn divergence_exponent_field<F: VectorField + ?Sized>(
    field: &F,
    params: &HrParams,
    initial: HrState,
    separation: f64,
    horizon: f64,
) -> Result<f64> {
    params.validate()?;
    if !(separation > 0.0) || !separation.is_finite() {
        return Err(Error::InvalidParameter("separation must be positive".into()));
    }
    if !(horizon >= RENORMALIZATION_INTERVAL) {
        return Err(Error::InvalidParameter("horizon shorter than one renormalization interval".into()));
    }
    let reference = march(field, params, initial, params.transient_steps(), |_, _| {})?;
    let per_block = step_count(RENORMALIZATION_INTERVAL, params.dt).max(1);
    let blocks = (horizon / (per_block as f64 * params.dt)).floor() as usize;

    let mut reference = reference;
    let mut twin = HrState::new(reference.voltage + separation, reference.fast, reference.slow);
    let mut log_sum = 0.0;
    for _ in 0..blocks {
        reference = march(field, params, reference, per_block, |_, _| {})?;
        twin = march(field, params, twin, per_block, |_, _| {})?;
        let d = twin.distance(&reference);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::InvalidParameter("twin trajectory collapsed onto the reference".into()));
        }
        log_sum += (d / separation).ln();
        twin = reference.axpy(separation / d, &(twin - reference));
    }
    Ok(log_sum / (blocks as f64 * per_block as f64 * params.dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn with(current: f64) -> HrParams {
        HrParams { current, ..HrParams::default() }
    }

    #[test]
    fn derivative_by_substitution() {
        let d = hr_derivative(&HrState::new(0.0, 1.0, 0.0), &with(0.0));
        assert_relative_eq!(d.voltage, 1.0);
        assert_relative_eq!(d.fast, 0.0);
        assert_relative_eq!(d.slow, 0.01344, max_relative = 1e-12);

        let r = 0.37;
        let p = HrParams { current: 0.0, slow_rate: r, ..HrParams::default() };
        let d = hr_derivative(&HrState::default(), &p);
        assert_eq!((d.voltage, d.fast), (0.0, 1.0));
        assert_relative_eq!(d.slow, 6.4 * r, max_relative = 1e-12);

        let d = hr_derivative(&HrState::new(1.0, -4.0, 3.28), &with(3.28));
        assert_relative_eq!(d.voltage, -2.0, epsilon = 1e-12);
        assert_relative_eq!(d.fast, 0.0, epsilon = 1e-12);
        // -0.0021 * (3.28 - 4 * 2.6) = 0.0021 * 7.12
        assert_relative_eq!(d.slow, 0.014952, max_relative = 1e-10);
    }

    #[test]
    fn trajectory_length_counts_initial_state() {
        let p = HrParams::default();
        let t = integrate(&p, HrState::default(), 10.0 * p.dt).unwrap();
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], HrState::default());
    }

    #[test]
    fn sampling_picks_strided_indices() {
        let p = HrParams { transient: 0.0, ..HrParams::default() };
        let traj: Vec<HrState> = (0..=300).map(|i| HrState::new(i as f64, 0.0, 0.0)).collect();
        let s = sample_signal(&traj, &p, 3).unwrap();
        assert_eq!(s.samples(), &[0.0, 100.0, 200.0]);

        let flat = vec![HrState::new(0.25, 1.0, 2.0); 301];
        assert!(sample_signal(&flat, &p, 3).unwrap().samples().iter().all(|&v| v == 0.25));

        assert!(matches!(
            sample_signal(&traj, &p, 5),
            Err(Error::TrajectoryTooShort { needed: 400, .. })
        ));
    }

    #[test]
    fn streaming_matches_stored_trajectory() {
        let p = HrParams { transient: 3.0, ..HrParams::default() };
        let init = HrState::new(0.1, -0.2, 0.3);
        let traj = integrate(&p, init, 3.0 + 9.0).unwrap();
        let stored = sample_signal(&traj, &p, 10).unwrap();
        let streamed = simulate_signal(&p, init, 10).unwrap();
        assert_eq!(stored, streamed);
    }

    #[test]
    fn full_length_signal() {
        let s = simulate_signal(&HrParams::default(), HrState::default(), 100).unwrap();
        assert_eq!(s.len(), 100);
    }

    #[test]
    fn rejects_incommensurate_sampling() {
        let p = HrParams { sample_interval: 1.005, ..HrParams::default() };
        assert!(p.validate().is_err());
        let p = HrParams { transient: -1.0, ..HrParams::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let p = HrParams { dt: 0.01, ..HrParams::default() };
        let explode = |s: &HrState| HrState::new(s.voltage * s.voltage, 0.0, 0.0);
        let err = integrate_field(&explode, &p, HrState::new(2.0, 0.0, 0.0), 10.0).unwrap_err();
        assert!(matches!(err, Error::IntegrationDiverged { .. }));
    }

    #[test]
    fn zero_variance_noise_is_identity() {
        let s = Signal::new(vec![1.0, -2.0, 3.5]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(add_gaussian_noise(&s, 0.0, &mut rng).unwrap(), s);
        assert!(add_gaussian_noise(&s, -0.1, &mut rng).is_err());
    }

    #[test]
    fn noise_has_requested_variance() {
        let zero = Signal::new(vec![0.0; 100_000]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let noisy = add_gaussian_noise(&zero, 0.01, &mut rng).unwrap();
        let n = noisy.len() as f64;
        let mean = noisy.samples().iter().sum::<f64>() / n;
        let var = noisy.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.0095..=0.0105).contains(&var), "{var}");
    }

    #[test]
    fn linear_decay_has_unit_negative_exponent() {
        let decay = |s: &HrState| HrState::new(-s.voltage, 0.0, 0.0);
        let p = HrParams { transient: 0.0, ..HrParams::default() };
        let e = divergence_exponent_field(&decay, &p, HrState::new(1.0, 0.0, 0.0), 1e-8, 50.0).unwrap();
        assert!((e + 1.0).abs() < 0.05, "{e}");
    }

    #[test]
    fn zero_separation_is_rejected() {
        let p = HrParams::default();
        assert!(divergence_exponent(&p, HrState::default(), 0.0, 100.0).is_err());
    }
}
