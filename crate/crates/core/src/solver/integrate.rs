//! Lawson (integrating-factor) RK4 for ∂ₜθ + v·∇θ = εΔθ in spectral space.
//!
//! Dissipation over a step is integrated exactly for the cubic Hermite
//! interpolant of the step in the integrating-factor frame, so the ledger
//! is exact whenever the advection term vanishes.

use serde::{Deserialize, Serialize};

use super::config::{SolverConfig, TimeStep};
use super::initial::{truncate_state, ScalarState};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{self, dealias_cutoff, FftNd, Lattice, C64, TWO_PI};

/// Above this value of λ·dt a mode is treated as purely diffusive in the
/// dissipation quadrature.
const STIFF_QUADRATURE: f64 = 30.0;

/// Time series of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationLedger {
    pub epsilon: f64,
    pub resolution: usize,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    /// ε∫₀ᵗ∫|∇θ|² dx ds
    pub dissipation_cumulative: Vec<f64>,
    /// ∫θ² dx
    pub variance: Vec<f64>,
    /// variance(t) − variance(0) + 2·dissipation(t)
    pub balance_residual: Vec<f64>,
    /// ∫θ² removed by spectral truncation of the initial data.
    pub truncation_loss: f64,
}

impl DissipationLedger {
    pub fn final_dissipation(&self) -> f64 {
        *self.dissipation_cumulative.last().unwrap_or(&0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,variance,dissipation_cumulative,balance_residual\n");
        for i in 0..self.times.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.times[i], self.variance[i], self.dissipation_cumulative[i], self.balance_residual[i]
            ));
        }
        s
    }
}

/// Result of `solve_trajectory`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub state: ScalarState,
    pub ledger: DissipationLedger,
    /// States at the ledger times, when requested.
    pub trajectory: Vec<ScalarState>,
}

/// ∫₀¹ τ^j e^{−xτ} dτ for j = 0..=6, by an all-positive series.
fn exp_moments(x: f64) -> [f64; 7] {
    let mut out = [0.0; 7];
    let ex = (-x).exp();
    let mut fact = 1.0;
    for (j, slot) in out.iter_mut().enumerate() {
        if j > 0 {
            fact *= j as f64;
        }
        // j!·e^{−x}·Σ_{i ≥ j+1} x^{i−j−1}/i!
        let mut term = 1.0 / (fact * (j + 1) as f64);
        let mut sum = term;
        let mut i = j + 1;
        loop {
            i += 1;
            term *= x / i as f64;
            sum += term;
            if term < 1e-18 * sum && i as f64 > x {
                break;
            }
        }
        *slot = fact * ex * sum;
    }
    out
}

/// Precomputed operators for one (field, grid, dt) combination.
pub(crate) struct Stepper {
    lat: Lattice,
    fft: FftNd,
    velocity: Vec<Vec<f64>>,
    wave: Vec<Vec<f64>>,
    keep: Vec<bool>,
    lambda: Vec<f64>,
    dt: f64,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
    moments: Vec<[f64; 7]>,
}

impl Stepper {
    pub(crate) fn new(v: &GridField, resolution: usize, epsilon: f64, dealias: bool, dt: f64) -> Result<Self> {
        let dim = v.dimension();
        let lat = Lattice::new(dim, resolution);
        let velocity = (0..dim).map(|c| v.real_component(c).to_vec()).collect();
        let n = lat.n;
        let wave: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                let stride = lat.stride(a);
                (0..lat.len())
                    .map(|f| {
                        let m = (f / stride) % n;
                        if m == n / 2 {
                            0.0
                        } else {
                            TWO_PI * spectral::wavenumber(m, n) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let cutoff = if dealias { dealias_cutoff(n) } else { n };
        let keep = (0..lat.len()).map(|f| lat.in_band(f, cutoff)).collect();
        let lambda: Vec<f64> = (0..lat.len())
            .map(|f| {
                let k = lat.wavevector(f);
                let k2: f64 = (0..dim).map(|a| (TWO_PI * k[a] as f64).powi(2)).sum();
                epsilon * k2
            })
            .collect();
        let mut s = Stepper {
            lat,
            fft: FftNd::new(dim, n),
            velocity,
            wave,
            keep,
            lambda,
            dt: 0.0,
            e_full: Vec::new(),
            e_half: Vec::new(),
            moments: Vec::new(),
        };
        s.set_dt(dt);
        Ok(s)
    }

    fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
        self.e_full = self.lambda.iter().map(|l| (-l * dt).exp()).collect();
        self.e_half = self.lambda.iter().map(|l| (-0.5 * l * dt).exp()).collect();
        self.moments = self.lambda.iter().map(|l| exp_moments(2.0 * l * dt)).collect();
    }

    /// N(u) = −P[v·∇θ]^, with the mean mode held at zero.
    pub(crate) fn rhs(&self, u: &[C64], out: &mut [C64]) {
        let len = self.lat.len();
        let dim = self.lat.dim;
        let i = C64::new(0.0, 1.0);
        let mut prod = vec![0.0; len];

        let mut buf: Vec<C64> = (0..len)
            .map(|f| {
                let d0 = u[f] * C64::new(0.0, self.wave[0][f]);
                let d1 = u[f] * C64::new(0.0, self.wave[1][f]);
                d0 + i * d1
            })
            .collect();
        self.fft.inverse(&mut buf);
        for f in 0..len {
            prod[f] = self.velocity[0][f] * buf[f].re + self.velocity[1][f] * buf[f].im;
        }
        if dim == 3 {
            let mut buf2: Vec<C64> = (0..len).map(|f| u[f] * C64::new(0.0, self.wave[2][f])).collect();
            self.fft.inverse(&mut buf2);
            for f in 0..len {
                prod[f] += self.velocity[2][f] * buf2[f].re;
            }
        }
        for f in 0..len {
            out[f] = C64::new(prod[f], 0.0);
        }
        self.fft.forward(out);
        for f in 0..len {
            out[f] = if self.keep[f] { -out[f] } else { C64::new(0.0, 0.0) };
        }
        out[0] = C64::new(0.0, 0.0);
    }

    /// Advances `u` by one step. `k1` holds N(u) on entry and N(u_new) on
    /// exit. Returns the dissipation ∫ ε∫|∇θ|² over the step.
    pub(crate) fn advance(&self, u: &mut [C64], k1: &mut [C64]) -> f64 {
        let len = self.lat.len();
        let h = self.dt;
        let zero = C64::new(0.0, 0.0);
        let mut stage = vec![zero; len];
        let mut k2 = vec![zero; len];
        let mut k3 = vec![zero; len];
        let mut k4 = vec![zero; len];

        for f in 0..len {
            stage[f] = (u[f] + k1[f] * (0.5 * h)) * self.e_half[f];
        }
        self.rhs(&stage, &mut k2);
        for f in 0..len {
            stage[f] = u[f] * self.e_half[f] + k2[f] * (0.5 * h);
        }
        self.rhs(&stage, &mut k3);
        for f in 0..len {
            stage[f] = u[f] * self.e_full[f] + k3[f] * (h * self.e_half[f]);
        }
        self.rhs(&stage, &mut k4);
        let mean = u[0];
        for f in 0..len {
            stage[f] = u[f] * self.e_full[f]
                + (k1[f] * self.e_full[f] + (k2[f] + k3[f]) * (2.0 * self.e_half[f]) + k4[f]) * (h / 6.0);
        }
        stage[0] = mean;
        let mut n_new = k2;
        self.rhs(&stage, &mut n_new);

        let mut dissipated = 0.0;
        for f in 1..len {
            let lam = self.lambda[f];
            if lam == 0.0 {
                continue;
            }
            let lh = lam * h;
            let m = &self.moments[f];
            if lh > STIFF_QUADRATURE {
                dissipated += lh * u[f].norm_sqr() * m[0];
                continue;
            }
            let grow = lh.exp();
            let u0 = u[f];
            let u1 = stage[f] * grow;
            let n0 = k1[f] * h;
            let n1 = n_new[f] * (h * grow);
            let c0 = u0;
            let c1 = n0;
            let c2 = (u1 - u0) * 3.0 - n0 * 2.0 - n1;
            let c3 = (u0 - u1) * 2.0 + n0 + n1;
            let re = |a: C64, b: C64| (a * b.conj()).re;
            let p = [
                c0.norm_sqr(),
                2.0 * re(c0, c1),
                2.0 * re(c0, c2) + c1.norm_sqr(),
                2.0 * (re(c0, c3) + re(c1, c2)),
                2.0 * re(c1, c3) + c2.norm_sqr(),
                2.0 * re(c2, c3),
                c3.norm_sqr(),
            ];
            dissipated += lh * p.iter().zip(m).map(|(a, b)| a * b).sum::<f64>();
        }
        u.copy_from_slice(&stage);
        k1.copy_from_slice(&n_new);
        dissipated
    }
}

fn max_speed(v: &GridField) -> f64 {
    v.max_abs()
}

fn check_inputs(state: &ScalarState, v: &GridField, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    let theta = &state.theta;
    if theta.components() != 1 {
        return Err(Error::Shape("θ must be a scalar field".into()));
    }
    if !(2..=3).contains(&v.dimension()) || v.components() != v.dimension() {
        return Err(Error::Shape(format!(
            "velocity must be a vector field on 𝕋² or 𝕋³, got {} component(s) in dimension {}",
            v.components(),
            v.dimension()
        )));
    }
    if v.dimension() != theta.dimension() || v.resolution() != theta.resolution() {
        return Err(Error::Shape(format!(
            "velocity (d = {}, N = {}) and scalar (d = {}, N = {}) do not match",
            v.dimension(),
            v.resolution(),
            theta.dimension(),
            theta.resolution()
        )));
    }
    Ok(())
}

/// Largest stable step: CFL, stiffness and horizon limits.
fn auto_dt(v: &GridField, cfg: &SolverConfig, horizon: f64) -> f64 {
    let n = v.resolution() as f64;
    let speed = max_speed(v);
    let mut dt = horizon;
    if speed > 0.0 {
        dt = dt.min(cfg.cfl_safety / (n * speed));
    }
    if cfg.epsilon > 0.0 {
        let kmax = if cfg.dealias { dealias_cutoff(v.resolution()) } else { v.resolution() / 2 } as f64;
        let lam_max = cfg.epsilon * v.dimension() as f64 * (TWO_PI * kmax).powi(2);
        dt = dt.min(cfg.max_diffusion_number / lam_max);
    }
    dt
}

fn check_courant(v: &GridField, cfg: &SolverConfig, dt: f64) -> Result<()> {
    let courant = dt * max_speed(v) * v.resolution() as f64;
    if courant > cfg.cfl_safety * (1.0 + 1e-12) {
        return Err(Error::Stability(format!(
            "fixed dt = {dt:e} gives Courant number {courant:.4} > cfl_safety = {}; \
             largest admissible dt is {:e}",
            cfg.cfl_safety,
            cfg.cfl_safety / (max_speed(v) * v.resolution() as f64)
        )));
    }
    Ok(())
}

/// One time step. With `dt = auto` the step is the automatic limit.
pub fn step(state: &ScalarState, v: &GridField, cfg: &SolverConfig) -> Result<ScalarState> {
    check_inputs(state, v, cfg)?;
    let dt = match cfg.dt {
        TimeStep::Fixed(dt) => {
            check_courant(v, cfg, dt)?;
            dt
        }
        TimeStep::Auto => auto_dt(v, cfg, cfg.t_final),
    };
    let stepper = Stepper::new(v, state.theta.resolution(), cfg.epsilon, cfg.dealias, dt)?;
    let mut u = state.theta.spectral().to_vec();
    let mut k1 = vec![C64::new(0.0, 0.0); u.len()];
    stepper.rhs(&u, &mut k1);
    stepper.advance(&mut u, &mut k1);
    Ok(ScalarState {
        theta: GridField::from_spectral(state.theta.dimension(), state.theta.resolution(), 1, u)?,
        time: state.time + dt,
        truncation_loss: state.truncation_loss,
    })
}

/// Integrates to `t_final`, returning the final state and the ledger.
pub fn solve(state0: &ScalarState, v: &GridField, cfg: &SolverConfig) -> Result<(ScalarState, DissipationLedger)> {
    let sol = solve_trajectory(state0, v, cfg, false)?;
    Ok((sol.state, sol.ledger))
}

/// As `solve`, optionally keeping the states at every ledger time.
pub fn solve_trajectory(
    state0: &ScalarState,
    v: &GridField,
    cfg: &SolverConfig,
    keep_trajectory: bool,
) -> Result<Solution> {
    check_inputs(state0, v, cfg)?;
    let n = state0.theta.resolution();
    let dim = state0.theta.dimension();

    let start = if cfg.dealias {
        truncate_state(state0, dealias_cutoff(n))?
    } else {
        state0.clone()
    };

    let horizon = cfg.t_final;
    let intervals = ((horizon / cfg.cadence()).round() as usize).max(1);
    let interval = horizon / intervals as f64;
    let target = match cfg.dt {
        TimeStep::Fixed(dt) => {
            check_courant(v, cfg, dt)?;
            dt
        }
        TimeStep::Auto => auto_dt(v, cfg, interval),
    };
    let sub = (interval / target * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = interval / sub as f64;
    let stepper = Stepper::new(v, n, cfg.epsilon, cfg.dealias, dt)?;

    let mut u = start.theta.spectral().to_vec();
    let mut k1 = vec![C64::new(0.0, 0.0); u.len()];
    stepper.rhs(&u, &mut k1);

    let var0 = spectral::energy(&u);
    let mut ledger = DissipationLedger {
        epsilon: cfg.epsilon,
        resolution: n,
        dt,
        steps: intervals * sub,
        times: vec![start.time],
        dissipation_cumulative: vec![0.0],
        variance: vec![var0],
        balance_residual: vec![0.0],
        truncation_loss: start.truncation_loss,
    };
    let mut trajectory = Vec::new();
    if keep_trajectory {
        trajectory.push(start.clone());
    }

    let mut dissipation = 0.0;
    for i in 1..=intervals {
        for _ in 0..sub {
            let inc = stepper.advance(&mut u, &mut k1);
            if cfg.epsilon > 0.0 {
                dissipation += inc;
            }
        }
        let t = start.time + horizon * i as f64 / intervals as f64;
        let var = spectral::energy(&u);
        ledger.times.push(t);
        ledger.dissipation_cumulative.push(dissipation);
        ledger.variance.push(var);
        ledger.balance_residual.push(var - var0 + 2.0 * dissipation);
        if keep_trajectory && i < intervals {
            trajectory.push(ScalarState {
                theta: GridField::from_spectral(dim, n, 1, u.clone())?,
                time: t,
                truncation_loss: start.truncation_loss,
            });
        }
    }
    let state = ScalarState {
        theta: GridField::from_spectral(dim, n, 1, u)?,
        time: start.time + horizon,
        truncation_loss: start.truncation_loss,
    };
    if keep_trajectory {
        trajectory.push(state.clone());
    }
    Ok(Solution {
        state,
        ledger,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_quadrature() {
        for x in [0.0, 1e-6, 0.3, 2.0, 25.0, 60.0] {
            let m = exp_moments(x);
            for (j, mj) in m.iter().enumerate() {
                // composite Simpson with many panels
                let k = 20000;
                let h = 1.0 / k as f64;
                let g = |t: f64| t.powi(j as i32) * (-x * t).exp();
                let mut s = g(0.0) + g(1.0);
                for i in 1..k {
                    s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                s *= h / 3.0;
                assert!((mj - s).abs() <= 1e-10 * s.abs().max(1e-300), "x={x} j={j} {mj} {s}");
            }
        }
        assert_eq!(exp_moments(0.0)[3], 0.25);
    }
}
