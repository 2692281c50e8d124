//! Well-mixed reference dynamics for the roulette rule.
//!
//! Without spatial structure every cooperator earns `d * rho` and every
//! defector `b * d * rho`, and the cooperator density obeys
//!
//! ```text
//! d(rho)/dt = -rho (1 - rho) / (1 - rho + rho / b + 1 / (b d))
//! ```
//!
//! which is integrated with fixed-step classical Runge-Kutta.

use crate::error::{invalid_param, Error, Result};

/// Default integration step.
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanFieldState {
    pub t: f64,
    pub rho: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("density {rho} outside [0, 1]")))
    }
}

/// Average returns `(U_C, U_D)` of cooperators and defectors.
pub fn mf_avg_payoffs(rho: f64, b: f64, degree: usize) -> Result<(f64, f64)> {
    check_rho(rho)?;
    let d = degree as f64;
    Ok((d * rho, b * d * rho))
}

/// Right-hand side of the density equation.
pub fn mf_derivative(rho: f64, b: f64, degree: usize) -> f64 {
    let d = degree as f64;
    -rho * (1.0 - rho) / (1.0 - rho + rho / b + 1.0 / (b * d))
}

/// One classical fourth-order Runge-Kutta step of `y' = f(y)`.
pub fn rk4_step(f: impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
    let k1 = f(y);
    let k2 = f(y + 0.5 * h * k1);
    let k3 = f(y + 0.5 * h * k2);
    let k4 = f(y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Integrates from `rho0` up to `horizon`, sampled at every integer round.
///
/// Each round is split into `ceil(1 / dt)` equal substeps, so the effective
/// step never exceeds `dt` and the samples fall exactly on integer times.
pub fn mf_integrate(
    rho0: f64,
    b: f64,
    degree: usize,
    dt: f64,
    horizon: f64,
) -> Result<Vec<MeanFieldState>> {
    mf_integrate_sampled(rho0, b, degree, dt, horizon, 1.0)
}

/// Like [`mf_integrate`] but sampled every `interval` time units.
pub fn mf_integrate_sampled(
    rho0: f64,
    b: f64,
    degree: usize,
    dt: f64,
    horizon: f64,
    interval: f64,
) -> Result<Vec<MeanFieldState>> {
    check_rho(rho0)?;
    if b.is_nan() || b <= 1.0 {
        return Err(invalid_param("b", format!("temptation {b} must exceed 1")));
    }
    if degree == 0 {
        return Err(invalid_param("degree", "must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid_param("dt", format!("step {dt} must be positive")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid_param(
            "horizon",
            format!("horizon {horizon} must be positive"),
        ));
    }
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(invalid_param(
            "interval",
            format!("sampling interval {interval} must be positive"),
        ));
    }
    let substeps = (interval / dt).ceil() as usize;
    let h = interval / substeps as f64;
    let samples = (horizon / interval + 1e-9).floor() as usize;
    let f = |rho: f64| mf_derivative(rho, b, degree);
    let mut rho = rho0;
    let mut out = Vec::with_capacity(samples + 1);
    out.push(MeanFieldState { t: 0.0, rho });
    for k in 1..=samples {
        for _ in 0..substeps {
            rho = rk4_step(f, rho, h).clamp(0.0, 1.0);
        }
        out.push(MeanFieldState {
            t: k as f64 * interval,
            rho,
        });
    }
    Ok(out)
}
