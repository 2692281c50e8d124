//! Least-squares fits of the equilibrium density curve `rho(b)`.
//!
//! Three families are supported:
//!
//! * power law `scale * (b_cr - x)^beta` for `x < b_cr`, zero beyond;
//! * quadratic `a x^2 + b x + c`;
//! * trigonometric `A sin(omega x + phi) + offset`.
//!
//! Fits minimize the residual sum of squares with a Nelder-Mead simplex run
//! from several seeded random starts plus one reference start per family.
//! Internally each family is parametrized on `u = (x - center) / half_span`
//! so the simplex sees comparable scales in every direction.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, SimRng};

/// Number of random starts when none is requested explicitly.
pub const DEFAULT_STARTS: usize = 50;

/// Reference parameters used as extra starting points.
pub const REFERENCE_QUADRATIC: FitModel = FitModel::Quadratic {
    a: -2.7363,
    b: 4.8644,
    c: -1.7205,
};
pub const REFERENCE_TRIG: FitModel = FitModel::Trig {
    amplitude: -0.2568,
    frequency: 7.2462,
    phase: -2.5603,
    offset: 0.1314,
};
pub const REFERENCE_CRITICAL_B: f64 = 1.31;
pub const REFERENCE_BETA: f64 = 0.923;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FitFamily {
    PowerLaw,
    Quadratic,
    Trigonometric,
}

impl FitFamily {
    pub fn all() -> [FitFamily; 3] {
        [
            FitFamily::PowerLaw,
            FitFamily::Quadratic,
            FitFamily::Trigonometric,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            FitFamily::PowerLaw => "power-law",
            FitFamily::Quadratic => "quadratic",
            FitFamily::Trigonometric => "trigonometric",
        }
    }

    pub fn parameter_count(self) -> usize {
        match self {
            FitFamily::PowerLaw | FitFamily::Quadratic => 3,
            FitFamily::Trigonometric => 4,
        }
    }
}

impl fmt::Display for FitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitModel {
    PowerLaw {
        b_cr: f64,
        beta: f64,
        scale: f64,
    },
    Quadratic {
        a: f64,
        b: f64,
        c: f64,
    },
    Trig {
        amplitude: f64,
        frequency: f64,
        phase: f64,
        offset: f64,
    },
}

impl FitModel {
    pub fn family(&self) -> FitFamily {
        match self {
            FitModel::PowerLaw { .. } => FitFamily::PowerLaw,
            FitModel::Quadratic { .. } => FitFamily::Quadratic,
            FitModel::Trig { .. } => FitFamily::Trigonometric,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FitModel::PowerLaw { b_cr, beta, scale } => {
                if x < b_cr {
                    scale * (b_cr - x).powf(beta)
                } else {
                    0.0
                }
            }
            FitModel::Quadratic { a, b, c } => (a * x + b) * x + c,
            FitModel::Trig {
                amplitude,
                frequency,
                phase,
                offset,
            } => amplitude * (frequency * x + phase).sin() + offset,
        }
    }

    /// Named parameters in declaration order.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FitModel::PowerLaw { b_cr, beta, scale } => {
                vec![("b_cr", b_cr), ("beta", beta), ("scale", scale)]
            }
            FitModel::Quadratic { a, b, c } => vec![("a", a), ("b", b), ("c", c)],
            FitModel::Trig {
                amplitude,
                frequency,
                phase,
                offset,
            } => vec![
                ("A", amplitude),
                ("omega", frequency),
                ("phi", phase),
                ("offset", offset),
            ],
        }
    }

    /// Representative of a trigonometric model with `A >= 0`, `omega >= 0`
    /// and `phi` in `[0, 2 pi)`; other families are returned unchanged.
    ///
    /// Uses `A sin(t) = -A sin(t + pi)` and `sin(-t) = -sin(t)`.
    pub fn canonical(&self) -> Self {
        match *self {
            FitModel::Trig {
                mut amplitude,
                mut frequency,
                mut phase,
                offset,
            } => {
                if frequency < 0.0 {
                    frequency = -frequency;
                    phase = -phase;
                    amplitude = -amplitude;
                }
                if amplitude < 0.0 {
                    amplitude = -amplitude;
                    phase += PI;
                }
                phase = phase.rem_euclid(TAU);
                if phase >= TAU {
                    phase = 0.0;
                }
                FitModel::Trig {
                    amplitude,
                    frequency,
                    phase,
                    offset,
                }
            }
            other => other,
        }
    }
}

impl fmt::Display for FitModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .parameters()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        write!(f, "{}", parts.join(";"))
    }
}

pub fn evaluate_model(model: &FitModel, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| model.eval(x)).collect()
}

fn check_pair(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() || y.len() != yhat.len() {
        return Err(Error::InvalidInput(format!(
            "need equal nonzero lengths, got {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

fn residual_ss(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Root mean squared error `sqrt(sum (y - yhat)^2 / n)`.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    Ok((residual_ss(y, yhat) / y.len() as f64).sqrt())
}

/// Goodness of fit `1 - sqrt(sum (y - yhat)^2 / sum y^2)`.
pub fn goodness_of_fit(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_pair(y, yhat)?;
    let total: f64 = y.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Err(Error::UndefinedMetric(
            "goodness of fit needs a nonzero data vector",
        ));
    }
    Ok(1.0 - (residual_ss(y, yhat) / total).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub rmse: f64,
    /// `None` when every observation is zero.
    pub goodness: Option<f64>,
    pub sse: f64,
    pub starts: usize,
    pub evaluations: usize,
}

/// Maps between natural parameters and the centered internal ones.
#[derive(Clone, Copy, Debug)]
struct Frame {
    center: f64,
    half_span: f64,
}

impl Frame {
    fn of(xs: &[f64]) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let half_span = if hi > lo { (hi - lo) / 2.0 } else { 1.0 };
        Frame {
            center: (hi + lo) / 2.0,
            half_span,
        }
    }

    fn decode(self, family: FitFamily, p: &[f64]) -> FitModel {
        let (m, s) = (self.center, self.half_span);
        match family {
            FitFamily::PowerLaw => FitModel::PowerLaw {
                b_cr: m + s * p[0],
                beta: p[1],
                scale: p[2] / s.powf(p[1]),
            },
            FitFamily::Quadratic => {
                let a = p[0] / (s * s);
                let b = p[1] / s - 2.0 * a * m;
                FitModel::Quadratic {
                    a,
                    b,
                    c: p[2] - a * m * m - b * m,
                }
            }
            FitFamily::Trigonometric => {
                let frequency = p[1] / s;
                FitModel::Trig {
                    amplitude: p[0],
                    frequency,
                    phase: p[2] - frequency * m,
                    offset: p[3],
                }
            }
        }
    }

    fn encode(self, model: &FitModel) -> Vec<f64> {
        let (m, s) = (self.center, self.half_span);
        match *model {
            FitModel::PowerLaw { b_cr, beta, scale } => {
                vec![(b_cr - m) / s, beta, scale * s.powf(beta)]
            }
            FitModel::Quadratic { a, b, c } => {
                vec![a * s * s, s * (2.0 * a * m + b), a * m * m + b * m + c]
            }
            FitModel::Trig {
                amplitude,
                frequency,
                phase,
                offset,
            } => vec![amplitude, frequency * s, phase + frequency * m, offset],
        }
    }

    /// Model value at internal coordinate `u` for internal parameters `p`.
    fn eval(family: FitFamily, p: &[f64], u: f64) -> f64 {
        match family {
            FitFamily::PowerLaw => {
                if u < p[0] {
                    p[2] * (p[0] - u).powf(p[1])
                } else {
                    0.0
                }
            }
            FitFamily::Quadratic => (p[0] * u + p[1]) * u + p[2],
            FitFamily::Trigonometric => p[0] * (p[1] * u + p[2]).sin() + p[3],
        }
    }
}

/// Outcome of one simplex minimization.
#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder-Mead simplex with standard coefficients, restarted from the best
/// vertex until a restart no longer improves the minimum.
#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evaluations: usize,
    pub max_restarts: usize,
    /// Stop when the simplex value spread falls below this (relative) level.
    pub f_tolerance: f64,
    pub x_tolerance: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evaluations: 20_000,
            max_restarts: 12,
            f_tolerance: 1e-15,
            x_tolerance: 1e-12,
        }
    }
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64]) -> Minimum {
        let mut best = self.run(&f, x0, step);
        for _ in 0..self.max_restarts {
            let scale: Vec<f64> = best
                .x
                .iter()
                .zip(step)
                .map(|(x, s)| (0.05 * x.abs()).max(1e-3 * s.abs()).max(1e-9))
                .collect();
            let next = self.run(&f, &best.x, &scale);
            let evaluations = best.evaluations + next.evaluations;
            let improved = next.value < best.value - 1e-12 * best.value.abs() - 1e-300;
            if next.value <= best.value {
                best = Minimum {
                    evaluations,
                    ..next
                };
            } else {
                best.evaluations = evaluations;
            }
            if !improved {
                break;
            }
        }
        best
    }

    fn run(&self, f: &impl Fn(&[f64]) -> f64, x0: &[f64], step: &[f64]) -> Minimum {
        let n = x0.len();
        let eval = |x: &[f64]| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut x = x0.to_vec();
            x[i] += if step[i] != 0.0 { step[i] } else { 1e-3 };
            simplex.push(x);
        }
        let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
        let mut evaluations = n + 1;

        while evaluations < self.max_evaluations {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let (lo, hi) = (values[0], values[n]);
            let spread = (hi - lo).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if lo.is_finite()
                && spread <= self.f_tolerance * lo.abs() + 1e-300
                && size
                    <= self.x_tolerance
                        * (1.0 + simplex[0].iter().map(|v| v.abs()).fold(0.0, f64::max))
            {
                break;
            }
            if lo.is_finite() && hi.is_finite() && spread == 0.0 && size == 0.0 {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
                .collect();
            let toward = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = toward(-1.0);
            let fr = eval(&reflected);
            evaluations += 1;
            if fr < values[0] {
                let expanded = toward(-2.0);
                let fe = eval(&expanded);
                evaluations += 1;
                if fe < fr {
                    simplex[n] = expanded;
                    values[n] = fe;
                } else {
                    simplex[n] = reflected;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = reflected;
                values[n] = fr;
            } else {
                let (contracted, fc) = if fr < values[n] {
                    let c = toward(-0.5);
                    let v = eval(&c);
                    (c, v)
                } else {
                    let c = toward(0.5);
                    let v = eval(&c);
                    (c, v)
                };
                evaluations += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = contracted;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let shrunk: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, x)| b + 0.5 * (x - b))
                            .collect();
                        values[i] = eval(&shrunk);
                        simplex[i] = shrunk;
                    }
                    evaluations += n;
                }
            }
        }
        let best = (0..=n)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap();
        Minimum {
            x: simplex[best].clone(),
            value: values[best],
            evaluations,
        }
    }
}

/// Random internal-coordinate start inside boxes derived from the data.
fn random_start(family: FitFamily, ys: &[f64], us: &[f64], rng: &mut SimRng) -> Vec<f64> {
    let ymin = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if ymax > ymin {
        ymax - ymin
    } else {
        ymax.abs().max(1.0)
    };
    match family {
        FitFamily::PowerLaw => {
            // The cutoff lies beyond the last positive observation.
            let last_positive = us
                .iter()
                .zip(ys)
                .filter(|(_, y)| **y > 0.0)
                .map(|(u, _)| *u)
                .fold(-1.0, f64::max);
            let cutoff = rng.random_range(last_positive..last_positive + 1.5);
            let beta = rng.random_range(0.1..3.0);
            let scale = rng.random_range(0.0..2.0 * ymax.abs().max(1e-3));
            vec![cutoff, beta, scale]
        }
        FitFamily::Quadratic => vec![
            rng.random_range(-2.0 * range..2.0 * range),
            rng.random_range(-2.0 * range..2.0 * range),
            rng.random_range(ymin - range..ymax + range),
        ],
        FitFamily::Trigonometric => {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            vec![
                sign * rng.random_range(0.25 * range..2.0 * range),
                rng.random_range(0.2..6.0),
                rng.random_range(-PI..PI),
                rng.random_range(ymin..=ymax),
            ]
        }
    }
}

fn reference_start(family: FitFamily, xs: &[f64], ys: &[f64]) -> FitModel {
    match family {
        FitFamily::PowerLaw => {
            let xmin = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let ymax = ys.iter().copied().fold(0.0, f64::max);
            let base = (REFERENCE_CRITICAL_B - xmin).max(1e-3);
            FitModel::PowerLaw {
                b_cr: REFERENCE_CRITICAL_B,
                beta: REFERENCE_BETA,
                scale: ymax / base.powf(REFERENCE_BETA),
            }
        }
        FitFamily::Quadratic => REFERENCE_QUADRATIC,
        FitFamily::Trigonometric => REFERENCE_TRIG,
    }
}

/// Fits one family to `(xs, ys)` from the reference start plus `starts`
/// random starts drawn from `seed`.
pub fn fit_model(
    family: FitFamily,
    xs: &[f64],
    ys: &[f64],
    starts: usize,
    seed: u64,
) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < family.parameter_count() + 1 {
        return Err(Error::InvalidInput(format!(
            "{} fit needs at least {} points, got {}",
            family,
            family.parameter_count() + 1,
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("data must be finite".into()));
    }
    let frame = Frame::of(xs);
    let us: Vec<f64> = xs
        .iter()
        .map(|x| (x - frame.center) / frame.half_span)
        .collect();
    let objective = |p: &[f64]| -> f64 {
        us.iter()
            .zip(ys)
            .map(|(&u, &y)| {
                let r = y - Frame::eval(family, p, u);
                r * r
            })
            .sum()
    };

    let mut rng = rng_from_seed(derive_seed(seed, family as u64));
    let mut initial = vec![frame.encode(&reference_start(family, xs, ys))];
    initial.extend((0..starts).map(|_| random_start(family, ys, &us, &mut rng)));

    let optimizer = NelderMead::default();
    let mut best: Option<Minimum> = None;
    let mut evaluations = 0;
    for x0 in &initial {
        let step: Vec<f64> = x0.iter().map(|v| (0.1 * v.abs()).max(0.05)).collect();
        let m = optimizer.minimize(objective, x0, &step);
        evaluations += m.evaluations;
        if !m.value.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.ok_or_else(|| Error::FitFailure {
        family: family.name(),
        diagnostics: format!(
            "all {} starts diverged after {evaluations} evaluations",
            initial.len()
        ),
    })?;

    let model = frame.decode(family, &best.x).canonical();
    let yhat = evaluate_model(&model, xs);
    let goodness = match goodness_of_fit(ys, &yhat) {
        Ok(r) => Some(r),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(FitResult {
        model,
        rmse: rmse(ys, &yhat)?,
        goodness,
        sse: residual_ss(ys, &yhat),
        starts: initial.len(),
        evaluations,
    })
}

/// Fits every family and orders the successful fits by ascending RMSE;
/// failed families follow in their declaration order.
pub fn compare_fits(
    xs: &[f64],
    ys: &[f64],
    starts: usize,
    seed: u64,
) -> Vec<(FitFamily, Result<FitResult>)> {
    let mut rows: Vec<(FitFamily, Result<FitResult>)> = FitFamily::all()
        .into_iter()
        .map(|family| (family, fit_model(family, xs, ys, starts, seed)))
        .collect();
    rows.sort_by(|(_, a), (_, b)| match (a, b) {
        (Ok(a), Ok(b)) => a.rmse.total_cmp(&b.rmse),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => std::cmp::Ordering::Equal,
    });
    rows
}

/// Keeps only points with a positive response.
pub fn positive_only(xs: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    xs.iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| (*x, *y))
        .unzip()
}
