use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_labeled, forward_into, gradient_unchecked, sse_unchecked, NetworkParams};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::genome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMethod {
    /// Levenberg-Marquardt.
    #[default]
    Lm,
    /// Plain full-batch gradient descent.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: TrainMethod,
    pub learning_rate: f64,
    /// Training stops once the mean squared error reaches this value.
    pub goal_mse: f64,
    pub max_iterations: usize,
    pub lm_damping_init: f64,
    pub lm_damping_factor: f64,
    /// Damping increases allowed within one iteration before giving up.
    pub lm_max_retries: usize,
    pub lm_damping_max: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: TrainMethod::Lm,
            learning_rate: 0.001,
            goal_mse: 1e-5,
            max_iterations: 1000,
            lm_damping_init: 1e-3,
            lm_damping_factor: 10.0,
            lm_max_retries: 30,
            lm_damping_max: 1e10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.goal_mse > 0.0) {
            return bad("goal_mse must be positive");
        }
        if !(self.lm_damping_init > 0.0) {
            return bad("lm_damping_init must be positive");
        }
        if !(self.lm_damping_factor > 1.0) {
            return bad("lm_damping_factor must exceed 1");
        }
        if !(self.lm_damping_max >= self.lm_damping_init) {
            return bad("lm_damping_max must be at least lm_damping_init");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub sse: f64,
    pub mse: f64,
}

/// Error after each training iteration, starting with the initial network
/// at iteration 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    fn push(&mut self, iteration: usize, sse: f64, residuals: usize) {
        self.points.push(CurvePoint {
            iteration,
            sse,
            mse: sse / residuals as f64,
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Option<&CurvePoint> {
        self.points.first()
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CurvePoint> {
        self.points.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Goal,
    MaxIterations,
    /// Levenberg-Marquardt could not find a descending step before the
    /// damping limit.
    DampingLimit,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::Goal => "goal",
            StopReason::MaxIterations => "max_iter",
            StopReason::DampingLimit => "damping_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub curve: ErrorCurve,
    pub stop_reason: StopReason,
}

/// Runs the trainer selected by `cfg.method`.
pub fn train(params: NetworkParams, data: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    match cfg.method {
        TrainMethod::Lm => train_lm(params, data, cfg),
        TrainMethod::Gd => train_gd(params, data, cfg),
    }
}

fn prepare(params: &NetworkParams, data: &[Sample], cfg: &TrainConfig) -> Result<usize> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty);
    }
    check_labeled(params, data)?;
    Ok(data.len() * params.shape().outputs)
}

pub fn train_gd(
    mut params: NetworkParams,
    data: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let residuals = prepare(&params, data, cfg)?;
    let mut curve = ErrorCurve::default();
    let sse = sse_unchecked(&params, data);
    if !sse.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    curve.push(0, sse, residuals);
    if sse / residuals as f64 <= cfg.goal_mse {
        return Ok(TrainOutcome {
            params,
            curve,
            stop_reason: StopReason::Goal,
        });
    }
    for iteration in 1..=cfg.max_iterations {
        let grad = gradient_unchecked(&params, data);
        for (p, g) in params.iter_mut().zip(grad.iter()) {
            *p -= cfg.learning_rate * g;
        }
        let sse = sse_unchecked(&params, data);
        if !sse.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        curve.push(iteration, sse, residuals);
        if sse / residuals as f64 <= cfg.goal_mse {
            return Ok(TrainOutcome {
                params,
                curve,
                stop_reason: StopReason::Goal,
            });
        }
    }
    Ok(TrainOutcome {
        params,
        curve,
        stop_reason: StopReason::MaxIterations,
    })
}

/// Residuals `r = y_hat - y` (sample-major, then output) and their Jacobian
/// with columns in chromosome order.
pub fn residual_jacobian(
    params: &NetworkParams,
    data: &[Sample],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_labeled(params, data)?;
    Ok(jacobian_unchecked(params, data))
}

fn jacobian_unchecked(params: &NetworkParams, data: &[Sample]) -> (DMatrix<f64>, DVector<f64>) {
    let s = params.shape();
    let (n, q, m) = (s.inputs, s.hidden, s.outputs);
    let rows = data.len() * m;
    let gamma_off = q * n;
    let v_off = gamma_off + q;
    let h_off = v_off + m * q;
    let mut jac = DMatrix::zeros(rows, s.parameter_count());
    let mut r = DVector::zeros(rows);
    let mut hidden = vec![0.0; q];
    let mut output = vec![0.0; m];
    for (si, sample) in data.iter().enumerate() {
        let x = &sample.features;
        forward_into(params, x, &mut hidden, &mut output);
        for k in 0..m {
            let row = si * m + k;
            r[row] = output[k] - sample.targets[k];
            jac[(row, h_off + k)] = 1.0;
            for j in 0..q {
                let a = hidden[j];
                jac[(row, v_off + k * q + j)] = a;
                let d = params.v_at(k, j) * (1.0 - a * a);
                jac[(row, gamma_off + j)] = d;
                for (i, xi) in x.iter().enumerate() {
                    jac[(row, j * n + i)] = d * xi;
                }
            }
        }
    }
    (jac, r)
}

/// Solves `(J'J + mu I) delta = -J'r`. With fewer residuals than parameters
/// the equivalent `delta = -J' (J J' + mu I)^-1 r` is solved instead, which
/// only needs a residual-sized factorisation.
pub(crate) fn damped_step(jac: &DMatrix<f64>, r: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let (rows, cols) = jac.shape();
    if rows < cols {
        let mut a = jac * jac.transpose();
        for i in 0..rows {
            a[(i, i)] += mu;
        }
        let y = a.cholesky()?.solve(r);
        Some(-(jac.transpose() * y))
    } else {
        let mut a = jac.tr_mul(jac);
        for i in 0..cols {
            a[(i, i)] += mu;
        }
        let g = jac.tr_mul(r);
        Some(-a.cholesky()?.solve(&g))
    }
}

pub fn train_lm(params: NetworkParams, data: &[Sample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let residuals = prepare(&params, data, cfg)?;
    let shape = params.shape();
    let mut curve = ErrorCurve::default();
    let mut sse = sse_unchecked(&params, data);
    if !sse.is_finite() {
        return Err(Error::NonFiniteLoss { iteration: 0 });
    }
    curve.push(0, sse, residuals);
    let mut params = params;
    if sse / residuals as f64 <= cfg.goal_mse {
        return Ok(TrainOutcome {
            params,
            curve,
            stop_reason: StopReason::Goal,
        });
    }

    let mut genes = genome::encode(&params)?.genes;
    let mut mu = cfg.lm_damping_init;
    for iteration in 1..=cfg.max_iterations {
        let (jac, r) = jacobian_unchecked(&params, data);
        let mut accepted = None;
        let mut solved_any = false;
        for _ in 0..=cfg.lm_max_retries {
            if let Some(delta) = damped_step(&jac, &r, mu) {
                solved_any = true;
                let trial: Vec<f64> = genes.iter().zip(delta.iter()).map(|(g, d)| g + d).collect();
                if trial.iter().all(|v| v.is_finite()) {
                    let candidate = genome::decode_unchecked(&trial, shape);
                    let trial_sse = sse_unchecked(&candidate, data);
                    if trial_sse.is_finite() && trial_sse < sse {
                        accepted = Some((trial, candidate, trial_sse));
                        break;
                    }
                }
            }
            mu *= cfg.lm_damping_factor;
            if mu > cfg.lm_damping_max {
                break;
            }
        }
        match accepted {
            Some((trial, candidate, trial_sse)) => {
                genes = trial;
                params = candidate;
                sse = trial_sse;
                mu = (mu / cfg.lm_damping_factor).max(f64::MIN_POSITIVE);
                curve.push(iteration, sse, residuals);
                if sse / residuals as f64 <= cfg.goal_mse {
                    return Ok(TrainOutcome {
                        params,
                        curve,
                        stop_reason: StopReason::Goal,
                    });
                }
            }
            None if !solved_any => {
                return Err(Error::SingularSystem {
                    retries: cfg.lm_max_retries,
                });
            }
            None => {
                return Ok(TrainOutcome {
                    params,
                    curve,
                    stop_reason: StopReason::DampingLimit,
                });
            }
        }
    }
    Ok(TrainOutcome {
        params,
        curve,
        stop_reason: StopReason::MaxIterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, gradient, NetworkShape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bias_only(h: f64) -> NetworkParams {
        let mut p = NetworkParams::zeros(NetworkShape::new(1, 1, 1).unwrap());
        p.h_mut()[0] = h;
        p
    }

    fn random_problem(
        seed: u64,
        shape: NetworkShape,
        samples: usize,
    ) -> (NetworkParams, Vec<Sample>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let genes: Vec<f64> = (0..shape.parameter_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let p = genome::decode(&genome::Chromosome::new(genes), shape).unwrap();
        let data = (0..samples)
            .map(|_| {
                let x = (0..shape.inputs)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect();
                let y = (0..shape.outputs)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect();
                Sample::with_targets(x, y)
            })
            .collect();
        (p, data)
    }

    #[test]
    fn gd_stops_immediately_at_goal() {
        let out = train_gd(
            bias_only(0.5),
            &[Sample::labeled(vec![1.0], 0.5)],
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(out.curve.len(), 1);
        assert_eq!(out.stop_reason, StopReason::Goal);
    }

    #[test]
    fn gd_zero_rate_leaves_params() {
        let start = bias_only(0.1);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_iterations: 5,
            ..Default::default()
        };
        let out = train_gd(start.clone(), &[Sample::labeled(vec![1.0], 0.9)], &cfg).unwrap();
        assert_eq!(out.params, start);
        assert_eq!(out.stop_reason, StopReason::MaxIterations);
        assert_eq!(out.curve.len(), 6);
    }

    #[test]
    fn gd_matches_closed_form_recurrence() {
        // Only h moves: e_{t+1} = (1 - 2 lr) e_t, so SSE_t = (1 - 2 lr)^(2t) e_0^2.
        let lr = 0.05;
        let cfg = TrainConfig {
            learning_rate: lr,
            max_iterations: 40,
            goal_mse: 1e-30,
            ..Default::default()
        };
        let out = train_gd(bias_only(0.2), &[Sample::labeled(vec![0.7], 0.9)], &cfg).unwrap();
        let e0: f64 = 0.2 - 0.9;
        for p in out.curve.iter() {
            let expected = (1.0 - 2.0 * lr).powi(2 * p.iteration as i32) * e0 * e0;
            assert!(
                (p.sse - expected).abs() <= 1e-12 * expected.max(1e-300),
                "{p:?} vs {expected}"
            );
        }
        assert!(out.curve.points.windows(2).all(|w| w[1].sse < w[0].sse));
    }

    #[test]
    fn gd_never_increases_on_small_rate() {
        let (p, data) = random_problem(3, NetworkShape::new(4, 3, 1).unwrap(), 6);
        let cfg = TrainConfig {
            method: TrainMethod::Gd,
            max_iterations: 200,
            ..Default::default()
        };
        let out = train(p, &data, &cfg).unwrap();
        assert!(out.curve.points.windows(2).all(|w| w[1].sse <= w[0].sse));
    }

    #[test]
    fn gd_reports_nonfinite_loss() {
        let cfg = TrainConfig {
            learning_rate: 1e200,
            max_iterations: 10,
            ..Default::default()
        };
        let err = train_gd(bias_only(0.0), &[Sample::labeled(vec![1.0], 1e200)], &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { .. }));
    }

    #[test]
    fn lm_perfect_fit_stops_at_goal() {
        let out = train_lm(
            bias_only(0.3),
            &[Sample::labeled(vec![0.0], 0.3)],
            &TrainConfig::default(),
        )
        .unwrap();
        assert_eq!(out.stop_reason, StopReason::Goal);
        assert_eq!(out.curve.len(), 1);
    }

    #[test]
    fn lm_accepted_steps_strictly_decrease() {
        for seed in 0..5 {
            let (p, data) = random_problem(seed, NetworkShape::new(3, 4, 2).unwrap(), 8);
            let cfg = TrainConfig {
                max_iterations: 50,
                goal_mse: 1e-12,
                ..Default::default()
            };
            let out = train_lm(p, &data, &cfg).unwrap();
            assert!(out.curve.points.windows(2).all(|w| w[1].sse < w[0].sse));
            assert!(out
                .curve
                .points
                .windows(2)
                .all(|w| w[1].iteration == w[0].iteration + 1));
        }
    }

    #[test]
    fn lm_matches_direct_least_squares() {
        // With the hidden unit held at its generating weights the residual is
        // linear in (V, h); the direct least-squares fit of [A, 1] against y is
        // exact, and LM started at V = h = 0 should land on the same outputs.
        let (w0, g0) = (0.8, -0.2);
        let xs: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let a: Vec<f64> = xs.iter().map(|x| (w0 * x + g0).tanh()).collect();
        let data: Vec<Sample> = xs
            .iter()
            .zip(&a)
            .map(|(&x, &ai)| Sample::labeled(vec![x], 0.3 + 0.5 * ai))
            .collect();

        let n = a.len() as f64;
        let (sa, sy) = (
            a.iter().sum::<f64>(),
            data.iter().map(|s| s.targets[0]).sum::<f64>(),
        );
        let saa: f64 = a.iter().map(|v| v * v).sum();
        let say: f64 = a.iter().zip(&data).map(|(v, s)| v * s.targets[0]).sum();
        let slope = (n * say - sa * sy) / (n * saa - sa * sa);
        let icept = (sy - slope * sa) / n;

        let start = NetworkParams::new(
            NetworkShape::new(1, 1, 1).unwrap(),
            vec![w0],
            vec![g0],
            vec![0.0],
            vec![0.0],
        )
        .unwrap();
        let cfg = TrainConfig {
            goal_mse: 1e-20,
            max_iterations: 50,
            ..Default::default()
        };
        let out = train_lm(start, &data, &cfg).unwrap();
        assert_eq!(out.stop_reason, StopReason::Goal);
        assert!(
            out.curve.len() <= 11,
            "took {} iterations",
            out.curve.len() - 1
        );
        for (&x, &ai) in xs.iter().zip(&a) {
            let y = forward(&out.params, &[x]).unwrap().output[0];
            assert!((y - (icept + slope * ai)).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobian_transpose_residual_is_half_gradient() {
        for seed in 0..10 {
            let shape = NetworkShape::new(
                1 + seed as usize % 4,
                1 + seed as usize % 3,
                1 + seed as usize % 2,
            )
            .unwrap();
            let (p, data) = random_problem(seed, shape, 5);
            let (jac, r) = residual_jacobian(&p, &data).unwrap();
            let jtr = jac.tr_mul(&r);
            let grad = gradient(&p, &data).unwrap();
            for (a, g) in jtr.iter().zip(grad.iter()) {
                assert!((a - 0.5 * g).abs() <= 1e-10, "{a} vs {}", 0.5 * g);
            }
        }
    }

    #[test]
    fn dual_step_matches_primal() {
        let (p, data) = random_problem(11, NetworkShape::new(3, 2, 1).unwrap(), 4);
        let (jac, r) = residual_jacobian(&p, &data).unwrap();
        assert!(jac.nrows() < jac.ncols());
        let dual = damped_step(&jac, &r, 0.01).unwrap();
        let mut a = jac.tr_mul(&jac);
        for i in 0..a.ncols() {
            a[(i, i)] += 0.01;
        }
        let primal = -a.cholesky().unwrap().solve(&jac.tr_mul(&r));
        assert!((dual - primal).amax() < 1e-10);
    }

    #[test]
    fn invalid_config_rejected() {
        let data = [Sample::labeled(vec![0.0], 0.0)];
        let bad = TrainConfig {
            goal_mse: 0.0,
            ..Default::default()
        };
        assert!(train_lm(bias_only(0.0), &data, &bad).is_err());
        let bad = TrainConfig {
            lm_damping_factor: 1.0,
            ..Default::default()
        };
        assert!(train_lm(bias_only(0.0), &data, &bad).is_err());
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(train_gd(bias_only(0.0), &data, &bad).is_err());
    }
}
