//! The full adaptive loop: remesh, update, evolve, record.

use crate::error::{MasError, Result};
use crate::estimator::{adapted_mesh, EstimatorParams};
use crate::grid::{make_jump_initial, total_variation, GridSolution, Mesh, Problem};
use crate::remesh::{remesh_step, LambdaRuleParams, LambdaRuleReport, DEFAULT_CORRECTION_FACTOR, DEFAULT_MAX_ROUNDS};
use crate::scalar::Real;
use crate::theory::{tvi_bound_b1, TheoryParams};
use crate::schemes::{choose_dt, measure_evolution_ratio, step, SchemeKind, StepContext};

#[derive(Clone, Debug, PartialEq)]
pub struct MasConfig<T> {
    pub scheme: SchemeKind,
    pub n: usize,
    pub cfl: T,
    pub final_time: T,
    pub adaptive: bool,
    pub estimator: EstimatorParams<T>,
    pub correction_factor: T,
    pub max_correction_rounds: usize,
    pub remesh_repetitions: usize,
    /// Equidistribution passes applied to the initial mesh against the exact
    /// initial data before the first step.
    pub initial_adaptations: usize,
    pub max_steps: usize,
    /// Any `|u|` above this aborts the run as a blow-up.
    pub blowup_threshold: T,
}

impl<T: Real> MasConfig<T> {
    pub fn new(scheme: SchemeKind, n: usize, cfl: T, final_time: T, adaptive: bool) -> Self {
        Self {
            scheme,
            n,
            cfl,
            final_time,
            adaptive,
            estimator: EstimatorParams::default(),
            correction_factor: T::lit(DEFAULT_CORRECTION_FACTOR),
            max_correction_rounds: DEFAULT_MAX_ROUNDS,
            remesh_repetitions: 1,
            initial_adaptations: 0,
            max_steps: 2_000_000,
            blowup_threshold: T::lit(1e8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(MasError::Config(format!("need at least 10 nodes, got {}", self.n)));
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(MasError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.final_time >= T::zero()) || !self.final_time.is_finite() {
            return Err(MasError::Config(format!("final time must be >= 0, got {}", self.final_time)));
        }
        if self.remesh_repetitions == 0 {
            return Err(MasError::Config("remesh repetitions must be >= 1".into()));
        }
        if !(self.blowup_threshold > T::zero()) {
            return Err(MasError::Config("blow-up threshold must be > 0".into()));
        }
        EstimatorParams::new(self.estimator.floor, self.estimator.power)?.with_ceiling(self.estimator.ceiling)?;
        self.lambda_rule().map(|_| ())
    }

    pub fn evolution_constant(&self) -> T {
        self.scheme.evolution_constant(self.cfl).c
    }

    pub fn lambda_rule(&self) -> Result<LambdaRuleParams<T>> {
        LambdaRuleParams::new(
            self.evolution_constant(),
            self.correction_factor,
            self.max_correction_rounds,
        )
    }
}

/// Diagnostics of one loop iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    /// 1-based step index.
    pub step: usize,
    /// Time reached at the end of the step.
    pub time: T,
    pub dt: T,
    pub tv: T,
    /// `tv - TV(u_0)`.
    pub tvi: T,
    /// Lambda-rule report of the last remesh pass; empty on fixed meshes.
    pub lambda_report: LambdaRuleReport<T>,
    /// Largest correction round count over this step's remesh passes.
    pub correction_rounds: usize,
    pub evolution_ratio: T,
    /// Overshoot of the updated solution above the far-field high state.
    pub e1: T,
    /// Measured increase `a_n`.
    pub a_n: T,
    /// Largest equidistribution defect over this step's remesh passes.
    pub equidistribution_defect: T,
    pub min_gap: T,
}

impl<T: Real> StepRecord<T> {
    /// `max_A / (1 + 3C)`.
    pub fn observed_lambda(&self, evolution_constant: T) -> T {
        self.lambda_report.observed_lambda(evolution_constant)
    }

    /// `TV(u_0) + B1` at this step's observed lambda with `M = TV(u_0)`.
    /// Steps without extremes use the `lambda -> 0` limit `B1 = 2M`.
    pub fn tv_envelope(&self, tv0: T, evolution_constant: T) -> Result<T> {
        let lambda = self.observed_lambda(evolution_constant);
        if !(lambda > T::zero()) || !(tv0 > T::zero()) {
            return Ok(T::lit(3.0) * tv0);
        }
        let p = TheoryParams::new(lambda, evolution_constant, tv0, Vec::new())?;
        Ok(tv0 + tvi_bound_b1(&p)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput<T> {
    pub final_solution: GridSolution<T>,
    pub history: Vec<StepRecord<T>>,
    pub tv0: T,
}

/// Initial mesh and data: the uniform mesh, optionally equidistributed
/// against the exact jump a few times.
pub fn initial_solution<T: Real>(config: &MasConfig<T>, prob: &Problem<T>) -> Result<GridSolution<T>> {
    let init = prob.initial;
    let mut mesh = Mesh::uniform(prob.a, prob.b, config.n)?;
    let mut u = make_jump_initial(&mesh, init.x0, init.high, init.low)?;
    if config.adaptive {
        for _ in 0..config.initial_adaptations {
            mesh = adapted_mesh(&u, &config.estimator)?.0;
            u = make_jump_initial(&mesh, init.x0, init.high, init.low)?;
        }
    }
    Ok(u)
}

/// Rightmost node attaining the maximum inside the front, the smallest
/// window of nodes carrying at least 90% of the total variation.
pub fn shock_top<T: Real>(u: &GridSolution<T>) -> Option<usize> {
    let v = u.values();
    let diffs: Vec<T> = v.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let total = diffs.iter().copied().fold(T::zero(), |s, d| s + d);
    if !(total > T::lit(1e-14)) {
        return None;
    }
    let target = T::lit(0.9) * total;
    // Smallest run of consecutive differences whose sum reaches the target.
    let mut best: Option<(usize, usize)> = None;
    let mut sum = T::zero();
    let mut lo = 0;
    for (hi, &d) in diffs.iter().enumerate() {
        sum += d;
        while lo < hi && sum - diffs[lo] >= target {
            sum -= diffs[lo];
            lo += 1;
        }
        if sum >= target && best.is_none_or(|(l, h)| hi - lo < h - l) {
            best = Some((lo, hi));
        }
    }
    let (lo, hi) = best?;
    // nodes lo..=hi+1 span differences lo..=hi
    let mut top = lo;
    for i in lo..=hi + 1 {
        if v[i] >= v[top] {
            top = i;
        }
    }
    (top + 1 < v.len()).then_some(top)
}

/// `(u_top - high)_+` at the shock top.
pub fn measure_first_extreme<T: Real>(u: &GridSolution<T>, high: T) -> T {
    shock_top(u).map_or(T::zero(), |top| (u.values()[top] - high).max(T::zero()))
}

/// `a = C (|u_top - u_{top+1}| - 2 E1)_+`; zero without an identifiable front.
pub fn measure_increase_a<T: Real>(u_hat: &GridSolution<T>, e1: T, c: T) -> T {
    match shock_top(u_hat) {
        Some(top) => {
            let v = u_hat.values();
            let gap = (v[top] - v[top + 1]).abs();
            c * (gap - T::lit(2.0) * e1).max(T::zero())
        }
        None => T::zero(),
    }
}

pub fn run<T: Real>(config: &MasConfig<T>, prob: &Problem<T>) -> Result<RunOutput<T>> {
    let mut history = Vec::new();
    let tv0 = total_variation(&initial_solution(config, prob)?);
    let final_solution = run_with_observer(config, prob, |record, _| history.push(record.clone()))?;
    Ok(RunOutput {
        final_solution,
        history,
        tv0,
    })
}

/// Runs the loop, handing every step record and the solution it ends with
/// to `observer` before moving on. Records already observed survive a
/// failing run.
pub fn run_with_observer<T, F>(config: &MasConfig<T>, prob: &Problem<T>, mut observer: F) -> Result<GridSolution<T>>
where
    T: Real,
    F: FnMut(&StepRecord<T>, &GridSolution<T>),
{
    config.validate()?;
    let lambda_rule = config.lambda_rule()?;
    let c = lambda_rule.evolution_constant;
    let mut u = initial_solution(config, prob)?;
    let tv0 = total_variation(&u);
    let high = prob.initial.high;
    let mut remaining = config.final_time;
    let mut step_index = 0;
    let mut time = T::zero();
    let empty_report = LambdaRuleReport {
        a_values: Vec::new(),
        max_a: T::zero(),
        avg_a: T::zero(),
        corrections_applied: 0,
    };
    while remaining > T::zero() {
        if step_index >= config.max_steps {
            return Err(MasError::Config(format!(
                "step limit {} reached at t = {time}",
                config.max_steps
            )));
        }
        step_index += 1;

        let mut report = empty_report.clone();
        let mut rounds = 0;
        let mut defect = T::zero();
        if config.adaptive {
            for _ in 0..config.remesh_repetitions {
                let outcome = remesh_step(&u, &config.estimator, &lambda_rule)?;
                rounds = rounds.max(outcome.report.corrections_applied);
                defect = defect.max(outcome.defect);
                report = outcome.report;
                u = outcome.solution;
            }
        }

        let mut dt = choose_dt(&u, prob, config.cfl);
        if dt >= remaining {
            dt = remaining;
            remaining = T::zero();
        } else {
            remaining -= dt;
        }
        time = config.final_time - remaining;
        let ctx = StepContext::new(&u, dt, config.cfl)?;
        let next = step(config.scheme, &u, &ctx, prob)?;
        if next
            .values()
            .iter()
            .any(|v| !v.is_finite() || v.abs() > config.blowup_threshold)
        {
            return Err(MasError::BlowUp { step: step_index });
        }

        let e1 = measure_first_extreme(&u, high);
        let record = StepRecord {
            step: step_index,
            time,
            dt,
            tv: total_variation(&next),
            tvi: total_variation(&next) - tv0,
            lambda_report: report,
            correction_rounds: rounds,
            evolution_ratio: measure_evolution_ratio(&u, &next)?,
            e1,
            a_n: measure_increase_a(&u, e1, c),
            equidistribution_defect: defect,
            min_gap: next.mesh().min_gap(),
        };
        observer(&record, &next);
        u = next;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(values: &[f64]) -> GridSolution<f64> {
        let mesh = Mesh::<f64>::uniform(0.0, 1.0, values.len()).unwrap();
        GridSolution::<f64>::new(mesh, values.to_vec()).unwrap()
    }

    #[test]
    fn increase_examples() {
        let u = sol(&[1.0, 1.0, 1.0, 0.2, 0.0, 0.0]);
        assert_eq!(shock_top(&u), Some(2));
        assert!((measure_increase_a(&u, 0.1, 0.5) - 0.3).abs() < 1e-15);
        assert_eq!(measure_increase_a(&u, 0.4, 0.5), 0.0);
        assert!((measure_increase_a(&u, 0.0, 2.0) - 1.6).abs() < 1e-15);
        assert_eq!(measure_increase_a(&sol(&[0.3; 8]), 0.0, 1.0), 0.0);
    }

    #[test]
    fn overshoot_is_measured_at_the_top() {
        let u = sol(&[1.0, 1.0, 1.05, 0.6, 0.1, 0.0, 0.0]);
        assert_eq!(shock_top(&u), Some(2));
        assert!((measure_first_extreme(&u, 1.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn zero_time_returns_initial_condition() {
        let prob = Problem::transport(0.5, 0.0).unwrap();
        for k in SchemeKind::ALL {
            let cfg = MasConfig::new(k, 50, 0.5, 0.0, false);
            let out = run(&cfg, &prob).unwrap();
            assert!(out.history.is_empty());
            assert_eq!(out.final_solution, initial_solution(&cfg, &prob).unwrap());
        }
    }

    #[test]
    fn time_is_hit_exactly() {
        let prob = Problem::transport(0.3, 0.05).unwrap();
        let cfg = MasConfig::new(SchemeKind::RichtmyerLW, 40, 0.5, 0.05, false);
        let out = run(&cfg, &prob).unwrap();
        assert_eq!(out.history.last().unwrap().time, 0.05);
        let mesh = initial_solution(&cfg, &prob).unwrap().mesh().clone();
        assert_eq!(out.final_solution.mesh(), &mesh);
    }

    #[test]
    fn config_validation() {
        let prob = Problem::transport(0.5, 0.1).unwrap();
        let mut cfg = MasConfig::new(SchemeKind::Ftcs, 5, 0.5, 0.1, true);
        assert!(run(&cfg, &prob).is_err());
        cfg.n = 20;
        cfg.cfl = 1.5;
        assert!(run(&cfg, &prob).is_err());
    }

    #[test]
    fn envelope_examples() {
        let mut record: StepRecord<f64> = StepRecord {
            step: 1,
            time: 0.1,
            dt: 0.1,
            tv: 1.0,
            tvi: 0.0,
            lambda_report: LambdaRuleReport {
                a_values: Vec::new(),
                max_a: 0.0,
                avg_a: 0.0,
                corrections_applied: 0,
            },
            correction_rounds: 0,
            evolution_ratio: 0.0,
            e1: 0.0,
            a_n: 0.0,
            equidistribution_defect: 0.0,
            min_gap: 0.1,
        };
        assert_eq!(record.tv_envelope(1.0, 1.0).unwrap(), 3.0);
        // lambda = 0.5 / 4, B1 = 2 (1 - 0.125 - 0.25) / (1 - 0.5) = 2.5
        record.lambda_report.max_a = 0.5;
        assert!((record.tv_envelope(1.0, 1.0).unwrap() - 3.5).abs() < 1e-14);
    }
}
