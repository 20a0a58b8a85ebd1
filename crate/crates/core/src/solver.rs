//! Incremental Newton–Raphson over a linear load ramp with step bisection.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::Assembler;
use crate::element::ElementMaterial;
use crate::error::SolverError;
use crate::linsolve::LdlFactor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    pub tol_rel: f64,
    /// Absolute residual floor; derived from the stiffest modulus and the
    /// model size when absent.
    pub tol_abs: Option<f64>,
    pub max_iter: usize,
    pub max_bisections: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_rel: 1e-8,
            tol_abs: None,
            max_iter: 20,
            max_bisections: 10,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol_rel > 0.0) || self.tol_abs.is_some_and(|t| !(t > 0.0)) {
            return Err("tolerances must be positive".into());
        }
        if self.max_iter == 0 {
            return Err("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    pub n_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Running count of accepted increments, starting at 1.
    pub step: usize,
    /// Scheduled step this increment belongs to.
    pub load_step: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    /// Bisection depth at which the increment was accepted.
    pub bisections: usize,
    pub min_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionEvent {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub steps: Vec<StepRecord>,
    pub bisections: Vec<BisectionEvent>,
    pub final_lambda: f64,
    pub completed: bool,
    /// Why the run stopped early; the last accepted state is `final_lambda`.
    pub failure: Option<String>,
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Full displacement vector, `3·node + component`.
    pub u: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

pub struct Solver {
    pub assembler: Assembler,
    pub settings: NewtonSettings,
    tol_abs: f64,
    factor: LdlFactor,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Solver {
    pub fn new(assembler: Assembler, settings: NewtonSettings) -> Result<Self, SolverError> {
        settings.validate().map_err(SolverError::Setup)?;
        let tol_abs = settings.tol_abs.unwrap_or_else(|| default_tol_abs(&assembler));
        let order = assembler.fill_reducing_order();
        let factor = LdlFactor::symbolic(assembler.pattern(), order)?;
        log::debug!(
            "{} free dofs, {} nonzeros in K, {} in L",
            assembler.dofs.n_free(),
            assembler.pattern().nnz(),
            factor.factor_nnz()
        );
        Ok(Solver {
            assembler,
            settings,
            tol_abs,
            factor,
        })
    }

    pub fn tol_abs(&self) -> f64 {
        self.tol_abs
    }

    pub fn initial_state(&self) -> SolverState {
        SolverState {
            u: self.assembler.prescribed_displacements(0.0),
            lambda: 0.0,
        }
    }

    /// Newton iteration from `state` to equilibrium at `lambda`. The first
    /// iteration moves the constrained DOFs to their new values and carries
    /// their effect on the free DOFs through `K_fc`.
    pub fn newton_solve_step(&mut self, state: &SolverState, lambda: f64) -> Result<StepOutcome, SolverError> {
        let asm = &self.assembler;
        let mut u = state.u.clone();
        let target = asm.prescribed_displacements(lambda);
        let mut increment = vec![0.0; u.len()];
        let mut moves = false;
        for &d in &asm.dofs.constrained {
            increment[d] = target[d] - u[d];
            moves |= increment[d] != 0.0;
        }
        let sys = asm.assemble(&u, lambda, true, moves.then_some(increment.as_slice()))?;
        let mut rhs: Vec<f64> = sys.residual.iter().zip(&sys.coupling).map(|(r, c)| -(r + c)).collect();
        let r0 = norm(&rhs);
        let mut residuals = vec![r0];
        if !r0.is_finite() {
            return Err(SolverError::NonFinite);
        }
        if r0 <= self.tol_abs && !moves {
            return Ok(StepOutcome {
                u,
                iterations: 0,
                residuals,
            });
        }
        let tol = self.tol_abs.max(self.settings.tol_rel * r0);
        let mut k = sys.k.expect("tangent requested");

        for iteration in 1..=self.settings.max_iter {
            self.factor.factor(&k)?;
            let du = self.factor.solve(&rhs);
            for (f, &d) in asm.dofs.free.iter().enumerate() {
                u[d] += du[f];
            }
            if iteration == 1 {
                for &d in &asm.dofs.constrained {
                    u[d] = target[d];
                }
            }
            let sys = asm.assemble(&u, lambda, false, None)?;
            let r = norm(&sys.residual);
            residuals.push(r);
            log::trace!("lambda {lambda:.6} iteration {iteration}: |R| = {r:e}");
            if !r.is_finite() {
                return Err(SolverError::NonFinite);
            }
            if r <= tol {
                return Ok(StepOutcome {
                    u,
                    iterations: iteration,
                    residuals,
                });
            }
            if iteration == self.settings.max_iter || r > 1e10 * r0.max(self.tol_abs) {
                break;
            }
            let sys = asm.assemble(&u, lambda, true, None)?;
            rhs = sys.residual.iter().map(|r| -r).collect();
            k = sys.k.expect("tangent requested");
        }
        Err(SolverError::NonConvergence {
            iterations: residuals.len() - 1,
            residual: *residuals.last().unwrap(),
        })
    }

    /// Advances λ from 0 to 1 in `schedule.n_steps` equal increments,
    /// halving an increment on recoverable failures. `on_step` sees every
    /// accepted state. An exhausted bisection budget ends the run with
    /// `completed = false` and the last accepted state.
    pub fn run_schedule<F>(&mut self, schedule: LoadSchedule, mut on_step: F) -> (SolverState, SolveReport)
    where
        F: FnMut(&Assembler, &StepRecord, &SolverState),
    {
        let started = Instant::now();
        let mut report = SolveReport::default();
        let mut state = self.initial_state();
        let n = schedule.n_steps.max(1);
        let full = 1.0 / n as f64;
        'steps: for k in 1..=n {
            let target = if k == n { 1.0 } else { k as f64 / n as f64 };
            let mut sub = full;
            let mut depth = 0usize;
            while state.lambda < target {
                let trial = if target - state.lambda <= sub * (1.0 + 1e-9) {
                    target
                } else {
                    state.lambda + sub
                };
                match self.newton_solve_step(&state, trial) {
                    Ok(out) => {
                        state = SolverState { u: out.u, lambda: trial };
                        let min_j = self
                            .assembler
                            .jacobians(&state.u)
                            .iter()
                            .flatten()
                            .fold(f64::INFINITY, |m, &j| m.min(j));
                        let record = StepRecord {
                            step: report.steps.len() + 1,
                            load_step: k,
                            lambda: trial,
                            iterations: out.iterations,
                            residuals: out.residuals,
                            bisections: depth,
                            min_j,
                        };
                        on_step(&self.assembler, &record, &state);
                        report.steps.push(record);
                        if depth > 0 {
                            depth -= 1;
                            sub *= 2.0;
                        }
                    }
                    Err(e) if e.is_recoverable() && depth < self.settings.max_bisections => {
                        log::info!("bisecting increment {:.6} -> {:.6}: {e}", state.lambda, trial);
                        report.bisections.push(BisectionEvent {
                            lambda_from: state.lambda,
                            lambda_to: trial,
                            reason: e.to_string(),
                        });
                        sub *= 0.5;
                        depth += 1;
                    }
                    Err(e) => {
                        report.failure = Some(format!("stopped at lambda = {}: {e}", state.lambda));
                        break 'steps;
                    }
                }
            }
        }
        report.final_lambda = state.lambda;
        report.completed = report.failure.is_none();
        report.wall_time_s = started.elapsed().as_secs_f64();
        (state, report)
    }
}

fn default_tol_abs(asm: &Assembler) -> f64 {
    let modulus = asm
        .problem
        .materials
        .by_tag
        .values()
        .map(|m| match m {
            ElementMaterial::Solid(p) => p.bulk.max(p.shear),
            ElementMaterial::ThirdMedium(p) => p.bulk.max(p.shear),
        })
        .fold(0.0, f64::max);
    let (lo, hi) = asm.problem.mesh.bounds();
    let l2: f64 = (0..3).map(|k| (hi[k] - lo[k]).powi(2)).sum();
    1e-12 * modulus.max(1e-300) * l2.max(1e-300)
}
