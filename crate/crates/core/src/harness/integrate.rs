//! Fixed-step classical Runge-Kutta integration of an autonomous system
//! whose right-hand side is a compiled program.

use crate::codegen::{Lir, Machine};
use crate::inputs::{bind_inputs, InputError, Inputs};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError {
    #[error("no argument named `{0}`")]
    UnknownState(String),
    #[error("state `{name}` has length {state}, program returns {ret}")]
    Shape {
        name: String,
        state: usize,
        ret: usize,
    },
    #[error("step count must be positive for a non-empty span")]
    NoSteps,
    #[error("non-finite state at step {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Input(#[from] InputError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("a trajectory holds at least the initial state")
    }
}

/// Integrates `x' = f(x)` where `x` is the argument `state` of the program
/// and every other argument is taken from `fixed`.
pub fn integrate(
    lir: &Lir,
    state: &str,
    fixed: &Inputs,
    initial: &[f64],
    t_span: (f64, f64),
    steps: usize,
) -> Result<Trajectory, IntegrateError> {
    let pos = lir
        .args
        .iter()
        .position(|&a| lir.vars[a].name == state)
        .ok_or_else(|| IntegrateError::UnknownState(state.to_string()))?;
    let n = lir.vars[lir.args[pos]].size;
    if n != initial.len() || n != lir.ret_len() {
        return Err(IntegrateError::Shape {
            name: state.to_string(),
            state: initial.len(),
            ret: lir.ret_len(),
        });
    }
    let mut inputs = fixed.clone();
    inputs.insert(state.to_string(), initial.to_vec());
    let mut args = bind_inputs(lir, &inputs)?;

    let (t0, t1) = t_span;
    let mut out = Trajectory {
        times: vec![t0],
        states: vec![initial.to_vec()],
    };
    if t0 == t1 {
        return Ok(out);
    }
    if steps == 0 {
        return Err(IntegrateError::NoSteps);
    }
    let h = (t1 - t0) / steps as f64;
    let mut m = Machine::new(lir);
    let mut f = |x: &[f64]| -> Vec<f64> {
        args[pos].copy_from_slice(x);
        let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
        m.run_args(&refs)
    };
    let axpy = |x: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        x.iter().zip(k).map(|(x, k)| x + a * k).collect()
    };
    let mut x = initial.to_vec();
    for step in 1..=steps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, h / 2.0, &k1));
        let k3 = f(&axpy(&x, h / 2.0, &k2));
        let k4 = f(&axpy(&x, h, &k3));
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite(step));
        }
        out.times.push(t0 + h * step as f64);
        out.states.push(x.clone());
    }
    Ok(out)
}

/// State for a system laid out as `n` state components, an `n x n` block of
/// derivatives against the initial state (row = state component) and
/// `extra` further derivative columns stored component-major. The initial
/// block is the identity and the extra columns are zero.
pub fn variational_initial(state: &[f64], extra: usize) -> Vec<f64> {
    let n = state.len();
    let mut x = state.to_vec();
    x.extend((0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }));
    x.resize(x.len() + n * extra, 0.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{compile, CompileOptions};

    fn spacecraft() -> crate::Compilation {
        compile(
            include_str!("../../corpus/spacecraft.landau"),
            &CompileOptions::default(),
        )
        .unwrap()
    }

    fn gm(v: f64) -> Inputs {
        [("GM".to_string(), vec![v])].into_iter().collect()
    }

    #[test]
    fn zero_span_is_initial_state() {
        let c = spacecraft();
        let x0 = variational_initial(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], 1);
        let t = integrate(&c.lir, "x", &gm(1.0), &x0, (0.0, 0.0), 100).unwrap();
        assert_eq!(t.states, vec![x0]);
    }

    #[test]
    fn variational_seed_layout() {
        let x = variational_initial(&[1.0, 2.0], 1);
        assert_eq!(x, vec![1.0, 2.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn collision_reports_step() {
        let c = spacecraft();
        let x0 = variational_initial(&[0.0; 6], 1);
        let err = integrate(&c.lir, "x", &gm(1.0), &x0, (0.0, 1.0), 10).unwrap_err();
        assert_eq!(err, IntegrateError::NonFinite(1));
    }

    #[test]
    fn wrong_state_name() {
        let c = spacecraft();
        let err = integrate(&c.lir, "y", &gm(1.0), &[0.0; 48], (0.0, 1.0), 10).unwrap_err();
        assert_eq!(err, IntegrateError::UnknownState("y".into()));
    }
}
