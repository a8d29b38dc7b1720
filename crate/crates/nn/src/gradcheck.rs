//! Reverse-mode vs central-finite-difference verification over a random
//! subset of parameter elements. Run in f64 for meaningful tolerances.

use crate::layers::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub worst_param: String,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// `f` builds the graph from injected parameter vars and returns a scalar
/// loss. Samples `samples_per_param` elements of every trainable parameter
/// (frozen parameters are excluded) and compares reverse-mode gradients
/// against central differences with step `h`.
pub fn gradient_check<S: Scalar, F>(
    store: &mut ParamStore<S>,
    f: F,
    samples_per_param: usize,
    h: f64,
    rng: &mut impl Rng,
) -> GradCheckReport
where
    F: Fn(&mut Tape<S>, &[Var]) -> Var,
{
    // Reverse-mode gradients at the current parameters.
    let mut tape = Tape::new();
    let vars = store.inject(&mut tape);
    let loss = f(&mut tape, &vars);
    assert_eq!(tape.data(loss).len(), 1, "gradient_check needs a scalar loss");
    tape.backward(loss);
    let grads = store.collect_grads(&tape, &vars);

    let eval = |store: &ParamStore<S>| -> f64 {
        let mut tape = Tape::new();
        let vars = store.inject(&mut tape);
        let loss = f(&mut tape, &vars);
        tape.data(loss)[0].as_f64()
    };

    let mut max_rel_err: f64 = 0.0;
    let mut checked = 0;
    let mut worst_param = String::new();
    for idx in 0..store.len() {
        let id = ParamId(idx);
        if !store.is_trainable(id) {
            continue;
        }
        let len = store.tensor(id).len();
        for _ in 0..samples_per_param.min(len) {
            let elem = rng.random_range(0..len);
            let original = store.tensor(id).data[elem];
            store.tensor_mut(id).data[elem] = original + S::from_f64(h);
            let plus = eval(store);
            store.tensor_mut(id).data[elem] = original - S::from_f64(h);
            let minus = eval(store);
            store.tensor_mut(id).data[elem] = original;
            let fd = (plus - minus) / (2.0 * h);
            let ad = grads[idx][elem].as_f64();
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-6);
            checked += 1;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_param = format!("{}[{}]", store.name(id), elem);
            }
        }
    }
    GradCheckReport { max_rel_err, checked, worst_param }
}
