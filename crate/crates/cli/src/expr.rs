//! Phase and boundary expressions in the variables `x1 … xn`.

use std::cell::RefCell;
use std::sync::Arc;

use lagmc_core::phase::ScalarFn;
use meval::{Context, ContextProvider, Expr};

struct Vars<'a>(&'a [f64]);

impl ContextProvider for Vars<'_> {
    fn get_var(&self, name: &str) -> Option<f64> {
        let i: usize = name.strip_prefix('x')?.parse().ok()?;
        self.0.get(i.checked_sub(1)?).copied()
    }
}

thread_local! {
    static BUILTINS: RefCell<Context<'static>> = RefCell::new(Context::new());
}

fn eval(e: &Expr, x: &[f64]) -> Result<f64, meval::Error> {
    BUILTINS.with(|b| e.eval_with_context((Vars(x), &*b.borrow())))
}

/// Compiles `text`, checking that it evaluates at the origin of `ℝⁿ`.
pub fn compile(text: &str, n: usize) -> Result<ScalarFn, String> {
    let e: Expr = text.parse().map_err(|err: meval::Error| err.to_string())?;
    eval(&e, &vec![0.0; n]).map_err(|err| err.to_string())?;
    let e = Arc::new(e);
    Ok(Arc::new(move |x: &[f64]| eval(&e, x).unwrap_or(f64::NAN)))
}
