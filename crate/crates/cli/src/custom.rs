//! The `custom` problem: scalar `x' = f(x, y)`, `ε y' = g(x, y)` with `f`
//! and `g` given as expressions, e.g. `f = -x + y`, `g = x - y^3`.
//! Functions use the evaluator's names (`math::exp`, `math::sin`, ...).

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use mshom_core::benchmarks::BenchmarkCase;
use mshom_core::{DriverConfig, TwoScaleSystem, Vector};
use nalgebra::dvector;

use crate::CliError;

struct Expr(Node<DefaultNumericTypes>);

impl Expr {
    fn parse(key: &str, src: &str) -> Result<Self, CliError> {
        let node = build_operator_tree::<DefaultNumericTypes>(src).map_err(|e| CliError::Usage(format!("{key}: {e}")))?;
        if let Some(v) = node.iter_variable_identifiers().find(|v| *v != "x" && *v != "y") {
            return Err(CliError::Usage(format!("{key}: unknown variable '{v}' (only x and y are defined)")));
        }
        let expr = Expr(node);
        // type errors such as `x && y` only show up on evaluation
        expr.try_eval(0.5, 0.5)
            .map_err(|e| CliError::Usage(format!("{key}: '{src}' does not evaluate to a number ({e})")))?;
        Ok(expr)
    }

    fn try_eval(&self, x: f64, y: f64) -> evalexpr::EvalexprResult<f64, DefaultNumericTypes> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        ctx.set_value("x".into(), Value::Float(x))?;
        ctx.set_value("y".into(), Value::Float(y))?;
        self.0.eval_number_with_context(&ctx)
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.try_eval(x, y).unwrap_or(f64::NAN)
    }
}

pub struct CustomProblem<'a> {
    pub f: &'a str,
    pub g: &'a str,
    pub x0: f64,
    pub y0: f64,
    pub beta_hat: f64,
}

impl CustomProblem<'_> {
    /// Library-default run configuration; the reference step defaults to the
    /// coupled step.
    pub fn build(&self) -> Result<BenchmarkCase, CliError> {
        let f = Expr::parse("f", self.f)?;
        let g = Expr::parse("g", self.g)?;
        let system = TwoScaleSystem::new(
            "custom",
            1,
            1,
            move |x: &Vector, y: &Vector| dvector![f.eval(x[0], y[0])],
            move |x: &Vector, y: &Vector| dvector![g.eval(x[0], y[0])],
            self.beta_hat,
        )
        .map_err(|e| CliError::Usage(format!("beta_hat: {e}")))?;
        let driver = DriverConfig::default();
        Ok(BenchmarkCase {
            name: "custom",
            description: "user-supplied scalar f and g",
            system,
            x0: dvector![self.x0],
            y0: dvector![self.y0],
            reference_dt: driver.dt_coupled,
            driver,
            exact: None,
        })
    }
}
