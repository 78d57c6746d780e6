//! Deterministic numerics for the flow / autocorrelation curves.
//!
//! Both tree models reduce to the integral transform
//!
//! ```text
//! chi(rho)(T) = int_0^inf e^{-s} ds int_0^T e^{t-T} dt f(rho(t + s))
//! ```
//!
//! whose maximal fixed point is reached by monotone iteration from
//! `1 - e^{-T}`. Fixed points solve `rho'' = rho - f(rho)`, a Newtonian
//! particle in the potential `V` with `V' = f(rho) - rho`; the non-trivial
//! solution is the heteroclinic orbit at energy `V(1)`.
//!
//! The polynomial `f` is stored in the variable `u = 1 - rho`, where it reads
//! `f(1 - u) = sum_m a_m u^m`. That form gives exact tail integrals for the
//! exponential tail model and a cancellation-free `V(1) - V(rho)`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Slack for domain and monotonicity checks.
pub const DOMAIN_SLACK: f64 = 1e-9;

/// Below this distance to 1 the heteroclinic solver switches to the
/// linearized exponential approach.
const LINEARIZE_BELOW: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Coalescing,
    Voter,
    General,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Coalescing => "coalescing",
            ModelKind::Voter => "voter",
            ModelKind::General => "general",
        }
    }
}

/// Branching number plus the polynomial `f` that distinguishes the models.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowModel {
    kind: ModelKind,
    branching: u32,
    /// `a_m` with `f(1 - u) = sum_m a_m u^m`.
    u_coeffs: Vec<f64>,
}

impl FlowModel {
    /// Coalescing particles on the binary tree: `f(rho) = 1 - (1 - rho)^2`.
    pub fn coalescing() -> Self {
        let mut model = Self::coalescing_with_branching(2);
        model.kind = ModelKind::Coalescing;
        model
    }

    fn coalescing_with_branching(d: u32) -> Self {
        let mut u_coeffs = vec![0.0; d as usize + 1];
        u_coeffs[0] = 1.0;
        u_coeffs[d as usize] = -1.0;
        Self {
            kind: ModelKind::General,
            branching: d,
            u_coeffs,
        }
    }

    /// Coalescing particles on the `d`-ary tree: `f(rho) = 1 - (1 - rho)^d`.
    pub fn general(d: u32) -> Result<Self> {
        if !(2..=64).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "branching must be in [2, 64], got {d}"
            )));
        }
        Ok(Self::coalescing_with_branching(d))
    }

    /// Majority voter on the ternary tree: `f(rho) = 2 M(rho / 2)`, which is
    /// `1 - (3/4) u - (1/4) u^3` in `u = 1 - rho`.
    pub fn voter() -> Self {
        Self {
            kind: ModelKind::Voter,
            branching: 3,
            u_coeffs: vec![1.0, -0.75, 0.0, -0.25],
        }
    }

    /// Builds a model from `f(1 - u) = sum_m a_m u^m`, checking `f(0) = 0`,
    /// `f(1) = 1` and strict monotonicity on `[0, 1]`.
    pub fn from_u_coeffs(branching: u32, u_coeffs: Vec<f64>) -> Result<Self> {
        let model = Self {
            kind: ModelKind::General,
            branching,
            u_coeffs,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.u_coeffs.first().copied() != Some(1.0) {
            return Err(Error::InvalidArgument("f(1) must equal 1".into()));
        }
        if self.f(0.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("f(0) must equal 0".into()));
        }
        let mut prev = self.f(0.0);
        for i in 1..=1000 {
            let next = self.f(i as f64 / 1000.0);
            if next <= prev {
                return Err(Error::InvalidArgument(
                    "f must be strictly increasing on [0, 1]".into(),
                ));
            }
            prev = next;
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn u_coeffs(&self) -> &[f64] {
        &self.u_coeffs
    }

    #[inline]
    fn f_of_u(&self, u: f64) -> f64 {
        self.u_coeffs.iter().rev().fold(0.0, |acc, &a| acc * u + a)
    }

    /// The update polynomial `f(rho)`.
    #[inline]
    pub fn f(&self, rho: f64) -> f64 {
        self.f_of_u(1.0 - rho)
    }

    /// `f'(1) = -a_1`.
    pub fn f_prime_at_one(&self) -> f64 {
        -self.u_coeffs.get(1).copied().unwrap_or(0.0)
    }

    /// Exponential rate at which fixed points approach 1: linearizing
    /// `u'' = (1 - f'(1)) u` gives `sqrt(1 - f'(1))`.
    pub fn tail_rate(&self) -> f64 {
        (1.0 - self.f_prime_at_one()).sqrt()
    }

    /// `V(1) - V(1 - u) = u^2 / 2 + sum_{m >= 1} a_m u^{m+1} / (m + 1)`.
    pub fn potential_gap(&self, u: f64) -> f64 {
        let series: f64 = self
            .u_coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, &a)| a * u.powi(m as i32 + 1) / (m as f64 + 1.0))
            .sum();
        0.5 * u * u + series
    }

    /// `V(rho)`, normalized by `V(0) = 0`.
    pub fn potential(&self, rho: f64) -> f64 {
        self.potential_gap(1.0) - self.potential_gap(1.0 - rho)
    }

    /// `V'(rho) = f(rho) - rho`.
    pub fn potential_slope(&self, rho: f64) -> f64 {
        self.f(rho) - rho
    }

    /// `int_w^inf e^{-s} f(rho(T_max + s - w)) ds` for the tail
    /// `1 - rho(T_max + x) = c e^{-lambda x}`, divided by `e^{-w}`.
    fn tail_factor(&self, c: f64, lambda: f64) -> f64 {
        self.u_coeffs
            .iter()
            .enumerate()
            .map(|(m, &a)| a * c.powi(m as i32) / (1.0 + m as f64 * lambda))
            .sum()
    }
}

/// Uniform grid on `[0, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub h: f64,
    pub t_max: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self { h: 0.01, t_max: 15.0 }
    }
}

impl GridParams {
    pub fn new(h: f64, t_max: f64) -> Result<Self> {
        let p = Self { h, t_max };
        p.intervals()?;
        Ok(p)
    }

    /// Number of grid intervals; `t_max` must be a multiple of `h`.
    pub fn intervals(&self) -> Result<usize> {
        if !(self.h > 0.0 && self.t_max > 0.0 && self.h.is_finite() && self.t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid needs h > 0 and t_max > 0, got h={} t_max={}",
                self.h, self.t_max
            )));
        }
        let n = (self.t_max / self.h).round();
        if (n * self.h - self.t_max).abs() > 1e-9 * self.t_max || n < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "t_max={} is not a multiple (>= 2) of h={}",
                self.t_max, self.h
            )));
        }
        if n > 5e7 {
            return Err(Error::InvalidArgument(format!("grid of {n} intervals is too fine")));
        }
        Ok(n as usize)
    }
}

/// An increasing function `[0, inf) -> [0, 1]` sampled on a uniform grid,
/// continued past the grid by `1 - rho(T_max + x) = (1 - v_N) e^{-lambda x}`.
/// A tail rate of zero continues the function flat, which represents the
/// constant equilibria exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    h: f64,
    values: Vec<f64>,
    tail_rate: f64,
}

impl GridFunction {
    pub fn new(h: f64, values: Vec<f64>, tail_rate: f64) -> Result<Self> {
        if !(h > 0.0) || values.len() < 3 || !(tail_rate >= 0.0) {
            return Err(Error::InvalidArgument(
                "grid function needs h > 0, at least 3 values and a tail rate >= 0".into(),
            ));
        }
        Ok(Self {
            h,
            values,
            tail_rate,
        })
    }

    pub fn from_fn(params: GridParams, tail_rate: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = params.intervals()?;
        let values = (0..=n).map(|i| f(i as f64 * params.h)).collect();
        Self::new(params.h, values, tail_rate)
    }

    /// The maximal element `1 - e^{-T}` of the transform domain.
    pub fn maximal(params: GridParams) -> Result<Self> {
        Self::from_fn(params, 1.0, |t| -(-t).exp_m1())
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_max(&self) -> f64 {
        self.h * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Value at an arbitrary `t >= 0`: grid nodes exactly, linear
    /// interpolation between them, the tail model beyond `T_max`.
    pub fn value_at(&self, t: f64) -> f64 {
        let last = self.values.len() - 1;
        let x = t / self.h;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 && nearest <= last as f64 {
            return self.values[nearest.max(0.0) as usize];
        }
        if x >= last as f64 {
            let gap = 1.0 - self.values[last];
            return 1.0 - gap * (-self.tail_rate * (t - self.t_max())).exp();
        }
        let i = x.floor().max(0.0) as usize;
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Sup-norm distance over grid nodes with `T <= up_to`. Both functions
    /// must share the step.
    pub fn sup_distance(&self, other: &GridFunction, up_to: f64) -> f64 {
        assert!(
            (self.h - other.h).abs() < 1e-15,
            "sup_distance needs matching grid steps"
        );
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .take_while(|(i, _)| self.time(*i) <= up_to + 1e-12)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the transform domain: values in `[0, 1]`, non-decreasing and
    /// below `1 - e^{-T}`, all up to [`DOMAIN_SLACK`].
    pub fn check_domain(&self) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        for (i, &v) in self.values.iter().enumerate() {
            let t = self.time(i);
            let reason = if !v.is_finite() {
                Some(format!("non-finite value {v}"))
            } else if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&v) {
                Some(format!("value {v} outside [0, 1]"))
            } else if v + DOMAIN_SLACK < prev {
                Some(format!("decreasing: {v} after {prev}"))
            } else if v > -(-t).exp_m1() + DOMAIN_SLACK {
                Some(format!("value {v} above 1 - e^(-{t})"))
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(Error::Domain { index: i, reason });
            }
            prev = v;
        }
        Ok(())
    }

    /// CSV serialization: a metadata comment line, a header, then one row per
    /// grid node. Numbers use the shortest round-trip representation.
    pub fn to_csv(&self, model: &FlowModel) -> String {
        let mut out = String::with_capacity(self.values.len() * 24);
        let _ = writeln!(
            out,
            "# model={},d={},h={},t_max={},lambda={}",
            model.kind().name(),
            model.branching(),
            self.h,
            self.t_max(),
            self.tail_rate
        );
        out.push_str("T,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.time(i), v);
        }
        out
    }

    /// Parses [`GridFunction::to_csv`] output, returning the model name and
    /// branching recorded in the metadata line.
    pub fn from_csv(text: &str) -> Result<(String, u32, GridFunction)> {
        let mut lines = text.lines();
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| Error::Parse("missing metadata line".into()))?;
        let mut model = None;
        let mut d = None;
        let mut h = None;
        let mut lambda = None;
        for field in meta.split(',') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad metadata field `{field}`")))?;
            let num = || v.parse::<f64>().map_err(|e| Error::Parse(format!("{k}: {e}")));
            match k {
                "model" => model = Some(v.to_string()),
                "d" => d = Some(v.parse::<u32>().map_err(|e| Error::Parse(format!("d: {e}")))?),
                "h" => h = Some(num()?),
                "lambda" => lambda = Some(num()?),
                "t_max" => {}
                _ => return Err(Error::Parse(format!("unknown metadata key `{k}`"))),
            }
        }
        if lines.next() != Some("T,value") {
            return Err(Error::Parse("missing `T,value` header".into()));
        }
        let values = lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let (_, v) = l
                    .split_once(',')
                    .ok_or_else(|| Error::Parse(format!("bad row `{l}`")))?;
                v.parse::<f64>().map_err(|e| Error::Parse(format!("row `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let missing = |what: &str| Error::Parse(format!("metadata lacks `{what}`"));
        let grid = GridFunction::new(
            h.ok_or_else(|| missing("h"))?,
            values,
            lambda.ok_or_else(|| missing("lambda"))?,
        )?;
        Ok((
            model.ok_or_else(|| missing("model"))?,
            d.ok_or_else(|| missing("d"))?,
            grid,
        ))
    }
}

/// Composite Newton-Cotes sum `int_0^{m h} y` for samples `y(0..=m)`:
/// Simpson's rule, with a trailing 3/8 panel when `m` is odd and the
/// trapezoid for a single interval. All weights are positive.
fn composite(m: usize, h: f64, y: impl Fn(usize) -> f64) -> f64 {
    match m {
        0 => 0.0,
        1 => 0.5 * h * (y(0) + y(1)),
        _ => {
            let simpson_end = if m.is_multiple_of(2) { m } else { m - 3 };
            let mut acc = 0.0;
            if simpson_end > 0 {
                let mut s = y(0) + y(simpson_end);
                for k in 1..simpson_end {
                    s += if k % 2 == 1 { 4.0 } else { 2.0 } * y(k);
                }
                acc += s * h / 3.0;
            }
            if simpson_end < m {
                let k = simpson_end;
                acc += 3.0 * h / 8.0 * (y(k) + 3.0 * y(k + 1) + 3.0 * y(k + 2) + y(k + 3));
            }
            acc
        }
    }
}

/// One application of the integral transform.
pub fn chi_apply(model: &FlowModel, rho: &GridFunction) -> Result<GridFunction> {
    rho.check_domain()?;
    let n = rho.values.len() - 1;
    let h = rho.h;
    let decay: Vec<f64> = (0..=n).map(|k| (-(k as f64) * h).exp()).collect();
    let fv: Vec<f64> = rho.values.iter().map(|&v| model.f(v)).collect();
    let gap = (1.0 - rho.values[n]).max(0.0);
    let tail = model.tail_factor(gap, rho.tail_rate);

    // g(t_i) = int_0^inf e^{-s} f(rho(t_i + s)) ds
    let g: Vec<f64> = (0..=n)
        .map(|i| composite(n - i, h, |k| decay[k] * fv[i + k]) + decay[n - i] * tail)
        .collect();
    // chi(T_i) = int_0^{T_i} e^{t - T_i} g(t) dt
    let values = (0..=n)
        .map(|i| composite(i, h, |k| decay[i - k] * g[k]))
        .collect();
    let tail_rate = if rho.tail_rate == 0.0 {
        0.0
    } else {
        model.tail_rate()
    };
    GridFunction::new(h, values, tail_rate)
}

/// `iterations` successive transforms of the maximal element `1 - e^{-T}`;
/// entry `k` is `chi^{k+1}(1 - e^{-T})`.
///
/// Every iterate must lie below its predecessor up to [`DOMAIN_SLACK`].
pub fn chi_iterate(
    model: &FlowModel,
    iterations: usize,
    params: GridParams,
) -> Result<Vec<GridFunction>> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let mut current = GridFunction::maximal(params)?;
    let mut out = Vec::with_capacity(iterations);
    for k in 0..iterations {
        let next = chi_apply(model, &current)?;
        check_below(&next, &current, k + 1)?;
        out.push(next.clone());
        current = next;
    }
    Ok(out)
}

fn check_below(next: &GridFunction, prev: &GridFunction, iteration: usize) -> Result<()> {
    if let Some((i, (a, b))) = next
        .values
        .iter()
        .zip(&prev.values)
        .enumerate()
        .find(|(_, (a, b))| **a > **b + DOMAIN_SLACK)
    {
        return Err(Error::Numerical(format!(
            "iterate {iteration} rose above its predecessor at T={}: {a} > {b}",
            next.time(i)
        )));
    }
    Ok(())
}

/// Result of iterating the transform to numerical convergence.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub function: GridFunction,
    pub iterations: usize,
    pub last_change: f64,
}

/// Iterates from the maximal element until successive iterates differ by
/// less than `tolerance` in sup-norm.
pub fn chi_limit(
    model: &FlowModel,
    params: GridParams,
    tolerance: f64,
    max_iterations: usize,
) -> Result<FixedPoint> {
    let mut current = GridFunction::maximal(params)?;
    for k in 1..=max_iterations {
        let next = chi_apply(model, &current)?;
        check_below(&next, &current, k)?;
        let change = next.sup_distance(&current, f64::INFINITY);
        if change < tolerance {
            return Ok(FixedPoint {
                function: next,
                iterations: k,
                last_change: change,
            });
        }
        current = next;
    }
    Err(Error::Numerical(format!(
        "no convergence to {tolerance} within {max_iterations} iterations"
    )))
}

/// Closed form of the maximal fixed point for coalescing on the binary tree,
/// `1 + 6 b e^{-T} / (b e^{-T} - 1)^2` with `b = sqrt(3) - 2`.
///
/// The expression is analytic in `T`, so it also evaluates for `T < 0`.
/// It is evaluated as `(x - b)(x - b') / (x - 1)^2` with `x = b e^{-T}` and
/// `b' = -2 - sqrt(3)` the other root of `x^2 + 4x + 1`, which is exact at 0.
pub fn closed_form_rho_inf(t: f64) -> f64 {
    let b = 3f64.sqrt() - 2.0;
    let b_conj = -2.0 - 3f64.sqrt();
    let x = b * (-t).exp();
    b * (-t).exp_m1() * (x - b_conj) / ((x - 1.0) * (x - 1.0))
}

/// The closed form sampled on a grid, with unit tail rate.
pub fn closed_form_grid(params: GridParams) -> Result<GridFunction> {
    GridFunction::from_fn(params, 1.0, closed_form_rho_inf)
}

/// The non-trivial solution of `rho'' = rho - f(rho)` with `rho(0) = 0`
/// and `rho -> 1`, from the energy reduction `rho' = sqrt(2 (V(1) - V(rho)))`
/// integrated by classical RK4.
pub fn solve_heteroclinic(model: &FlowModel, params: GridParams) -> Result<GridFunction> {
    if model.potential_slope(0.0).abs() > 1e-12 || model.potential_slope(1.0).abs() > 1e-12 {
        return Err(Error::Numerical("V' must vanish at 0 and 1".into()));
    }
    if (0..=1000).any(|i| model.potential_slope(i as f64 / 1000.0) < -1e-12) {
        return Err(Error::Numerical("V must be non-decreasing on [0, 1]".into()));
    }
    let n = params.intervals()?;
    let h = params.h;
    let lambda = model.tail_rate();
    let speed = |rho: f64| -> Result<f64> {
        let radicand = 2.0 * model.potential_gap(1.0 - rho);
        if radicand < -1e-12 {
            return Err(Error::Numerical(format!(
                "negative kinetic energy {radicand} at rho={rho}"
            )));
        }
        Ok(radicand.max(0.0).sqrt())
    };

    let mut values = Vec::with_capacity(n + 1);
    let mut rho = 0.0f64;
    values.push(rho);
    let mut switched: Option<(usize, f64)> = None;
    for i in 1..=n {
        if let Some((i0, u0)) = switched {
            values.push(1.0 - u0 * (-lambda * (i - i0) as f64 * h).exp());
            continue;
        }
        let k1 = speed(rho)?;
        let k2 = speed(rho + 0.5 * h * k1)?;
        let k3 = speed(rho + 0.5 * h * k2)?;
        let k4 = speed(rho + h * k3)?;
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(rho < 1.0) {
            return Err(Error::Numerical(format!("overshot rho = 1 at step {i}")));
        }
        values.push(rho);
        if 1.0 - rho < LINEARIZE_BELOW {
            switched = Some((i, 1.0 - rho));
        }
    }
    GridFunction::new(h, values, lambda)
}

/// `max_i |chi(rho)(T_i) - rho(T_i)|`.
pub fn fixed_point_residual(model: &FlowModel, rho: &GridFunction) -> Result<f64> {
    let image = chi_apply(model, rho)?;
    Ok(image.sup_distance(rho, f64::INFINITY))
}

/// `max |rho'' - (rho - f(rho))|` over interior nodes, with centered second
/// differences.
pub fn ode_residual(model: &FlowModel, rho: &GridFunction) -> f64 {
    let v = &rho.values;
    let h2 = rho.h * rho.h;
    (1..v.len() - 1)
        .map(|i| {
            let second = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
            (second - (v[i] - model.f(v[i]))).abs()
        })
        .fold(0.0, f64::max)
}

/// `max |rho'^2 / 2 + V(rho) - V(1)|` over nodes at least two steps from the
/// ends, with a fourth-order centered first derivative.
pub fn energy_deviation(model: &FlowModel, rho: &GridFunction) -> f64 {
    let v = &rho.values;
    let h = rho.h;
    (2..v.len() - 2)
        .map(|i| {
            let d = (-v[i + 2] + 8.0 * v[i + 1] - 8.0 * v[i - 1] + v[i - 2]) / (12.0 * h);
            (0.5 * d * d - model.potential_gap(1.0 - v[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument("slope fit needs two points".into()));
    }
    if let Some((x, y)) = points.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(Error::Numerical(format!("cannot take log of {y} at {x}")));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1.ln() - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Fitted decay slope of `1 - rho` over grid nodes in `[from, to]`.
pub fn tail_decay_slope(rho: &GridFunction, from: f64, to: f64) -> Result<f64> {
    let points: Vec<(f64, f64)> = (0..rho.values.len())
        .map(|i| (rho.time(i), 1.0 - rho.values[i]))
        .filter(|(t, _)| *t >= from - 1e-12 && *t <= to + 1e-12)
        .collect();
    log_slope(&points)
}
