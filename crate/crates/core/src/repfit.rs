//! Discrete-measure fits of the integral representations:
//! Laplace (`sum w e^{-a x}`), Lévy (`phi0 + c x + sum w (1 - e^{-a x})`) and moment (`sum w s^x`).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr, Symbol};
use crate::nnls::{nnls, NnlsError, NnlsSolution};
use crate::opsim::{Grid, OpError, SampledFunction};

pub const DEFAULT_ATOM_LO: f64 = 1e-3;
pub const DEFAULT_ATOM_HI: f64 = 1e2;
pub const DEFAULT_ATOM_COUNT: usize = 60;
pub const DEFAULT_S_POINTS: usize = 201;
/// Weight of the `sum w = 1` row relative to the data rows.
pub const PROBABILITY_PENALTY: f64 = 1e6;
/// Relative residual above which a fit is reported as not representable.
pub const REPRESENTABLE_RESIDUAL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("atom grid is empty")]
    EmptyGrid,
    #[error("invalid atom location {a}")]
    InvalidAtom { a: f64 },
    #[error("invalid atom weight {weight} at {a}")]
    InvalidWeight { a: f64, weight: f64 },
    #[error("sample at x = {x} is {value}, expected positive")]
    NotPositive { x: f64, value: f64 },
    #[error("{0}")]
    Config(String),
    #[error("nnls: {0}")]
    Nnls(#[from] NnlsError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub a: f64,
    pub weight: f64,
}

/// Finitely many atoms, locations ascending and distinct, weights nonnegative.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn new(mut atoms: Vec<Atom>) -> Result<DiscreteMeasure, FitError> {
        for at in &atoms {
            if !(at.a >= 0.0 && at.a.is_finite()) {
                return Err(FitError::InvalidAtom { a: at.a });
            }
            if !(at.weight >= 0.0 && at.weight.is_finite()) {
                return Err(FitError::InvalidWeight { a: at.a, weight: at.weight });
            }
        }
        atoms.sort_by(|p, q| p.a.total_cmp(&q.a));
        if let Some(w) = atoms.windows(2).find(|w| w[0].a == w[1].a) {
            return Err(FitError::InvalidAtom { a: w[1].a });
        }
        Ok(DiscreteMeasure { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Atom of largest weight.
    pub fn dominant(&self) -> Option<Atom> {
        self.atoms.iter().copied().fold(None, |best: Option<Atom>, at| match best {
            Some(b) if b.weight >= at.weight => Some(b),
            _ => Some(at),
        })
    }

    /// Drops atoms lighter than `rel` times the total mass.
    pub fn pruned(&self, rel: f64) -> DiscreteMeasure {
        let floor = rel * self.total_mass();
        DiscreteMeasure { atoms: self.atoms.iter().copied().filter(|a| a.weight > floor).collect() }
    }

    /// Merges chains of atoms whose neighbouring locations differ by at most `max_gap`;
    /// each chain becomes one atom at its weighted mean location.
    pub fn clustered(&self, max_gap: f64) -> DiscreteMeasure {
        let mut out: Vec<Atom> = Vec::new();
        let mut moment = 0.0;
        let mut last = f64::NEG_INFINITY;
        for at in &self.atoms {
            match out.last_mut() {
                Some(cur) if at.a - last <= max_gap => {
                    moment += at.a * at.weight;
                    cur.weight += at.weight;
                    if cur.weight > 0.0 {
                        cur.a = moment / cur.weight;
                    }
                }
                _ => {
                    moment = at.a * at.weight;
                    out.push(*at);
                }
            }
            last = at.a;
        }
        DiscreteMeasure { atoms: out }
    }

    /// CSV with header `a,weight`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FitError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| FitError::Csv(e.to_string());
        w.write_record(["a", "weight"]).map_err(csv_err)?;
        for at in &self.atoms {
            w.write_record([at.a.to_string(), at.weight.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    fn from_solution(locations: &[f64], weights: &[f64]) -> DiscreteMeasure {
        let atoms = locations
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(a, w)| Atom { a: *a, weight: *w })
            .collect();
        DiscreteMeasure { atoms }
    }
}

/// `phi(x) = phi0 + c x + sum w (1 - e^{-a x})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyTriple {
    pub phi0: f64,
    pub c: f64,
    #[serde(rename = "atoms")]
    pub measure: DiscreteMeasure,
}

impl LevyTriple {
    pub fn new(phi0: f64, c: f64, measure: DiscreteMeasure) -> Result<LevyTriple, FitError> {
        if !(c >= 0.0 && c.is_finite()) || !phi0.is_finite() {
            return Err(FitError::Config(format!("invalid Lévy triple (phi0 = {phi0}, c = {c})")));
        }
        Ok(LevyTriple { phi0, c, measure })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    Laplace { measure: DiscreteMeasure },
    Levy { triple: LevyTriple },
    Moment { measure: DiscreteMeasure },
}

impl Representation {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Representation::Laplace { measure } => measure.atoms.iter().map(|at| at.weight * (-at.a * x).exp()).sum(),
            Representation::Levy { triple } => {
                triple.phi0
                    + triple.c * x
                    + triple
                        .measure
                        .atoms
                        .iter()
                        .map(|at| at.weight * -(-at.a * x).exp_m1())
                        .sum::<f64>()
            }
            Representation::Moment { measure } => measure.atoms.iter().map(|at| at.weight * moment_basis(at.a, x)).sum(),
        }
    }

    /// Symbolic form, for classifying a synthesized representation.
    /// Moment atoms at `s = 0` have no closed form and give `None`.
    pub fn to_expr(&self) -> Option<Expr> {
        let mut terms: Vec<Expr> = Vec::new();
        let exp_term = |a: f64| Expr::call(crate::expr::Func::Exp, Expr::Var.scaled(-a));
        match self {
            Representation::Laplace { measure } => {
                for at in &measure.atoms {
                    terms.push(exp_term(at.a).scaled(at.weight));
                }
            }
            Representation::Levy { triple } => {
                terms.push(Expr::num(triple.phi0));
                terms.push(Expr::Var.scaled(triple.c));
                for at in &triple.measure.atoms {
                    let basis = Expr::binary(crate::expr::BinOp::Sub, Expr::num(1.0), exp_term(at.a));
                    terms.push(basis.scaled(at.weight));
                }
            }
            Representation::Moment { measure } => {
                for at in &measure.atoms {
                    if at.a <= 0.0 {
                        return None;
                    }
                    terms.push(exp_term(-at.a.ln()).scaled(at.weight));
                }
            }
        }
        let mut it = terms.into_iter();
        let first = it.next().unwrap_or(Expr::num(0.0));
        Some(it.fold(first, |acc, t| Expr::binary(crate::expr::BinOp::Add, acc, t)))
    }
}

impl Symbol for Representation {
    fn value(&self, x: f64) -> Result<f64, EvalError> {
        Ok(Representation::value(self, x))
    }
}

pub fn synthesize(rep: &Representation, g: Grid) -> SampledFunction {
    SampledFunction::from_fn(g, |x| rep.value(x))
}

fn moment_basis(s: f64, x: f64) -> f64 {
    if s == 0.0 {
        if x == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        s.powf(x)
    }
}

/// KKT summary of the NNLS solution behind a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kkt {
    /// `max |A^T r|_j` over atoms with positive weight.
    pub active_gradient: f64,
    /// `max (A^T r)_j` over atoms with zero weight.
    pub inactive_gradient: f64,
    pub scale: f64,
    pub iterations: usize,
}

impl Kkt {
    fn from_solution(s: &NnlsSolution) -> Kkt {
        let mut active = 0.0f64;
        let mut inactive = f64::NEG_INFINITY;
        for (x, g) in s.x.iter().zip(&s.gradient) {
            if *x > 0.0 {
                active = active.max(g.abs());
            } else {
                inactive = inactive.max(*g);
            }
        }
        Kkt {
            active_gradient: active,
            inactive_gradient: if inactive.is_finite() { inactive } else { 0.0 },
            scale: s.scale,
            iterations: s.iterations,
        }
    }

    pub fn satisfied(&self, rel: f64) -> bool {
        let tol = rel * self.scale;
        self.active_gradient <= tol && self.inactive_gradient <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmFit {
    pub measure: DiscreteMeasure,
    /// `||A w - phi||_2 / ||phi||_2` over the sample nodes.
    pub residual: f64,
    pub representable: bool,
    pub kkt: Kkt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaFit {
    pub triple: LevyTriple,
    pub residual: f64,
    pub representable: bool,
    pub kkt: Kkt,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubnormalFit {
    /// Fitted to `phi / divisor`.
    pub measure: DiscreteMeasure,
    pub residual: f64,
    pub representable: bool,
    /// `phi(0)`; samples were divided by it.
    pub divisor: f64,
    pub normalized: bool,
    pub a_max: f64,
    /// `max phi(x + 1) / phi(x)` over the sample nodes, when 1 is a multiple of the spacing.
    pub a_max_estimate: Option<f64>,
    pub total_mass: f64,
    pub kkt: Kkt,
}

impl SubnormalFit {
    /// Representation of the raw (unnormalized) samples.
    pub fn raw_representation(&self) -> Representation {
        let atoms = self
            .measure
            .atoms
            .iter()
            .map(|at| Atom { a: at.a, weight: at.weight * self.divisor })
            .collect();
        Representation::Moment { measure: DiscreteMeasure { atoms } }
    }
}

/// `count` log-spaced locations on `[lo, hi]`.
pub fn log_atoms(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>, FitError> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(FitError::Config(format!("invalid log atom grid {lo}:{hi}:{count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (l, h) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..count)
        .map(|i| (l + (h - l) * i as f64 / (count - 1) as f64).exp())
        .collect();
    v[0] = lo;
    v[count - 1] = hi;
    Ok(v)
}

/// `count` uniform locations on `[0, a_max]`.
pub fn uniform_atoms(a_max: f64, count: usize) -> Result<Vec<f64>, FitError> {
    if !(a_max > 0.0 && a_max.is_finite()) || count < 2 {
        return Err(FitError::Config(format!("invalid uniform atom grid on [0, {a_max}] with {count} points")));
    }
    Ok((0..count).map(|i| a_max * i as f64 / (count - 1) as f64).collect())
}

pub fn default_atoms() -> Vec<f64> {
    log_atoms(DEFAULT_ATOM_LO, DEFAULT_ATOM_HI, DEFAULT_ATOM_COUNT).expect("default grid is valid")
}

fn prepare_atoms(atoms: &[f64]) -> Result<Vec<f64>, FitError> {
    if atoms.is_empty() {
        return Err(FitError::EmptyGrid);
    }
    if let Some(a) = atoms.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(FitError::InvalidAtom { a: *a });
    }
    let mut v = atoms.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

fn check_positive(samples: &SampledFunction) -> Result<(), FitError> {
    let g = samples.grid();
    for (i, v) in samples.values().iter().enumerate() {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(FitError::NotPositive { x: g.node(i), value: *v });
        }
    }
    Ok(())
}

fn relative(residual: f64, samples: &SampledFunction) -> f64 {
    let norm = samples.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    residual / norm
}

pub fn fit_cm(samples: &SampledFunction, atoms: &[f64]) -> Result<CmFit, FitError> {
    let atoms = prepare_atoms(atoms)?;
    check_positive(samples)?;
    let xs = samples.grid().nodes();
    let a = DMatrix::from_fn(xs.len(), atoms.len(), |i, j| (-xs[i] * atoms[j]).exp());
    let b = DVector::from_column_slice(samples.values());
    let sol = nnls(&a, &b)?;
    let residual = relative(sol.residual_norm, samples);
    Ok(CmFit {
        measure: DiscreteMeasure::from_solution(&atoms, &sol.x),
        residual,
        representable: residual <= REPRESENTABLE_RESIDUAL,
        kkt: Kkt::from_solution(&sol),
    })
}

/// `phi0` is the sample at `x = 0`; the drift and atom weights are fitted to `phi - phi0`.
pub fn fit_ca(samples: &SampledFunction, atoms: &[f64]) -> Result<CaFit, FitError> {
    let atoms = prepare_atoms(atoms)?;
    check_positive(samples)?;
    let xs = samples.grid().nodes();
    let phi0 = samples.values()[0];
    let a = DMatrix::from_fn(xs.len(), atoms.len() + 1, |i, j| {
        if j == 0 {
            xs[i]
        } else {
            -(-xs[i] * atoms[j - 1]).exp_m1()
        }
    });
    let b = DVector::from_iterator(xs.len(), samples.values().iter().map(|v| v - phi0));
    let sol = nnls(&a, &b)?;
    let residual = relative(sol.residual_norm, samples);
    Ok(CaFit {
        triple: LevyTriple {
            phi0,
            c: sol.x[0],
            measure: DiscreteMeasure::from_solution(&atoms, &sol.x[1..]),
        },
        residual,
        representable: residual <= REPRESENTABLE_RESIDUAL,
        kkt: Kkt::from_solution(&sol),
    })
}

/// Moment fit `phi(x) / phi(0) = sum w s^x` over `s_grid` in `[0, a_max]`, with `sum w = 1`
/// imposed by a penalty row.
pub fn fit_subnormal(samples: &SampledFunction, a_max: f64, s_grid: &[f64]) -> Result<SubnormalFit, FitError> {
    if !(a_max > 0.0 && a_max.is_finite()) {
        return Err(FitError::Config(format!("a_max must be positive, got {a_max}")));
    }
    let s_grid = prepare_atoms(s_grid)?;
    if let Some(s) = s_grid.iter().find(|s| **s > a_max) {
        return Err(FitError::InvalidAtom { a: *s });
    }
    check_positive(samples)?;
    let g = samples.grid();
    let xs = g.nodes();
    let divisor = samples.values()[0];
    let normalized = SampledFunction::new(g, samples.values().iter().map(|v| v / divisor).collect())?;
    let m = xs.len();
    let a = DMatrix::from_fn(m + 1, s_grid.len(), |i, j| {
        if i == m {
            PROBABILITY_PENALTY
        } else {
            moment_basis(s_grid[j], xs[i])
        }
    });
    let mut b = DVector::zeros(m + 1);
    b.rows_mut(0, m).copy_from_slice(normalized.values());
    b[m] = PROBABILITY_PENALTY;
    let sol = nnls(&a, &b)?;
    let data_resid = (0..m)
        .map(|i| {
            let fitted: f64 = (0..s_grid.len()).map(|j| a[(i, j)] * sol.x[j]).sum();
            (fitted - b[i]).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let residual = relative(data_resid, &normalized);
    let a_max_estimate = g.steps(1.0).ok().filter(|k| *k < m).map(|k| {
        let v = samples.values();
        (0..m - k).map(|i| v[i + k] / v[i]).fold(f64::NEG_INFINITY, f64::max)
    });
    let measure = DiscreteMeasure::from_solution(&s_grid, &sol.x);
    Ok(SubnormalFit {
        total_mass: measure.total_mass(),
        measure,
        residual,
        representable: residual <= REPRESENTABLE_RESIDUAL,
        divisor,
        normalized: divisor != 1.0,
        a_max,
        a_max_estimate,
        kkt: Kkt::from_solution(&sol),
    })
}

/// `|phi_t(x) - 1|` with `phi_t(x) = sqrt(phi(x) / phi(x - t))`.
pub fn weight_limit_check<S: Symbol + ?Sized>(sym: &S, t: f64, x_probe: f64) -> Result<f64, FitError> {
    if !(t >= 0.0 && x_probe >= t && x_probe.is_finite()) {
        return Err(FitError::Config(format!("need 0 <= t <= x_probe, got t = {t}, x_probe = {x_probe}")));
    }
    let num = sym.value(x_probe)?;
    let den = sym.value(x_probe - t)?;
    if !(den > 0.0) {
        return Err(FitError::NotPositive { x: x_probe - t, value: den });
    }
    if !(num > 0.0) {
        return Err(FitError::NotPositive { x: x_probe, value: num });
    }
    Ok(((num / den).sqrt() - 1.0).abs())
}
