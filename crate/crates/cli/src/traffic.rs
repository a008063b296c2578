//! Built-in benchmark: a diverge junction (link 1 splits evenly into links
//! 2 and 3) followed by two chains of downstream links, 2 -> 4 -> 6 ... and
//! 3 -> 5 -> 7 ..., with vehicle densities as states and an additive
//! inflow into link 1.

use boxreach::expr::VectorFieldSpec;
use boxreach::system::{ContractionData, VectorField};
use boxreach::{Interval, IntervalBox, IntervalMatrix, ReachError, Result, SystemModel};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficParams {
    pub n_x: usize,
    /// Time constant `T`.
    pub period: f64,
    /// Link capacity `c`.
    pub capacity: f64,
    /// Free-flow speed `v`.
    pub speed: f64,
    /// Jam density `x̄`.
    pub jam_density: f64,
    /// Congestion wave speed `w`.
    pub wave_speed: f64,
    /// Split ratio `β` of flow continuing downstream.
    pub split: f64,
    /// Bounds on the inflow into link 1.
    pub inflow: [f64; 2],
}

impl Default for TrafficParams {
    fn default() -> Self {
        Self {
            n_x: 3,
            period: 30.0,
            capacity: 40.0,
            speed: 0.5,
            jam_density: 320.0,
            wave_speed: 1.0 / 6.0,
            split: 0.75,
            inflow: [4.0 / 3.0, 2.0],
        }
    }
}

impl TrafficParams {
    pub fn with_links(n_x: usize) -> Self {
        Self { n_x, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x < 3 || self.n_x % 2 == 0 {
            return Err(ReachError::InvalidProblem(format!(
                "traffic network needs an odd number of links >= 3 (diverge plus two equal chains), got {}",
                self.n_x
            )));
        }
        let positive = [
            self.period,
            self.capacity,
            self.speed,
            self.jam_density,
            self.wave_speed,
            self.split,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(ReachError::InvalidProblem("traffic parameters must be finite and positive".into()));
        }
        if !(self.inflow[0] <= self.inflow[1]) {
            return Err(ReachError::InvalidProblem("inflow bounds must satisfy lower <= upper".into()));
        }
        Ok(())
    }

    /// Input box: inflow on link 1, zero elsewhere.
    pub fn input_box(&self) -> Result<IntervalBox> {
        let mut lo = vec![0.0; self.n_x];
        let mut hi = vec![0.0; self.n_x];
        (lo[0], hi[0]) = (self.inflow[0], self.inflow[1]);
        IntervalBox::new(lo, hi)
    }

    /// `[0, x̄]^n`, the box the densities stay in.
    pub fn invariant_space(&self) -> Result<IntervalBox> {
        IntervalBox::uniform(self.n_x, 0.0, self.jam_density)
    }
}

/// Literal with a round-trip representation, parenthesized so negative
/// values compose.
fn lit(v: f64) -> String {
    format!("({v:?})")
}

/// Branches of a `min`, as (expression, [(state index, slope)]).
type Branch = (String, Vec<(usize, f64)>);

/// Indicator that branch `j` attains the minimum, ties going to the lowest
/// index so that exactly one indicator is 1 at any point.
fn active(branches: &[Branch], j: usize) -> String {
    let mut factors = Vec::new();
    for (k, (b, _)) in branches.iter().enumerate() {
        let a = &branches[j].0;
        if k < j {
            factors.push(format!("(1 - step({a} - {b}))"));
        } else if k > j {
            factors.push(format!("step({b} - {a})"));
        }
    }
    factors.join("*")
}

struct MinTerm {
    branches: Vec<Branch>,
}

impl MinTerm {
    fn expr(&self) -> String {
        let args: Vec<&str> = self.branches.iter().map(|b| b.0.as_str()).collect();
        format!("min({})", args.join(", "))
    }

    /// Partial derivative with respect to state `i`, or `None` when it is
    /// identically zero.
    fn partial(&self, i: usize) -> Option<String> {
        let terms: Vec<String> = self
            .branches
            .iter()
            .enumerate()
            .filter_map(|(j, (_, slopes))| {
                slopes
                    .iter()
                    .find(|(s, _)| *s == i)
                    .map(|(_, g)| format!("{}*{}", lit(*g), active(&self.branches, j)))
            })
            .collect();
        (!terms.is_empty()).then(|| terms.join(" + "))
    }
}

struct Model {
    p: TrafficParams,
}

impl Model {
    fn x(i: usize) -> String {
        format!("x{}", i + 1)
    }

    /// Diverge flow `k(x)`.
    fn k(&self) -> MinTerm {
        let p = &self.p;
        let two_w = 2.0 * p.wave_speed;
        MinTerm {
            branches: vec![
                (lit(p.capacity), vec![]),
                (format!("{}*{}", lit(p.speed), Self::x(0)), vec![(0, p.speed)]),
                (format!("{}*({} - {})", lit(two_w), lit(p.jam_density), Self::x(1)), vec![(1, -two_w)]),
                (format!("{}*({} - {})", lit(two_w), lit(p.jam_density), Self::x(2)), vec![(2, -two_w)]),
            ],
        }
    }

    /// Outflow `l(x_i, x_{i+2})` of link `i` (0-based); the last two links
    /// have no downstream congestion term.
    fn l(&self, i: usize) -> MinTerm {
        let p = &self.p;
        let mut branches = vec![
            (lit(p.capacity), vec![]),
            (format!("{}*{}", lit(p.speed), Self::x(i)), vec![(i, p.speed)]),
        ];
        let j = i + 2;
        if j < p.n_x {
            let g = p.wave_speed / p.split;
            branches.push((format!("{}*({} - {})", lit(g), lit(p.jam_density), Self::x(j)), vec![(j, -g)]));
        }
        MinTerm { branches }
    }

    /// Component `i` as a weighted sum of min terms (before the `1/T` factor).
    fn terms(&self, i: usize) -> Vec<(f64, MinTerm)> {
        match i {
            0 => vec![(-1.0, self.k())],
            1 | 2 => vec![(0.5, self.k()), (-1.0, self.l(i))],
            _ => vec![(self.p.split, self.l(i - 2)), (-1.0, self.l(i))],
        }
    }

    fn spec(&self) -> Result<VectorFieldSpec> {
        let n = self.p.n_x;
        let inv_t = lit(1.0 / self.p.period);
        let mut f = Vec::with_capacity(n);
        let mut jx = vec![vec!["0".to_string(); n]; n];
        let mut jp = vec![vec!["0".to_string(); n]; n];
        for i in 0..n {
            let terms = self.terms(i);
            let sum: Vec<String> = terms.iter().map(|(w, t)| format!("{}*{}", lit(*w), t.expr())).collect();
            let mut fi = format!("{inv_t}*({})", sum.join(" + "));
            if i == 0 {
                fi.push_str(" + p1");
                jp[0][0] = "1".into();
            }
            f.push(fi);
            for (j, entry) in jx[i].iter_mut().enumerate() {
                let parts: Vec<String> = terms
                    .iter()
                    .filter_map(|(w, t)| t.partial(j).map(|d| format!("{}*({d})", lit(*w))))
                    .collect();
                if !parts.is_empty() {
                    *entry = format!("{inv_t}*({})", parts.join(" + "));
                }
            }
        }
        VectorFieldSpec::parse(n, n, &f)?.with_jacobians(&jx, &jp)
    }
}

/// Expression form of the field and its Jacobians.
pub fn traffic_spec(params: &TrafficParams) -> Result<VectorFieldSpec> {
    params.validate()?;
    Model { p: params.clone() }.spec()
}

/// Native evaluation of the traffic field; Jacobian bounds come from the
/// interval extension of the expression form.
#[derive(Debug, Clone)]
pub struct TrafficField {
    p: TrafficParams,
    spec: VectorFieldSpec,
}

/// Index of the smallest value, ties to the lowest index (matching the
/// indicator convention of the Jacobian expressions).
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

impl TrafficField {
    pub fn new(params: &TrafficParams) -> Result<Self> {
        Ok(Self {
            spec: traffic_spec(params)?,
            p: params.clone(),
        })
    }

    fn k_branches(&self, x: &[f64]) -> [f64; 4] {
        let p = &self.p;
        let two_w = 2.0 * p.wave_speed;
        [
            p.capacity,
            p.speed * x[0],
            two_w * (p.jam_density - x[1]),
            two_w * (p.jam_density - x[2]),
        ]
    }

    /// Branches of `l(x_i, x_{i+2})`; the third is absent for the last two links.
    fn l_branches(&self, i: usize, x: &[f64]) -> ([f64; 3], usize) {
        let p = &self.p;
        let j = i + 2;
        if j < p.n_x {
            ([p.capacity, p.speed * x[i], p.wave_speed / p.split * (p.jam_density - x[j])], 3)
        } else {
            ([p.capacity, p.speed * x[i], 0.0], 2)
        }
    }

    fn k(&self, x: &[f64]) -> f64 {
        self.k_branches(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn l(&self, i: usize, x: &[f64]) -> f64 {
        let (b, len) = self.l_branches(i, x);
        b[..len].iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn component(&self, i: usize, x: &[f64], k: f64) -> f64 {
        let flow = match i {
            0 => -k,
            1 | 2 => 0.5 * k - self.l(i, x),
            _ => self.p.split * self.l(i - 2, x) - self.l(i, x),
        };
        flow / self.p.period
    }

    /// Adds `weight * d l(x_i, x_{i+2}) / dx` into `row`.
    fn add_l_gradient(&self, i: usize, x: &[f64], weight: f64, row: &mut [f64]) {
        let (b, len) = self.l_branches(i, x);
        match argmin(&b[..len]) {
            1 => row[i] += weight * self.p.speed,
            2 => row[i + 2] -= weight * self.p.wave_speed / self.p.split,
            _ => {}
        }
    }
}

impl VectorField for TrafficField {
    fn n_x(&self) -> usize {
        self.p.n_x
    }

    fn n_p(&self) -> usize {
        self.p.n_x
    }

    fn eval(&self, _t: f64, x: &[f64], p: &[f64], out: &mut [f64]) -> Result<()> {
        let k = self.k(x);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.component(i, x, k);
        }
        out[0] += p[0];
        Ok(())
    }

    fn eval_component(&self, i: usize, _t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        let k = if i < 3 { self.k(x) } else { 0.0 };
        Ok(self.component(i, x, k) + if i == 0 { p[0] } else { 0.0 })
    }

    fn has_jacobian(&self) -> bool {
        true
    }

    fn jacobian(&self, _t: f64, x: &[f64], _p: &[f64], jx: &mut DMatrix<f64>, jp: &mut DMatrix<f64>) -> Result<()> {
        let n = self.p.n_x;
        jx.fill(0.0);
        jp.fill(0.0);
        jp[(0, 0)] = 1.0;
        let mut dk = [0.0; 3];
        match argmin(&self.k_branches(x)) {
            1 => dk[0] = self.p.speed,
            2 => dk[1] = -2.0 * self.p.wave_speed,
            3 => dk[2] = -2.0 * self.p.wave_speed,
            _ => {}
        }
        let mut row = vec![0.0; n];
        for i in 0..n {
            row.fill(0.0);
            match i {
                0 => (0..3).for_each(|j| row[j] = -dk[j]),
                1 | 2 => {
                    (0..3).for_each(|j| row[j] = 0.5 * dk[j]);
                    self.add_l_gradient(i, x, -1.0, &mut row);
                }
                _ => {
                    self.add_l_gradient(i - 2, x, self.p.split, &mut row);
                    self.add_l_gradient(i, x, -1.0, &mut row);
                }
            }
            for (j, v) in row.iter().enumerate() {
                jx[(i, j)] = v / self.p.period;
            }
        }
        Ok(())
    }

    fn jacobian_bounds(
        &self,
        t: Interval,
        x: &IntervalBox,
        p: &IntervalBox,
    ) -> Option<Result<(IntervalMatrix, IntervalMatrix)>> {
        Some(boxreach::expr::jacobian_bounds(&self.spec, t, x, p))
    }
}

/// Traffic system with additive input, the invariant space `[0, x̄]^n` and
/// a contraction matrix derived from the Jacobian bounds over that space.
pub fn build_traffic(params: &TrafficParams) -> Result<SystemModel> {
    let field = TrafficField::new(params)?;
    let space = params.invariant_space()?;
    let (jx, _) = boxreach::expr::jacobian_bounds(&field.spec, Interval::point(0.0), &space, &params.input_box()?)?;
    SystemModel::continuous(field)
        .with_additive_input()?
        .with_invariant_space(space)?
        .with_contraction(ContractionData::from_jacobian_bounds(&jx)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use boxreach::flow::finite_difference_sensitivities;

    fn eval(sys: &SystemModel, x: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sys.n_x()];
        sys.field().eval(0.0, x, p, &mut out).unwrap();
        out
    }

    fn k(x: &[f64]) -> f64 {
        let w = 1.0 / 6.0;
        40f64.min(0.5 * x[0]).min(2.0 * w * (320.0 - x[1])).min(2.0 * w * (320.0 - x[2]))
    }

    fn l(xi: f64, xj: Option<f64>) -> f64 {
        let c = 40f64.min(0.5 * xi);
        xj.map_or(c, |xj| c.min((1.0 / 6.0) * (320.0 - xj) / 0.75))
    }

    /// Independent hand-written dynamics for comparison.
    fn reference(x: &[f64], p1: f64) -> Vec<f64> {
        let n = x.len();
        let down = |i: usize| (i + 2 < n).then(|| x[i + 2]);
        (0..n)
            .map(|i| match i {
                0 => -k(x) / 30.0 + p1,
                1 | 2 => (k(x) / 2.0 - l(x[i], down(i))) / 30.0,
                _ => (0.75 * l(x[i - 2], Some(x[i])) - l(x[i], down(i))) / 30.0,
            })
            .collect()
    }

    #[test]
    fn hand_evaluated_points() {
        let sys = build_traffic(&TrafficParams::default()).unwrap();
        let f = eval(&sys, &[100.0, 100.0, 100.0], &[0.0; 3]);
        assert_abs_diff_eq!(f[0], -40.0 / 30.0, epsilon = 1e-12);
        let f = eval(&sys, &[0.0; 3], &[0.0; 3]);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn matches_reference_dynamics() {
        for n in [3, 5, 9] {
            let sys = build_traffic(&TrafficParams::with_links(n)).unwrap();
            for s in 0..50 {
                let x: Vec<f64> = (0..n).map(|i| ((s * 37 + i * 91) % 320) as f64 + 0.5).collect();
                let mut p = vec![0.0; n];
                p[0] = 1.5;
                let got = eval(&sys, &x, &p);
                let want = reference(&x, 1.5);
                for i in 0..n {
                    assert_abs_diff_eq!(got[i], want[i], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn native_and_expression_forms_agree() {
        let params = TrafficParams::with_links(9);
        let native = TrafficField::new(&params).unwrap();
        let spec = traffic_spec(&params).unwrap();
        let n = 9;
        let mut p = vec![0.0; n];
        p[0] = 1.7;
        for s in 0..60 {
            // Integer-valued states hit branch ties of the min terms.
            let x: Vec<f64> = (0..n).map(|i| ((s * 67 + i * 43) % 321) as f64).collect();
            let (mut a, mut b) = (vec![0.0; n], vec![0.0; n]);
            native.eval(0.0, &x, &p, &mut a).unwrap();
            spec.eval(0.0, &x, &p, &mut b).unwrap();
            let (mut ja, mut jpa) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
            let (mut jb, mut jpb) = (DMatrix::zeros(n, n), DMatrix::zeros(n, n));
            native.jacobian(0.0, &x, &p, &mut ja, &mut jpa).unwrap();
            spec.jacobian(0.0, &x, &p, &mut jb, &mut jpb).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-12);
                assert_abs_diff_eq!(native.eval_component(i, 0.0, &x, &p).unwrap(), a[i], epsilon = 1e-15);
            }
            assert!((ja - jb).amax() < 1e-15);
            assert_eq!(jpa, jpb);
        }
    }

    #[test]
    fn jacobian_expressions_match_finite_differences() {
        let sys = build_traffic(&TrafficParams::with_links(7)).unwrap();
        let n = 7;
        for s in 0..30 {
            let x: Vec<f64> = (0..n).map(|i| ((s * 53 + i * 29) % 300) as f64 + 7.3).collect();
            let p = vec![0.0; n];
            let mut jx = DMatrix::zeros(n, n);
            let mut jp = DMatrix::zeros(n, n);
            sys.field().jacobian(0.0, &x, &p, &mut jx, &mut jp).unwrap();
            for j in 0..n {
                let h = 1e-6;
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += h;
                b[j] -= h;
                let (fa, fb) = (eval(&sys, &a, &p), eval(&sys, &b, &p));
                for i in 0..n {
                    assert_abs_diff_eq!(jx[(i, j)], (fa[i] - fb[i]) / (2.0 * h), epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn jacobian_bounds_enclose_point_jacobians() {
        let params = TrafficParams::with_links(5);
        let sys = build_traffic(&params).unwrap();
        let prob = boxreach::ReachProblem::continuous(
            0.0,
            30.0,
            IntervalBox::uniform(5, 100.0, 200.0).unwrap(),
            params.input_box().unwrap(),
        );
        let (bx, _) = boxreach::hub::available_jacobian_bounds(&sys, &prob).unwrap().unwrap();
        for s in 0..40 {
            let x: Vec<f64> = (0..5).map(|i| ((s * 71 + i * 13) % 320) as f64).collect();
            let mut jx = DMatrix::zeros(5, 5);
            let mut jp = DMatrix::zeros(5, 5);
            sys.field().jacobian(0.0, &x, &[0.0; 5], &mut jx, &mut jp).unwrap();
            assert!(bx.contains_matrix(&jx, 0.0));
        }
        // Growth bound's matrix is Metzler with the upper diagonal bound.
        let c = ContractionData::from_jacobian_bounds(&bx).unwrap();
        assert!(c.input_influence.is_none());
    }

    #[test]
    fn sensitivities_are_available() {
        let params = TrafficParams::default();
        let sys = build_traffic(&params).unwrap();
        let s = finite_difference_sensitivities(&sys, 0.0, 1.0, &[150.0, 200.0, 120.0], &[1.5, 0.0, 0.0], 20, 1e-5);
        assert!(s.is_ok());
    }

    #[test]
    fn large_network_builds() {
        let sys = build_traffic(&TrafficParams::with_links(99)).unwrap();
        assert_eq!(sys.n_x(), 99);
        // Last two links use the truncated outflow: they never see a
        // downstream congestion term.
        let mut x = vec![150.0; 99];
        x[97] = 10.0;
        let f = eval(&sys, &x, &[0.0; 99]);
        let expected = (0.75 * 40f64.min(0.5 * 150.0).min((1.0 / 6.0) * (320.0 - 10.0) / 0.75) - 5.0) / 30.0;
        assert_abs_diff_eq!(f[97], expected, epsilon = 1e-12);
    }

    #[test]
    fn rejects_even_or_small_networks() {
        for n in [0, 1, 2, 4, 98] {
            assert!(build_traffic(&TrafficParams::with_links(n)).is_err());
        }
    }
}
